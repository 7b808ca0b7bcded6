"""Path metrics, habitat visits, and the random-transect benchmark."""

import numpy as np
import pytest

from bathyplan.evaluation import (benchmark_transects, habitat_visits,
                                  mc, mpd, msd, path_features,
                                  sample_environment_features)
from bathyplan.features import MahalanobisModel, mahalanobis
from bathyplan.paths import Path, densify

from conftest import EVAL_SEED, random_spd


def identity_model(d=2):
    return MahalanobisModel(mean=np.zeros(d), inv_cov=np.eye(d), ridge=0.0)


class TestMpd:
    def test_identical_features_zero(self):
        feats = np.tile([1.5, -2.0], (7, 1))
        assert mpd(feats, identity_model()) == 0.0

    def test_two_point_hand_value(self):
        # N=2 with distance 4: (0 + 4 + 4 + 0) / 4 = 2
        feats = np.array([[0.0, 0.0], [4.0, 0.0]])
        assert mpd(feats, identity_model()) == pytest.approx(2.0)

    def test_matches_double_loop_oracle(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            d = int(rng.integers(2, 5))
            model = MahalanobisModel(mean=np.zeros(d), inv_cov=random_spd(rng, d),
                                     ridge=0.0)
            X = rng.standard_normal((int(rng.integers(2, 50)), d))
            total = 0.0
            for xi in X:
                for xj in X:
                    diff = xi - xj
                    total += np.sqrt(diff @ model.inv_cov @ diff)
            assert mpd(X, model) == pytest.approx(total / len(X) ** 2, abs=1e-9)

    def test_permutation_invariant(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((20, 3))
        model = MahalanobisModel(mean=np.zeros(3), inv_cov=random_spd(rng, 3), ridge=0.0)
        assert mpd(X, model) == pytest.approx(mpd(X[::-1], model), abs=1e-12)

    def test_single_feature_zero(self):
        assert mpd(np.array([[3.0, 1.0]]), identity_model()) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mpd(np.zeros((0, 2)), identity_model())


class TestMsd:
    def test_samples_subset_of_path_zero(self):
        rng = np.random.default_rng(2)
        X = rng.standard_normal((10, 2))
        assert msd(X, X[3:6], identity_model()) == 0.0

    def test_single_pair(self):
        model = identity_model()
        assert msd(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]]), model) == \
            pytest.approx(5.0)

    def test_matches_min_loop_oracle(self):
        rng = np.random.default_rng(3)
        d = 3
        model = MahalanobisModel(mean=np.zeros(d), inv_cov=random_spd(rng, d), ridge=0.0)
        X = rng.standard_normal((12, d))
        Y = rng.standard_normal((50, d))
        expected = np.mean([min(mahalanobis(model, x, y) for x in X) for y in Y])
        assert msd(X, Y, model) == pytest.approx(expected, abs=1e-9)

    def test_monotone_in_path_growth(self):
        rng = np.random.default_rng(4)
        model = identity_model(3)
        X = rng.standard_normal((8, 3))
        Y = rng.standard_normal((30, 3))
        more = np.vstack([X, rng.standard_normal((4, 3))])
        assert msd(more, Y, model) <= msd(X, Y, model) + 1e-12

    def test_permutation_invariant(self):
        rng = np.random.default_rng(5)
        model = identity_model(2)
        X = rng.standard_normal((6, 2))
        Y = rng.standard_normal((9, 2))
        assert msd(X, Y, model) == pytest.approx(msd(X[::-1], Y[::-1], model), abs=1e-12)


class TestMc:
    def test_crossing_all_zones(self, threezone):
        tz = threezone
        # a diagonal across the whole fixture touches every cluster
        xmin, ymin, xmax, ymax = tz.grid.extent
        diag = Path(np.array([[xmin + 5, ymin + 5], [xmax - 5, ymax - 5],
                              [xmin + 5, ymax - 5], [xmax - 5, ymin + 5]]))
        assert mc(diag, tz.cmap, tz.spacing) == 1.0

    def test_single_zone_fraction(self, threezone):
        tz = threezone
        # short hop inside the rubble interior: exactly one of K visited
        inside = Path(np.array([[40.0, 460.0], [60.0, 460.0]]))
        labels_seen = set(tz.cmap.labels_at(densify(inside, tz.spacing).waypoints))
        assert len(labels_seen) == 1
        total = len(set(tz.cmap.labels.tolist()))
        assert mc(inside, tz.cmap, tz.spacing) == pytest.approx(1.0 / total)

    def test_l_shaped_path_manual_fixture(self):
        from test_clustering import map_from_label_grid

        g = np.zeros((6, 6), dtype=int)
        g[:, 3:] = 1
        g[4:, :2] = 2
        cmap = map_from_label_grid(g)
        # L-path: down the label-0 column then east into label-1; misses 2
        path = Path(np.array([[0.5, 5.5], [0.5, 2.5], [4.5, 2.5]]))
        assert mc(path, cmap, spacing=0.5) == pytest.approx(2.0 / 3.0)

    def test_excluded_clusters_drop_from_both_sides(self, threezone):
        tz = threezone
        xmin, ymin, xmax, ymax = tz.grid.extent
        diag = Path(np.array([[xmin + 5, ymin + 5], [xmax - 5, ymax - 5]]))
        all_ids = sorted(set(tz.cmap.labels.tolist()))
        assert mc(diag, tz.cmap, tz.spacing, excluded=(all_ids[0],)) <= 1.0

    def test_visited_set_grows_with_waypoints(self, threezone):
        tz = threezone
        p1 = Path(np.array([[40.0, 460.0], [60.0, 460.0]]))
        p2 = Path(np.vstack([p1.waypoints, [[340.0, 120.0]]]))
        assert mc(p2, tz.cmap, tz.spacing) >= mc(p1, tz.cmap, tz.spacing)


class TestHabitatVisits:
    def test_fully_inside_one_label(self, threezone):
        tz = threezone
        # southwest corner: sand interior (rubble is the northern band)
        path = Path(np.array([[30.0, 27.5], [80.0, 27.5]]))
        counts = habitat_visits(path, tz.labels, tz.grid, tz.spacing)
        assert set(counts) == {0}

    def test_crossing_visits_every_label(self, threezone):
        tz = threezone
        xmin, ymin, xmax, ymax = tz.grid.extent
        # northwest -> southeast: passes rubble, sand, and the reef wedge
        diag = Path(np.array([[xmin + 5, ymax - 5], [xmax - 5, ymin + 5]]))
        counts = habitat_visits(diag, tz.labels, tz.grid, tz.spacing)
        assert all(counts.get(z, 0) >= 1 for z in range(3))

    def test_counts_sum_to_waypoints(self, threezone):
        tz = threezone
        path = Path(np.array([[40.0, 440.0], [200.0, 300.0], [400.0, 100.0]]))
        dense = densify(path, tz.spacing)
        counts = habitat_visits(path, tz.labels, tz.grid, tz.spacing)
        assert sum(counts.values()) == dense.n_points


class TestBenchmark:
    def test_uniform_terrain_near_zero_mpd(self):
        from test_inforrt import flat_env

        env = flat_env()
        from bathyplan.clustering import ClusterMap

        cmap = ClusterMap(labels=np.zeros(env.field.n_sites, dtype=int),
                          field=env.field, K=1)
        result = benchmark_transects(env.grid, env.mask, env.field, env.model, cmap,
                                     budget=30.0, n=1, seed=0, spacing=4.0)
        assert result.records[0]["mpd"] == pytest.approx(0.0, abs=1e-6)
        assert result.records[0]["mc"] == 1.0

    def test_means_equal_recomputed_means(self, threezone):
        tz = threezone
        result = benchmark_transects(tz.grid, tz.mask, tz.ffield, tz.model, tz.cmap,
                                     budget=400.0, n=25, seed=3, spacing=tz.spacing)
        assert result.n_transects == 25
        for key in ("mpd", "msd", "mc", "d_m"):
            raw = [r[key] for r in result.records]
            assert result.means[key] == pytest.approx(np.mean(raw), abs=1e-12)

    def test_deterministic_and_order_independent(self, threezone):
        tz = threezone
        a = benchmark_transects(tz.grid, tz.mask, tz.ffield, tz.model, tz.cmap,
                                budget=300.0, n=10, seed=5, spacing=tz.spacing)
        b = benchmark_transects(tz.grid, tz.mask, tz.ffield, tz.model, tz.cmap,
                                budget=300.0, n=10, seed=5, spacing=tz.spacing, jobs=4)
        assert a.means == b.means
        assert a.records == b.records

    def test_transect_length_clipped_at_boundary(self, threezone):
        tz = threezone
        result = benchmark_transects(tz.grid, tz.mask, tz.ffield, tz.model, tz.cmap,
                                     budget=5000.0, n=20, seed=7, spacing=tz.spacing)
        xmin, ymin, xmax, ymax = tz.grid.extent
        diag = np.hypot(xmax - xmin, ymax - ymin)
        for r in result.records:
            assert r["d_m"] <= diag + 1e-9

    def test_planner_full_coverage_beats_benchmark_mean(self, threezone):
        # the cluster-visit gap seen on real sites: a routed survey hits
        # every cluster type while random transects average below 1
        from bathyplan.clustering import representative_points
        from bathyplan.tsp import SetTspInstance, solve_set_tsp

        tz = threezone
        bench = benchmark_transects(tz.grid, tz.mask, tz.ffield, tz.model, tz.cmap,
                                    budget=1500.0, n=25, seed=11, spacing=tz.spacing)
        nodes = representative_points(tz.polys, per_component=1, seed=0)
        inst = SetTspInstance(
            nodes=np.asarray([[n.easting, n.northing] for n in nodes]),
            cluster_ids=np.asarray([n.cluster_id for n in nodes]))
        tour = solve_set_tsp(inst, seed=0, sweeps=200)
        assert mc(tour, tz.cmap, tz.spacing) == 1.0
        assert bench.means["mc"] < 1.0

    def test_all_blocked_raises(self, threezone):
        from bathyplan.errors import PlannerError
        from bathyplan.grid import ObstacleMask

        tz = threezone
        blocked = ObstacleMask(tz.grid.ncols, tz.grid.nrows, tz.grid.xllcorner,
                               tz.grid.yllcorner, tz.grid.cellsize,
                               np.ones((tz.grid.nrows, tz.grid.ncols), dtype=bool))
        with pytest.raises(PlannerError):
            benchmark_transects(tz.grid, blocked, tz.ffield, tz.model, tz.cmap,
                                budget=100.0, n=2, seed=0, spacing=tz.spacing)


class TestEnvironmentSampling:
    def test_seeded_and_uniform_over_open_sites(self, threezone):
        tz = threezone
        a = sample_environment_features(tz.ffield, tz.mask, 100, seed=EVAL_SEED)
        b = sample_environment_features(tz.ffield, tz.mask, 100, seed=EVAL_SEED)
        np.testing.assert_array_equal(a, b)
        c = sample_environment_features(tz.ffield, tz.mask, 100, seed=EVAL_SEED + 1)
        assert not np.array_equal(a, c)

    def test_samples_are_field_rows(self, threezone):
        tz = threezone
        samples = sample_environment_features(tz.ffield, tz.mask, 50, seed=1)
        for s in samples:
            assert np.any(np.all(np.isclose(tz.ffield.features, s), axis=1))
