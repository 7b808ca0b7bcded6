"""Information-gathering tree planner: primitives and full plans."""

import numpy as np
import pytest
from scipy.stats import chi2

from bathyplan.evaluation import mc, mpd, path_features
from bathyplan.features import (build_feature_field, fit_mahalanobis,
                                make_geometric_encoder)
from bathyplan.grid import ObstacleMask, operability_mask, parse_ascii_grid
from bathyplan.inforrt import (Environment, PlannerConfig, Tree, aim, evaluate,
                               find_start, grow_tree, plan, select, steer)
from bathyplan.paths import Path

from conftest import EVAL_SEED


def flat_env(n=24, cellsize=2.0, depth=-10.0):
    rows = "\n".join(" ".join(str(depth) for _ in range(n)) for _ in range(n))
    grid = parse_ascii_grid(
        f"ncols {n}\nnrows {n}\nxllcorner 0\nyllcorner 0\ncellsize {cellsize}\n{rows}\n")
    mask = operability_mask(grid, -np.inf, np.inf)
    ff = build_feature_field(grid, make_geometric_encoder(3, cellsize), stride=1)
    # flat terrain: identical features; ridge keeps the model invertible
    model = fit_mahalanobis(ff.features + 1e-9 * np.random.default_rng(0)
                            .standard_normal(ff.features.shape))
    return Environment(grid=grid, mask=mask, field=ff, model=model)


def outlier_env(n=30, cellsize=2.0, offset=10.0):
    """Flat grid with a hand-built feature field: a small pocket of sites
    (rows/cols 20..24) whose features sit far from everything else.

    The pocket must be small: whitening by the global covariance caps the
    pocket-to-rest gap near 1/sqrt(p(1-p)) for pocket fraction p, so
    p ~ 0.028 here yields a ~6 unit separation.
    """
    rows = "\n".join(" ".join("-10" for _ in range(n)) for _ in range(n))
    grid = parse_ascii_grid(
        f"ncols {n}\nnrows {n}\nxllcorner 0\nyllcorner 0\ncellsize {cellsize}\n{rows}\n")
    mask = operability_mask(grid, -np.inf, np.inf)
    rng = np.random.default_rng(17)
    sites = np.array([(r, c) for r in range(n) for c in range(n)])
    pocket = (sites[:, 0] >= 20) & (sites[:, 0] < 25) & \
             (sites[:, 1] >= 20) & (sites[:, 1] < 25)
    feats = rng.normal(0.0, 0.3, size=(len(sites), 4))
    feats[pocket] += offset
    e, nn = grid.cell_centers(sites[:, 0], sites[:, 1])
    from bathyplan.features import FeatureField

    ff = FeatureField(sites=sites, eastings=e, northings=nn, features=feats,
                      stride=1, patch_size=1)
    model = fit_mahalanobis(ff.features)
    zone_grid = np.zeros((n, n), dtype=int)
    zone_grid[20:25, 20:25] = 1
    from bathyplan.grid import LabelMap

    labels = LabelMap(zone_grid, n_labels=2)
    return Environment(grid=grid, mask=mask, field=ff, model=model), labels


def in_zone(env, labels, pos, zone):
    cell = env.grid.cell_at(pos[0], pos[1])
    return labels.label_at(*cell) == zone


class TestFindStart:
    def test_outlier_zone_found(self):
        env, labels = outlier_env()
        # construction check: the pocket centroid is > 5 units from the rest
        from bathyplan.features import mahalanobis

        site_zone = labels.labels[env.field.sites[:, 0], env.field.sites[:, 1]]
        c0 = env.field.features[site_zone == 0].mean(axis=0)
        c1 = env.field.features[site_zone == 1].mean(axis=0)
        assert mahalanobis(env.model, c0, c1) > 5.0
        hits = sum(in_zone(env, labels, find_start(env, 200, seed), 1)
                   for seed in range(20))
        assert hits >= 18

    def test_n2_symmetric_tie_to_first(self):
        # two samples are equidistant from each other, so the tie rule
        # returns the first one drawn
        env, _ = outlier_env()
        pos = find_start(env, 2, 0)
        expected = env.sample_free_positions(2, np.random.default_rng(0))[0]
        np.testing.assert_array_equal(pos, expected)

    def test_identical_features_tie_to_first(self):
        env = flat_env()
        rng = np.random.default_rng(5)
        pts = env.sample_free_positions(50, np.random.default_rng(5))
        start = find_start(env, 50, 5)
        np.testing.assert_array_equal(start, pts[0])

    def test_random_mode(self):
        env = flat_env()
        pos = find_start(env, 100, 7, mode="random")
        assert not env.mask.blocked_at(pos[0], pos[1])

    def test_needs_two_samples(self):
        with pytest.raises(ValueError, match="n >= 2"):
            find_start(flat_env(), 1, 0)


class TestAim:
    def test_uniform_when_bias_zero(self):
        # chi-square over 10 equal-count cell bins, 10^4 draws
        env = flat_env(n=20)
        tree = Tree(env.grid.cell_center(10, 10), env, spacing=4.0)
        rng = np.random.default_rng(0)
        cells = env.free_cells()
        index_of = {(r, c): i for i, (r, c) in enumerate(map(tuple, cells))}
        counts = np.zeros(10)
        for _ in range(10_000):
            p = aim(tree, env, goal_bias=0.0, aim_samples=10, rng=rng)
            cell = env.grid.cell_at(p[0], p[1])
            counts[index_of[cell] * 10 // len(cells)] += 1
        expected = 10_000 / 10
        stat = float(np.sum((counts - expected) ** 2 / expected))
        assert chi2.sf(stat, df=9) > 0.001

    def test_full_bias_targets_distinct_zone(self):
        env, labels = outlier_env()
        hits = 0
        for seed in range(20):
            rng = np.random.default_rng(seed)
            root = env.grid.cell_center(3, 3)  # flat zone corner
            tree = Tree(root, env, spacing=4.0)
            target = aim(tree, env, goal_bias=1.0, aim_samples=200, rng=rng)
            hits += in_zone(env, labels, target, 1)
        assert hits >= 18

    def test_single_cell_environment(self):
        env = flat_env(n=24)
        blocked = np.ones((24, 24), dtype=bool)
        blocked[12, 12] = False
        env.mask = ObstacleMask(24, 24, 0.0, 0.0, 2.0, blocked)
        env._free_cells = None
        tree = Tree(env.grid.cell_center(12, 12), env, spacing=4.0)
        for bias in (0.0, 1.0):
            target = aim(tree, env, goal_bias=bias, aim_samples=5,
                         rng=np.random.default_rng(1))
            np.testing.assert_array_equal(target, env.grid.cell_center(12, 12))


class TestSelect:
    def test_single_node_with_budget(self):
        env = flat_env()
        tree = Tree(env.grid.cell_center(5, 5), env, spacing=4.0)
        node = select(tree, np.array([40.0, 40.0]), k_nearest=3, env=env,
                      step=10.0, budget=100.0)
        assert node.id == 0

    def test_over_budget_node_skipped(self):
        env = flat_env()
        tree = Tree(env.grid.cell_center(5, 5), env, spacing=4.0)
        near = tree.grow(tree.nodes[0], tree.nodes[0].position + [30.0, 0.0])
        # near is spatially closest to the target but has no budget left
        target = near.position + [5.0, 0.0]
        node = select(tree, target, k_nearest=2, env=env, step=10.0, budget=35.0)
        assert node.id == 0

    def test_all_over_budget_returns_none(self):
        env = flat_env()
        tree = Tree(env.grid.cell_center(5, 5), env, spacing=4.0)
        assert select(tree, np.array([40.0, 40.0]), k_nearest=3, env=env,
                      step=10.0, budget=5.0) is None

    def test_matches_bruteforce_over_k_nearest(self):
        env, _ = outlier_env()
        rng = np.random.default_rng(4)
        cfg = PlannerConfig(budget=300.0, step=8.0, sample_spacing=4.0,
                            iterations=30, k_nearest=3).resolve(env.grid)
        tree = grow_tree(env, env.grid.cell_center(5, 5), cfg, rng)
        target = env.grid.cell_center(20, 20)
        chosen = select(tree, np.asarray(target), 3, env, cfg.step, cfg.budget)

        # independent evaluation: k nearest by distance, then max min-distance
        positions = tree.positions_array()
        d = np.linalg.norm(positions - target, axis=1)
        nearest3 = np.argsort(d, kind="stable")[:3]
        best_score, best_id = -1.0, None
        for idx in sorted(int(i) for i in nearest3):
            node = tree.nodes[idx]
            if node.cost + cfg.step > cfg.budget:
                continue
            gap = float(np.linalg.norm(target - node.position))
            endpoint = node.position + min(cfg.step, gap) * (target - node.position) / gap
            u = env.feature_at(endpoint)
            V = np.vstack([node.path_w, tree.features_w_array()])
            score = float(np.min(np.linalg.norm(V - env.model.whiten(u)[0], axis=1)))
            if score > best_score:
                best_score, best_id = score, idx
        assert chosen.id == best_id


class TestSteer:
    def test_target_within_step(self):
        env = flat_env()
        out = steer(np.array([10.0, 10.0]), np.array([12.0, 11.0]), 10.0, env.mask)
        np.testing.assert_array_equal(out, [12.0, 11.0])

    def test_step_limited(self):
        env = flat_env()
        out = steer(np.array([10.0, 10.0]), np.array([10.0, 40.0]), 10.0, env.mask)
        np.testing.assert_allclose(out, [10.0, 20.0], atol=1e-9)

    def test_wall_blocks(self):
        grid = parse_ascii_grid(
            "ncols 9\nnrows 3\nxllcorner 0\nyllcorner 0\ncellsize 1\n"
            + "\n".join(" ".join("-10" if c != 4 else "-1" for c in range(9))
                        for _ in range(3)) + "\n")
        mask = operability_mask(grid, -20.0, -5.0)  # the -1 column is too shallow
        out = steer(np.array([1.5, 1.5]), np.array([8.0, 1.5]), 20.0, mask)
        assert out is None

    def test_out_of_grid_blocked(self):
        env = flat_env(n=5)
        assert steer(np.array([5.0, 5.0]), np.array([50.0, 5.0]), 30.0, env.mask) is None


class TestPlan:
    def test_budget_below_step_gives_point_paths(self):
        env = flat_env()
        cfg = PlannerConfig(budget=3.0, step=10.0, iterations=10, n_starts=2,
                            start_samples=10, aim_samples=10, seed=0)
        paths = plan(env, cfg)
        assert len(paths) == 2
        for p in paths:
            assert p.n_points == 1
            assert p.length == 0.0

    def test_budget_invariant_open_terrain(self):
        env = flat_env()
        cfg = PlannerConfig(budget=60.0, iterations=60, n_starts=2, seed=1,
                            start_samples=20, aim_samples=20)
        for p in plan(env, cfg):
            assert p.length <= 60.0 + 1e-6

    def test_deterministic_replay(self):
        env, _ = outlier_env()
        cfg = PlannerConfig(budget=150.0, iterations=40, n_starts=2, seed=9,
                            start_samples=30, aim_samples=30)
        a = plan(env, cfg)
        b = plan(env, cfg)
        assert len(a) == len(b)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.waypoints, pb.waypoints)

    def test_tree_respects_obstacles_and_monotone_cost(self):
        env, _ = outlier_env()
        cfg = PlannerConfig(budget=200.0, iterations=80, seed=2,
                            start_samples=30, aim_samples=30).resolve(env.grid)
        tree = grow_tree(env, env.grid.cell_center(4, 4), cfg,
                         np.random.default_rng(2))
        for node in tree.nodes[1:]:
            parent = tree.nodes[node.parent]
            assert node.cost > parent.cost
            assert node.cost <= cfg.budget + 1e-9
            # re-check the edge against the mask at sampling resolution
            seg = node.position - parent.position
            for t in np.linspace(0, 1, 8):
                p = parent.position + t * seg
                assert not env.mask.blocked_at(p[0], p[1])

    def test_wall_clock_mode(self):
        env = flat_env()
        cfg = PlannerConfig(budget=200.0, iterations=5, time_budget=0.05,
                            start_samples=10, aim_samples=10, seed=4)
        tree = grow_tree(env, env.grid.cell_center(12, 12), cfg.resolve(env.grid),
                         np.random.default_rng(4))
        assert len(tree) > 5  # the clock, not the iteration cap, governed

    def test_node_count_grows_with_iterations(self):
        env = flat_env()
        cfg50 = PlannerConfig(budget=1e6, iterations=50, seed=3,
                              start_samples=10, aim_samples=10, goal_bias=0.0)
        cfg100 = PlannerConfig(budget=1e6, iterations=100, seed=3,
                               start_samples=10, aim_samples=10, goal_bias=0.0)
        t50 = grow_tree(env, env.grid.cell_center(12, 12), cfg50.resolve(env.grid),
                        np.random.default_rng(3))
        t100 = grow_tree(env, env.grid.cell_center(12, 12), cfg100.resolve(env.grid),
                         np.random.default_rng(3))
        assert len(t100) > len(t50) >= 40  # near-linear growth on open terrain

    def test_three_zone_coverage(self, threezone):
        # generous budget: the chosen path sees every cluster type in most seeds
        tz = threezone
        env = tz.env
        hits = 0
        for seed in range(20):
            cfg = PlannerConfig(budget=1500.0, iterations=150, n_starts=4, seed=seed,
                                eval_metric="msd", eval_seed=EVAL_SEED)
            best = evaluate(plan(env, cfg), env, cfg)
            hits += (mc(best, tz.cmap, tz.spacing) == 1.0)
        assert hits >= 18


class TestEvaluate:
    def test_single_candidate_unchanged(self, threezone):
        tz = threezone
        env = tz.env
        cfg = PlannerConfig(budget=500.0, seed=0)
        p = Path(np.array([[100.0, 100.0], [150.0, 150.0]]))
        assert evaluate([p], env, cfg) is p

    def test_crossing_path_beats_confined_path(self, threezone):
        tz = threezone
        env = tz.env
        cfg = PlannerConfig(budget=500.0, seed=0)  # default metric: mean pairwise
        # confined: inside the northern rubble band. crossing: sand into reef.
        confined = Path(np.array([[30.0, 460.0], [150.0, 460.0]]))
        crossing = Path(np.array([[250.0, 100.0], [370.0, 160.0]]))
        best = evaluate([confined, crossing], env, cfg)
        assert best is crossing
        # ordering confirmed by direct metric computation
        f_conf = path_features(confined, tz.ffield, cfg.resolve(env.grid).sample_spacing)
        f_cross = path_features(crossing, tz.ffield, cfg.resolve(env.grid).sample_spacing)
        assert mpd(f_cross, tz.model) > mpd(f_conf, tz.model)

    def test_tie_breaks_to_first(self, threezone):
        env = threezone.env
        cfg = PlannerConfig(budget=500.0, seed=0)
        p1 = Path(np.array([[100.0, 100.0], [160.0, 100.0]]))
        p2 = Path(p1.waypoints.copy())
        assert evaluate([p1, p2], env, cfg) is p1

    def test_empty_candidates(self, threezone):
        with pytest.raises(ValueError, match="no candidate"):
            evaluate([], threezone.env, PlannerConfig(budget=1.0))
