"""Path-quality metrics and the random-transect benchmark.

Three metrics score how well a path samples the feature space:

  mpd - mean pairwise feature distance over points collected along the
        path (double sum divided by N^2, zero diagonal included); bigger
        means more spread.
  msd - mean over environment samples of the minimum feature distance to
        any collected point; smaller means the path approximates the
        environment better.
  mc  - fraction of cluster types visited.

The benchmark is the mean of each metric over budget-length straight
transects dropped uniformly on the environment.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .clustering import ClusterMap
from .errors import PlannerError
from .features import FeatureField, MahalanobisModel
from .grid import LabelMap, ObstacleMask
from .paths import Path, densify


def path_features(path: Path, ffield: FeatureField, spacing: float) -> np.ndarray:
    """Features collected along a path: densify, then look up the nearest
    field site at every densified waypoint."""
    dense = densify(path, spacing)
    return ffield.features_at(dense.waypoints)


def mpd(features: np.ndarray, model: MahalanobisModel) -> float:
    """Mean pairwise feature distance, N^2 divisor with the zero diagonal
    kept (matching the printed definition rather than the unbiased mean)."""
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if len(X) == 0:
        raise ValueError("empty feature list")
    W = model.whiten(X)
    dists = np.linalg.norm(W[:, None, :] - W[None, :, :], axis=-1)
    return float(dists.sum() / (len(X) ** 2))


def msd(collected: np.ndarray, env_samples: np.ndarray, model: MahalanobisModel) -> float:
    """Mean over environment samples of the min distance to a collected feature."""
    X = np.atleast_2d(np.asarray(collected, dtype=float))
    Y = np.atleast_2d(np.asarray(env_samples, dtype=float))
    if len(X) == 0 or len(Y) == 0:
        raise ValueError("msd needs nonempty feature sets")
    WX = model.whiten(X)
    WY = model.whiten(Y)
    dmin = np.min(np.linalg.norm(WY[:, None, :] - WX[None, :, :], axis=-1), axis=1)
    return float(np.mean(dmin))


def mc(path: Path, cmap: ClusterMap, spacing: float,
       excluded: tuple[int, ...] = ()) -> float:
    """Clusters visited / total clusters, judged at the nearest site to
    each densified waypoint. `excluded` drops clusters (e.g. ones whose
    every component fell under min_area) from both sides of the ratio."""
    dense = densify(path, spacing)
    visited = set(int(v) for v in cmap.labels_at(dense.waypoints))
    total = set(int(v) for v in np.unique(cmap.labels))
    visited -= set(excluded)
    total -= set(excluded)
    if not total:
        return 0.0
    return len(visited & total) / len(total)


def habitat_visits(path: Path, labels: LabelMap, grid, spacing: float) -> dict[int, int]:
    """Count densified waypoints per ground-truth habitat label.

    Every waypoint is counted; one that falls off the grid or on an
    unlabeled cell lands in bucket -1, so the counts always sum to the
    number of densified waypoints.
    """
    dense = densify(path, spacing)
    counts: dict[int, int] = {}
    for x, y in dense.waypoints:
        cell = grid.cell_at(x, y)
        label = labels.label_at(*cell) if cell is not None else -1
        counts[label] = counts.get(label, 0) + 1
    return counts


def sample_environment_features(ffield: FeatureField, mask: ObstacleMask,
                                k: int, seed: int) -> np.ndarray:
    """k feature vectors drawn uniformly (with replacement) from field
    sites on unblocked cells; the shared seed keeps every report in a run
    scored against the same sample set."""
    rows, cols = ffield.sites[:, 0], ffield.sites[:, 1]
    open_sites = np.nonzero(~mask.blocked[rows, cols])[0]
    if len(open_sites) == 0:
        raise PlannerError("no unblocked feature sites to sample")
    rng = np.random.default_rng(seed)
    picks = open_sites[rng.integers(len(open_sites), size=k)]
    return ffield.features[picks]


@dataclass
class PlanReport:
    """Metric bundle for one planned path."""

    mpd: float
    msd: float
    mc: float
    d_m: float
    habitat_visits: dict[int, int] | None = None
    planner: str = ""
    seed: int = 0
    config_digest: str = ""
    dropped_clusters: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        visits = None
        if self.habitat_visits is not None:
            visits = {str(k): v for k, v in sorted(self.habitat_visits.items())}
        return {
            "mpd": self.mpd,
            "msd": self.msd,
            "mc": self.mc,
            "d_m": self.d_m,
            "habitat_visits": visits,
            "planner": self.planner,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "dropped_clusters": self.dropped_clusters,
            "benchmark": None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def report_for_path(path: Path, ffield: FeatureField, model: MahalanobisModel,
                    cmap: ClusterMap, mask: ObstacleMask, spacing: float,
                    env_sample_count: int = 1000, eval_seed: int = 12345,
                    labels: LabelMap | None = None, grid=None,
                    excluded: tuple[int, ...] = (), **meta) -> PlanReport:
    """Score one path with all metrics against a shared environment sample."""
    feats = path_features(path, ffield, spacing)
    env_samples = sample_environment_features(ffield, mask, env_sample_count, eval_seed)
    visits = None
    if labels is not None and grid is not None:
        visits = habitat_visits(path, labels, grid, spacing)
    return PlanReport(
        mpd=mpd(feats, model),
        msd=msd(feats, env_samples, model),
        mc=mc(path, cmap, spacing, excluded),
        d_m=path.length,
        habitat_visits=visits,
        **meta,
    )


@dataclass
class BenchmarkResult:
    """Per-transect metric records and their means (the L_B baseline)."""

    records: list[dict]
    n_transects: int
    seed: int
    config_digest: str = ""

    @property
    def means(self) -> dict[str, float]:
        return {key: float(np.mean([r[key] for r in self.records]))
                for key in ("mpd", "msd", "mc", "d_m")}

    def to_dict(self) -> dict:
        return {
            "n_transects": self.n_transects,
            "seed": self.seed,
            "means": self.means,
            "transects": self.records,
            "config_digest": self.config_digest,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def _random_transect(grid, mask: ObstacleMask, budget: float,
                     rng: np.random.Generator) -> Path:
    """A straight budget-length segment from a uniform unblocked start,
    uniform heading, clipped at the raster edge."""
    cells = mask.unblocked_cells()
    if len(cells) == 0:
        raise PlannerError("cannot place a transect: all cells blocked")
    r, c = cells[rng.integers(len(cells))]
    x0, y0 = grid.cell_center(int(r), int(c))
    theta = rng.uniform(0.0, 2.0 * np.pi)
    dx, dy = np.cos(theta), np.sin(theta)
    xmin, ymin, xmax, ymax = grid.extent
    tmax = budget
    if dx > 0:
        tmax = min(tmax, (xmax - x0) / dx)
    elif dx < 0:
        tmax = min(tmax, (xmin - x0) / dx)
    if dy > 0:
        tmax = min(tmax, (ymax - y0) / dy)
    elif dy < 0:
        tmax = min(tmax, (ymin - y0) / dy)
    tmax = max(tmax, 0.0)
    return Path(np.asarray([[x0, y0], [x0 + tmax * dx, y0 + tmax * dy]]))


def benchmark_transects(grid, mask: ObstacleMask, ffield: FeatureField,
                        model: MahalanobisModel, cmap: ClusterMap, budget: float,
                        n: int = 100, seed: int = 0, spacing: float | None = None,
                        env_sample_count: int = 1000, eval_seed: int = 12345,
                        excluded: tuple[int, ...] = (), jobs: int = 1) -> BenchmarkResult:
    """Drop n random transects and average the metrics over them.

    Transect i draws from its own generator seeded by (seed, i), so the
    result is independent of evaluation order and safe to parallelize.
    """
    if budget <= 0:
        raise ValueError(f"budget {budget} must be > 0")
    if spacing is None:
        spacing = 2.0 * grid.cellsize
    env_samples = sample_environment_features(ffield, mask, env_sample_count, eval_seed)

    def one(i: int) -> dict:
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        transect = _random_transect(grid, mask, budget, rng)
        feats = path_features(transect, ffield, spacing)
        return {
            "index": i,
            "mpd": mpd(feats, model),
            "msd": msd(feats, env_samples, model),
            "mc": mc(transect, cmap, spacing, excluded),
            "d_m": transect.length,
        }

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            records = list(pool.map(one, range(n)))
    else:
        records = [one(i) for i in range(n)]
    return BenchmarkResult(records=records, n_transects=n, seed=seed)
