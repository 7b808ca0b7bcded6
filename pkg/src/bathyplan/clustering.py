"""Gaussian mixture clustering of the feature field and its spatial
decomposition into connected components ("cluster polygons").

EM is run from k-means++ style seeds with restarts; the winning model is
picked by final log-likelihood with ties going to the lowest restart
index, so fits are reproducible bit for bit.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import logsumexp

from .features import FeatureField


@dataclass
class GmmModel:
    weights: np.ndarray  # (K,)
    means: np.ndarray  # (K, d)
    covariances: np.ndarray  # (K, d, d)
    log_likelihood_trace: list[float]
    converged: bool
    reg_covar: float

    @property
    def K(self) -> int:
        return len(self.weights)

    @property
    def d(self) -> int:
        return self.means.shape[1]

    def log_responsibilities(self, X: np.ndarray) -> tuple[np.ndarray, float]:
        """Per-point log posterior over components and the total log-likelihood."""
        lp = _weighted_log_prob(X, self.weights, self.means, self.covariances)
        norm = logsumexp(lp, axis=1)
        return lp - norm[:, None], float(np.sum(norm))

    def predict(self, X: np.ndarray) -> np.ndarray:
        lp = _weighted_log_prob(X, self.weights, self.means, self.covariances)
        return np.argmax(lp, axis=1)

    def bic(self, X: np.ndarray) -> float:
        _, ll = self.log_responsibilities(X)
        d = self.d
        n_params = (self.K - 1) + self.K * d + self.K * d * (d + 1) // 2
        return -2.0 * ll + n_params * np.log(len(X))


def _weighted_log_prob(X, weights, means, covariances) -> np.ndarray:
    """log(w_k) + log N(x | mu_k, Sigma_k) for every point and component."""
    n, d = X.shape
    K = len(weights)
    out = np.empty((n, K))
    for k in range(K):
        L = np.linalg.cholesky(covariances[k])
        diff = X - means[k]
        sol = solve_triangular(L, diff.T, lower=True)
        out[:, k] = (np.log(weights[k])
                     - np.sum(np.log(np.diag(L)))
                     - 0.5 * d * np.log(2.0 * np.pi)
                     - 0.5 * np.sum(sol**2, axis=0))
    return out


def _as_array(features) -> np.ndarray:
    if isinstance(features, FeatureField):
        return features.features
    return np.atleast_2d(np.asarray(features, dtype=float))


def _kmeanspp_seeds(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread the initial means by D^2 sampling."""
    n = len(X)
    centers = [X[rng.integers(n)]]
    for _ in range(K - 1):
        d2 = np.min([np.sum((X - c) ** 2, axis=1) for c in centers], axis=0)
        total = d2.sum()
        if total <= 0:
            centers.append(X[rng.integers(n)])
            continue
        centers.append(X[rng.choice(n, p=d2 / total)])
    return np.stack(centers)


def _floor_spd(S: np.ndarray, floor: float) -> np.ndarray:
    """Eigenvalue-floored covariance: the exact M-step maximizer over
    {Sigma >= floor*I}, which keeps the EM ascent guarantee intact
    (adding a ridge after the M step would not)."""
    evals, evecs = np.linalg.eigh(0.5 * (S + S.T))
    return (evecs * np.maximum(evals, floor)) @ evecs.T


def _em_once(X: np.ndarray, K: int, rng: np.random.Generator, max_iter: int,
             tol: float, floor: float):
    n, d = X.shape
    global_cov = _floor_spd(np.cov(X, rowvar=False, ddof=0).reshape(d, d), floor)
    means = _kmeanspp_seeds(X, K, rng)
    covariances = np.tile(global_cov, (K, 1, 1))
    weights = np.full(K, 1.0 / K)

    trace: list[float] = []
    converged = False
    for _ in range(max_iter):
        lp = _weighted_log_prob(X, weights, means, covariances)
        norm = logsumexp(lp, axis=1)
        ll = float(np.sum(norm))
        trace.append(ll)
        if len(trace) > 1:
            prev = trace[-2]
            if abs(ll - prev) < tol * abs(prev):
                converged = True
                break
        resp = np.exp(lp - norm[:, None])
        nk = resp.sum(axis=0)
        empty = nk < 1e-10
        if np.any(empty):
            # documented fallback: reseed a collapsed component on the point
            # the current mixture explains worst
            worst = int(np.argmin(norm))
            for k in np.nonzero(empty)[0]:
                means[k] = X[worst]
                covariances[k] = global_cov
                weights[k] = 1.0 / n
            weights = weights / weights.sum()
            continue
        weights = nk / n
        means = (resp.T @ X) / nk[:, None]
        for k in range(K):
            diff = X - means[k]
            cov = (resp[:, k, None] * diff).T @ diff / nk[k]
            covariances[k] = _floor_spd(cov, floor)
    return weights, means, covariances, trace, converged


def fit_gmm(features, K: int, seed: int = 0, max_iter: int = 200,
            tol: float = 1e-6, n_init: int = 5, reg_covar: float = 1e-6) -> GmmModel:
    """Fit a full-covariance GMM by EM; best of n_init restarts.

    Accepts a FeatureField or a raw (n, d) array. Component covariance
    eigenvalues are floored at reg_covar * mean feature variance, which
    both blocks likelihood collapse and preserves the per-iteration
    ascent guarantee. Deterministic for (data, seed): restart r uses its
    own generator seeded by (seed, r) and ties on final log-likelihood go
    to the lowest restart.
    """
    X = _as_array(features)
    n, d = X.shape
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    if n <= K * (d + 1):
        raise ValueError(f"{n} points is too few for K={K} components in {d} dims")
    mean_var = float(np.mean(np.var(X, axis=0)))
    floor = reg_covar * (mean_var if mean_var > 0 else 1.0)
    best = None
    for r in range(n_init):
        rng = np.random.default_rng(np.random.SeedSequence([seed, r]))
        weights, means, covs, trace, converged = _em_once(
            X, K, rng, max_iter, tol, floor)
        key = (-trace[-1], r)
        if best is None or key < best[0]:
            best = (key, GmmModel(weights, means, covs, trace, converged, floor))
    return best[1]


def select_k_bic(features, k_range=range(2, 13), seed: int = 0, **fit_kwargs):
    """Sweep K and keep the fit with the lowest BIC. Returns (model, K, {K: bic})."""
    X = _as_array(features)
    scores = {}
    best = None
    for K in k_range:
        try:
            model = fit_gmm(X, K, seed=seed, **fit_kwargs)
        except ValueError:
            continue  # too few points for this K
        scores[K] = model.bic(X)
        if best is None or scores[K] < scores[best[1]]:
            best = (model, K)
    if best is None:
        raise ValueError("no K in the sweep range was fittable")
    return best[0], best[1], scores


@dataclass
class ClusterMap:
    """Per-site cluster labels aligned with a FeatureField."""

    labels: np.ndarray  # (n_sites,)
    field: FeatureField
    K: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.labels.flags.writeable = False

    def labels_at(self, points: np.ndarray) -> np.ndarray:
        """Cluster labels at the sites nearest to (n, 2) world points."""
        return self.labels[self.field.nearest_site(points)]


def assign_clusters(gmm: GmmModel, features: FeatureField) -> ClusterMap:
    """Label each site by argmax posterior responsibility (ties: lowest index)."""
    if features.d != gmm.d:
        raise ValueError(f"field dim {features.d} != model dim {gmm.d}")
    labels = gmm.predict(features.features)
    return ClusterMap(labels=labels, field=features, K=gmm.K)


@dataclass
class ClusterComponent:
    """One 4-connected spatial patch of a single cluster label."""

    component_id: int
    cluster_id: int
    site_indices: np.ndarray
    ignored: bool = False

    @property
    def area(self) -> int:
        return len(self.site_indices)


@dataclass
class ClusterPolygons:
    """Spatial decomposition of a ClusterMap into connected components."""

    components: list[ClusterComponent]
    cluster_map: ClusterMap
    min_area: int
    omitted_clusters: list[int] = field(default_factory=list)

    def active(self) -> list[ClusterComponent]:
        return [c for c in self.components if not c.ignored]


def polygonize(cmap: ClusterMap, min_area: int = 4) -> ClusterPolygons:
    """Split each label into 4-connected components over the site lattice.

    Components smaller than min_area are flagged ignored and excluded from
    routing; a cluster whose every component is ignored is recorded in
    omitted_clusters and a warning is raised.
    """
    ff = cmap.field
    sites = ff.sites
    lat = sites // ff.stride  # holes keep relative adjacency: stride is uniform
    lr = lat[:, 0] - lat[:, 0].min()
    lc = lat[:, 1] - lat[:, 1].min()
    shape = (lr.max() + 1, lc.max() + 1)
    index_grid = np.full(shape, -1, dtype=int)
    index_grid[lr, lc] = np.arange(ff.n_sites)

    seen = np.zeros(ff.n_sites, dtype=bool)
    components: list[ClusterComponent] = []
    for start in range(ff.n_sites):
        if seen[start]:
            continue
        label = cmap.labels[start]
        stack = [start]
        seen[start] = True
        members = []
        while stack:
            i = stack.pop()
            members.append(i)
            r, c = lr[i], lc[i]
            for rr, cc in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if 0 <= rr < shape[0] and 0 <= cc < shape[1]:
                    j = index_grid[rr, cc]
                    if j >= 0 and not seen[j] and cmap.labels[j] == label:
                        seen[j] = True
                        stack.append(j)
        members = np.sort(np.asarray(members))
        components.append(ClusterComponent(
            component_id=len(components), cluster_id=int(label),
            site_indices=members, ignored=len(members) < min_area))

    present = set(int(v) for v in np.unique(cmap.labels))
    active_labels = {c.cluster_id for c in components if not c.ignored}
    omitted = sorted(present - active_labels)
    if omitted:
        warnings.warn(f"clusters {omitted} have only sub-min_area components; "
                      "omitted from routing", stacklevel=2)
    return ClusterPolygons(components=components, cluster_map=cmap,
                           min_area=min_area, omitted_clusters=omitted)


@dataclass
class RepNode:
    """A routable representative point drawn from one component."""

    cluster_id: int
    component_id: int
    easting: float
    northing: float
    site_index: int


def representative_points(polys: ClusterPolygons, per_component: int = 1,
                          seed: int = 0) -> list[RepNode]:
    """Randomly sample up to per_component distinct sites from every
    non-ignored component; deterministic for a given seed."""
    if per_component < 1:
        raise ValueError(f"per_component must be >= 1, got {per_component}")
    ff = polys.cluster_map.field
    rng = np.random.default_rng(seed)
    nodes: list[RepNode] = []
    for comp in polys.components:
        if comp.ignored:
            continue
        take = min(per_component, comp.area)
        picks = rng.choice(comp.site_indices, size=take, replace=False)
        for si in np.sort(picks):
            nodes.append(RepNode(cluster_id=comp.cluster_id,
                                 component_id=comp.component_id,
                                 easting=float(ff.eastings[si]),
                                 northing=float(ff.northings[si]),
                                 site_index=int(si)))
    return nodes


def label_lattice(cmap: ClusterMap) -> np.ndarray:
    """Cluster labels on the dense stride lattice; holes are -1."""
    ff = cmap.field
    lat = ff.sites // ff.stride
    lr = lat[:, 0] - lat[:, 0].min()
    lc = lat[:, 1] - lat[:, 1].min()
    raster = np.full((lr.max() + 1, lc.max() + 1), -1, dtype=int)
    raster[lr, lc] = cmap.labels
    return raster


def cluster_raster_ascii(cmap: ClusterMap, grid) -> str:
    """Export the cluster map as a stride-decimated integer .asc raster.

    Header matches the parent grid scaled by the stride; lattice holes get
    NODATA -1.
    """
    from .grid import BathyGrid, serialize_ascii_grid

    ff = cmap.field
    values = label_lattice(cmap).astype(float)
    shape = values.shape

    cs = grid.cellsize * ff.stride
    first_col = int(ff.sites[:, 1].min())
    last_row = int(ff.sites[:, 0].min()) + (shape[0] - 1) * ff.stride
    xll = grid.xllcorner + (first_col + 0.5) * grid.cellsize - 0.5 * cs
    yll = grid.yllcorner + (grid.nrows - last_row - 0.5) * grid.cellsize - 0.5 * cs
    deci = BathyGrid(shape[1], shape[0], xll, yll, cs, -1.0, values)
    return serialize_ascii_grid(deci)
