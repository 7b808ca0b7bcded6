"""Bathymetry patches -> low-dimensional feature vectors, plus the
covariance-normalized distance and coverage reward built on them.

Two encoders are provided behind one interface: handcrafted geometric
descriptors (depth, slope, aspect, rugosity) and an unsupervised linear
encoder that projects onto the principal subspace of flattened patches,
which minimizes mean squared reconstruction error among linear maps.
Externally trained encoders can inject their latent field through
save_feature_field / load_feature_field instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from io import StringIO

import numpy as np
from scipy.spatial import cKDTree

from .grid import BathyGrid, Patch, extract_patch


def geometric_features(patch: Patch, cellsize: float) -> np.ndarray:
    """Four geometric descriptors of a patch: (depth, slope, sin(aspect), rugosity).

    A plane z = a + b*x + c*y is least-squares fit with x east-positive and
    y north-positive meters from the patch center (patch row 0 is the
    northernmost). Then:

      depth    = a, the mean depth (the lattice is centered so a is exact)
      slope    = hypot(b, c), rise per meter along the steepest direction
      aspect   = atan2(b, c), bearing of steepest increase in the stored
                 value, clockwise from grid north; encoded as sin(aspect)
                 so a flat patch contributes 0 by convention
      rugosity = rms of the plane-fit residuals
    """
    n = patch.size
    half = n // 2
    offs = (np.arange(n) - half) * cellsize
    x = np.tile(offs, (n, 1))  # east
    y = np.tile(-offs[:, None], (1, n))  # north; row index grows southward
    z = patch.values

    a = z.mean()
    sxx = np.sum(x * x)
    b = np.sum(x * z) / sxx if sxx > 0 else 0.0
    c = np.sum(y * z) / sxx if sxx > 0 else 0.0  # lattice is square: syy == sxx
    residuals = z - (a + b * x + c * y)
    rugosity = float(np.sqrt(np.mean(residuals**2)))
    slope = float(np.hypot(b, c))
    aspect = np.arctan2(b, c)
    return np.array([a, slope, np.sin(aspect), rugosity])


@dataclass
class Encoder:
    """Patch -> feature map; kind is 'geometric' or 'linear'.

    Linear encoders store the training mean and a projection with
    orthonormal rows (eigenvectors of the sample covariance); eigenvalues
    are kept for reconstruction-error accounting.
    """

    kind: str
    patch_size: int
    cellsize: float = 1.0
    d: int = 4
    mean: np.ndarray | None = None
    projection: np.ndarray | None = None
    eigenvalues: np.ndarray | None = None

    def encode(self, patch: Patch) -> np.ndarray:
        return encode(self, patch)


def make_geometric_encoder(patch_size: int, cellsize: float) -> Encoder:
    return Encoder(kind="geometric", patch_size=patch_size, cellsize=cellsize, d=4)


def fit_linear_encoder(samples: list[Patch], d: int) -> Encoder:
    """Fit the MSE-optimal linear encoder on flattened, centered patches.

    The projection rows are the top-d eigenvectors of the sample
    covariance (ddof=0), so mean squared reconstruction error per sample
    equals the sum of the discarded eigenvalues.
    """
    if not samples:
        raise ValueError("no sample patches")
    size = samples[0].size
    if any(p.size != size for p in samples):
        raise ValueError("sample patches differ in size")
    X = np.stack([p.values.ravel() for p in samples])
    n, p = X.shape
    if n <= d:
        raise ValueError(f"need more than d={d} samples, got {n}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    evals, evecs = np.linalg.eigh(cov)
    evals = evals[::-1].copy()
    evecs = evecs[:, ::-1]
    rank = int(np.sum(evals > max(evals[0], 0.0) * 1e-12))
    if rank < d:
        raise ValueError(f"sample set has rank {rank} < requested latent dim {d}")
    proj = evecs[:, :d].T.copy()
    # deterministic sign: largest-magnitude entry of each row is positive
    for row in proj:
        k = np.argmax(np.abs(row))
        if row[k] < 0:
            row *= -1.0
    return Encoder(kind="linear", patch_size=size, d=d, mean=mean,
                   projection=proj, eigenvalues=evals)


def encode(encoder: Encoder, patch: Patch) -> np.ndarray:
    if patch.size != encoder.patch_size:
        raise ValueError(f"patch size {patch.size} != encoder size {encoder.patch_size}")
    if encoder.kind == "geometric":
        return geometric_features(patch, encoder.cellsize)
    return encoder.projection @ (patch.values.ravel() - encoder.mean)


def reconstruction_mse(encoder: Encoder, samples: list[Patch]) -> float:
    """Mean over samples of the squared reconstruction error (summed over cells)."""
    X = np.stack([p.values.ravel() for p in samples])
    Xc = X - encoder.mean
    recon = (Xc @ encoder.projection.T) @ encoder.projection
    return float(np.mean(np.sum((Xc - recon) ** 2, axis=1)))


@dataclass
class MahalanobisModel:
    """Fitted mean and inverse covariance of a feature population."""

    mean: np.ndarray
    inv_cov: np.ndarray
    ridge: float

    _chol: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def d(self) -> int:
        return len(self.mean)

    @property
    def chol(self) -> np.ndarray:
        """Lower-triangular L with L @ L.T = inv_cov; whitening factor."""
        if self._chol is None:
            self._chol = np.linalg.cholesky(self.inv_cov)
        return self._chol

    def whiten(self, X: np.ndarray) -> np.ndarray:
        """Map features so Euclidean distance equals Mahalanobis distance."""
        return np.atleast_2d(X) @ self.chol


def fit_mahalanobis(features: np.ndarray, ridge: float | None = None) -> MahalanobisModel:
    """Estimate the population covariance and invert it.

    Covariance is the sample covariance (ddof=1) plus ridge*I; the default
    ridge is 1e-6 * trace/d, enough to keep flat-terrain feature sets
    invertible. Needs at least d+1 points.
    """
    X = np.atleast_2d(np.asarray(features, dtype=float))
    n, d = X.shape
    if n < d + 1:
        raise ValueError(f"need at least d+1={d + 1} feature vectors, got {n}")
    mean = X.mean(axis=0)
    cov = np.cov(X, rowvar=False, ddof=1).reshape(d, d)
    if ridge is None:
        ridge = 1e-6 * max(np.trace(cov) / d, 1e-30)
    cov = cov + ridge * np.eye(d)
    inv = np.linalg.inv(cov)
    inv = 0.5 * (inv + inv.T)
    return MahalanobisModel(mean=mean, inv_cov=inv, ridge=float(ridge))


def mahalanobis(model: MahalanobisModel, u: np.ndarray, v: np.ndarray) -> float:
    """Covariance-normalized distance between two feature vectors."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (model.d,) or v.shape != (model.d,):
        raise ValueError(f"feature dims {u.shape}/{v.shape} do not match model d={model.d}")
    diff = u - v
    q = diff @ model.inv_cov @ diff
    return float(np.sqrt(max(q, 0.0)))


def mahalanobis_to_set(model: MahalanobisModel, u: np.ndarray, V: np.ndarray) -> np.ndarray:
    """Distances from one feature to each row of V (vectorized via whitening)."""
    wu = model.whiten(np.asarray(u, dtype=float))[0]
    wV = model.whiten(np.asarray(V, dtype=float))
    return np.linalg.norm(wV - wu, axis=1)


def reward(model: MahalanobisModel, u: np.ndarray, V: np.ndarray) -> float:
    """Minimum feature distance from u to the collected set V; high means novel."""
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if V.shape[0] == 0:
        raise ValueError("comparison set V is empty")
    return float(np.min(mahalanobis_to_set(model, u, V)))


@dataclass
class FeatureField:
    """Features at every accepted patch center on a stride lattice.

    Sites are row-major sorted (row, col) cell indices; rejected patches
    (no-data or boundary windows) leave holes in the lattice.
    """

    sites: np.ndarray  # (n, 2) int (row, col)
    eastings: np.ndarray
    northings: np.ndarray
    features: np.ndarray  # (n, d)
    stride: int
    patch_size: int

    _tree: cKDTree | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        for arr in (self.sites, self.eastings, self.northings, self.features):
            arr.flags.writeable = False

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    @property
    def d(self) -> int:
        return self.features.shape[1]

    @property
    def tree(self) -> cKDTree:
        if self._tree is None:
            self._tree = cKDTree(np.column_stack([self.eastings, self.northings]))
        return self._tree

    def nearest_site(self, points: np.ndarray) -> np.ndarray:
        """Indices of the sites nearest to (n, 2) world points."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        _, idx = self.tree.query(pts)
        return np.atleast_1d(idx)

    def features_at(self, points: np.ndarray) -> np.ndarray:
        """Feature vectors looked up at the nearest site to each world point."""
        return self.features[self.nearest_site(points)]


def build_feature_field(grid: BathyGrid, encoder: Encoder, stride: int) -> FeatureField:
    """Encode patches on a stride lattice across the grid.

    The lattice starts at the first row/col where a full patch window fits
    and steps by `stride`; patches rejected by extract_patch simply drop
    their site.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    half = encoder.patch_size // 2
    rows = range(half, grid.nrows - half, stride)
    cols = range(half, grid.ncols - half, stride)
    sites = []
    feats = []
    for r in rows:
        for c in cols:
            patch = extract_patch(grid, (r, c), encoder.patch_size)
            if patch is None:
                continue
            sites.append((r, c))
            feats.append(encode(encoder, patch))
    if not sites:
        raise ValueError("no valid patch centers on the stride lattice")
    sites = np.asarray(sites, dtype=int)
    e, n = grid.cell_centers(sites[:, 0], sites[:, 1])
    return FeatureField(sites=sites, eastings=e, northings=n,
                        features=np.stack(feats), stride=stride,
                        patch_size=encoder.patch_size)


def save_feature_field(ff: FeatureField, path: str):
    """Write the columnar text format: row col easting northing f0..f{d-1}.

    First line is a header comment carrying stride and patch size so the
    field can round-trip; any externally trained encoder can produce this
    file and the rest of the pipeline runs unchanged.
    """
    with open(path, "w") as fh:
        fh.write(_dump_feature_field(ff))


def _dump_feature_field(ff: FeatureField) -> str:
    cols = " ".join(f"f{i}" for i in range(ff.d))
    lines = [f"# feature-field stride={ff.stride} patch={ff.patch_size} "
             f"columns: row col easting northing {cols}"]
    for i in range(ff.n_sites):
        vals = " ".join(repr(float(v)) for v in ff.features[i])
        lines.append(f"{ff.sites[i, 0]} {ff.sites[i, 1]} "
                     f"{float(ff.eastings[i])!r} {float(ff.northings[i])!r} {vals}")
    return "\n".join(lines) + "\n"


def load_feature_field(path: str) -> FeatureField:
    with open(path) as fh:
        text = fh.read()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    stride, patch_size = 1, 1
    if lines and lines[0].startswith("#"):
        header = lines.pop(0)
        for tok in header.split():
            if tok.startswith("stride="):
                stride = int(tok.split("=")[1])
            elif tok.startswith("patch="):
                patch_size = int(tok.split("=")[1])
    data = np.loadtxt(StringIO("\n".join(lines)), ndmin=2)
    return FeatureField(sites=data[:, :2].astype(int),
                        eastings=data[:, 2].copy(), northings=data[:, 3].copy(),
                        features=data[:, 4:].copy(), stride=stride,
                        patch_size=patch_size)
