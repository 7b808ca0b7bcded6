"""Synthetic bathymetry with ground-truth habitat labels.

Stands in for real survey rasters: each habitat zone gets its own
value-noise texture (controllable base depth, amplitude, and feature
scale), laid out as bands, ordered rectangles, or a seeded Voronoi
partition. Generation is a pure function of (spec, seed).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .grid import BathyGrid, LabelMap

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass
class ZoneSpec:
    """One habitat zone: a depth texture plus an optional spatial region.

    amplitude scales the noise in meters; scale is the noise feature size
    in cells (small scale + big amplitude = high rugosity). The region
    fields are interpreted by the layout kind.
    """

    name: str
    base_depth: float
    amplitude: float
    scale: float = 8.0
    octaves: int = 2
    rect: tuple[float, float, float, float] | None = None  # (r0, r1, c0, c1) fractions
    n_sites: int = 1  # voronoi layout only


@dataclass
class TerrainSpec:
    nrows: int
    ncols: int
    cellsize: float
    zones: list[ZoneSpec]
    layout: str = "bands"  # bands | rects | voronoi
    axis: str = "rows"  # bands layout: split along rows or cols
    fractions: list[float] = field(default_factory=list)  # bands layout
    blend: float = 0.0  # gaussian feathering of zone textures, in cells
    xllcorner: float = 0.0
    yllcorner: float = 0.0
    seed: int = 0  # default used when no explicit seed is passed

    def validate(self):
        if self.nrows < 1 or self.ncols < 1:
            raise ConfigError(f"terrain shape {self.nrows}x{self.ncols} must be >= 1x1")
        if self.cellsize <= 0:
            raise ConfigError(f"cellsize {self.cellsize} must be > 0")
        if len(self.zones) < 2:
            raise ConfigError(f"need at least 2 zones, got {len(self.zones)}")
        if self.layout == "bands":
            if len(self.fractions) != len(self.zones):
                raise ConfigError("bands layout needs one fraction per zone")
            if any(f <= 0 for f in self.fractions):
                raise ConfigError("zone fractions must be positive (zero-area zone)")
            if abs(sum(self.fractions) - 1.0) > 1e-9:
                raise ConfigError(f"zone fractions sum to {sum(self.fractions)}, expected 1")
            if self.axis not in ("rows", "cols"):
                raise ConfigError(f"bands axis must be rows|cols, got {self.axis!r}")
        elif self.layout == "rects":
            first = self.zones[0]
            if first.rect is not None and first.rect != (0.0, 1.0, 0.0, 1.0):
                raise ConfigError("rects layout: zone 0 is the base and must cover the grid")
            for z in self.zones[1:]:
                if z.rect is None:
                    raise ConfigError(f"zone {z.name!r} needs a rect")
                r0, r1, c0, c1 = z.rect
                if not (0 <= r0 < r1 <= 1 and 0 <= c0 < c1 <= 1):
                    raise ConfigError(f"zone {z.name!r} rect {z.rect} is empty or out of range")
        elif self.layout == "voronoi":
            if any(z.n_sites < 1 for z in self.zones):
                raise ConfigError("voronoi layout: every zone needs n_sites >= 1")
        else:
            raise ConfigError(f"unknown layout {self.layout!r}")


def load_terrain_spec(path: str) -> TerrainSpec:
    """Read a TerrainSpec from a TOML file (format documented in the README)."""
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    try:
        zones = [
            ZoneSpec(
                name=z["name"],
                base_depth=float(z["base_depth"]),
                amplitude=float(z["amplitude"]),
                scale=float(z.get("scale", 8.0)),
                octaves=int(z.get("octaves", 2)),
                rect=tuple(z["rect"]) if "rect" in z else None,
                n_sites=int(z.get("n_sites", 1)),
            )
            for z in doc["zones"]
        ]
        spec = TerrainSpec(
            nrows=int(doc["nrows"]),
            ncols=int(doc["ncols"]),
            cellsize=float(doc["cellsize"]),
            zones=zones,
            layout=doc.get("layout", "bands"),
            axis=doc.get("axis", "rows"),
            fractions=[float(f) for f in doc.get("fractions", [])],
            blend=float(doc.get("blend", 0.0)),
            xllcorner=float(doc.get("xllcorner", 0.0)),
            yllcorner=float(doc.get("yllcorner", 0.0)),
            seed=int(doc.get("seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"terrain spec missing key {exc}") from None
    spec.validate()
    return spec


def _noise_layer(rng: np.random.Generator, nrows: int, ncols: int, spacing: float) -> np.ndarray:
    """One octave of value noise: random lattice, smoothstep-bilinear interpolation."""
    lat_r = int(np.ceil(nrows / spacing)) + 2
    lat_c = int(np.ceil(ncols / spacing)) + 2
    lattice = rng.uniform(-1.0, 1.0, size=(lat_r, lat_c))
    r = np.arange(nrows) / spacing
    c = np.arange(ncols) / spacing
    r0 = np.floor(r).astype(int)
    c0 = np.floor(c).astype(int)
    fr = r - r0
    fc = c - c0
    sr = fr * fr * (3.0 - 2.0 * fr)
    sc = fc * fc * (3.0 - 2.0 * fc)
    n00 = lattice[np.ix_(r0, c0)]
    n10 = lattice[np.ix_(r0 + 1, c0)]
    n01 = lattice[np.ix_(r0, c0 + 1)]
    n11 = lattice[np.ix_(r0 + 1, c0 + 1)]
    left = n00 + (n10 - n00) * sr[:, None]
    right = n01 + (n11 - n01) * sr[:, None]
    return left + (right - left) * sc[None, :]


def value_noise(rng: np.random.Generator, nrows: int, ncols: int, scale: float,
                octaves: int = 2, persistence: float = 0.5) -> np.ndarray:
    """Octave-summed value noise, roughly in [-1, 1]."""
    out = np.zeros((nrows, ncols))
    amp = 1.0
    total = 0.0
    spacing = max(1.0, float(scale))
    for _ in range(max(1, octaves)):
        out += amp * _noise_layer(rng, nrows, ncols, spacing)
        total += amp
        amp *= persistence
        spacing = max(1.0, spacing / 2.0)
    return out / total


def _zone_labels(spec: TerrainSpec, rng: np.random.Generator) -> np.ndarray:
    nrows, ncols = spec.nrows, spec.ncols
    labels = np.zeros((nrows, ncols), dtype=int)
    if spec.layout == "bands":
        n = nrows if spec.axis == "rows" else ncols
        cuts = np.round(np.cumsum(spec.fractions) * n).astype(int)
        cuts[-1] = n
        start = 0
        for k, stop in enumerate(cuts):
            if spec.axis == "rows":
                labels[start:stop, :] = k
            else:
                labels[:, start:stop] = k
            start = stop
    elif spec.layout == "rects":
        for k, z in enumerate(spec.zones):
            rect = z.rect if z.rect is not None else (0.0, 1.0, 0.0, 1.0)
            r0, r1, c0, c1 = rect
            labels[int(round(r0 * nrows)):int(round(r1 * nrows)),
                   int(round(c0 * ncols)):int(round(c1 * ncols))] = k
    else:  # voronoi
        sites = []
        owner = []
        for k, z in enumerate(spec.zones):
            pts = rng.uniform(size=(z.n_sites, 2)) * [nrows, ncols]
            sites.append(pts)
            owner.extend([k] * z.n_sites)
        sites = np.vstack(sites)
        owner = np.asarray(owner)
        rr, cc = np.meshgrid(np.arange(nrows) + 0.5, np.arange(ncols) + 0.5, indexing="ij")
        d2 = (rr[..., None] - sites[:, 0]) ** 2 + (cc[..., None] - sites[:, 1]) ** 2
        labels = owner[np.argmin(d2, axis=-1)]
    counts = np.bincount(labels.ravel(), minlength=len(spec.zones))
    for k, z in enumerate(spec.zones):
        if counts[k] == 0:
            raise ConfigError(f"zone {z.name!r} covers no cells (zero-area zone)")
    return labels


def synth_terrain(spec: TerrainSpec, seed: int) -> tuple[BathyGrid, LabelMap]:
    """Generate a labeled synthetic raster, deterministic for (spec, seed).

    Each zone's texture is drawn from its own seed stream so the depths in
    a zone do not depend on the layout of the others. With blend > 0 the
    textures are feathered across zone boundaries (labels stay hard), so
    boundary patches read as transitions instead of cliff artifacts.
    """
    spec.validate()
    layout_rng = np.random.default_rng(np.random.SeedSequence([seed, 0xB0]))
    labels = _zone_labels(spec, layout_rng)

    textures = []
    for k, zone in enumerate(spec.zones):
        zrng = np.random.default_rng(np.random.SeedSequence([seed, 1, k]))
        textures.append(zone.base_depth + zone.amplitude * value_noise(
            zrng, spec.nrows, spec.ncols, zone.scale, zone.octaves))

    if spec.blend > 0:
        from scipy.ndimage import gaussian_filter

        weights = np.stack([
            gaussian_filter((labels == k).astype(float), spec.blend, mode="nearest")
            for k in range(len(spec.zones))])
        weights /= weights.sum(axis=0)
        depths = np.sum(weights * np.stack(textures), axis=0)
    else:
        depths = np.zeros((spec.nrows, spec.ncols))
        for k in range(len(spec.zones)):
            sel = labels == k
            depths[sel] = textures[k][sel]

    grid = BathyGrid(spec.ncols, spec.nrows, spec.xllcorner, spec.yllcorner,
                     spec.cellsize, -9999.0, depths)
    return grid, LabelMap(labels, n_labels=len(spec.zones))
