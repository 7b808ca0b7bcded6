"""Gridded bathymetry rasters: parsing, patches, and operability masks.

Rasters follow the ESRI ASCII grid convention: the first data row is the
northernmost. All conversions between (row, col) and world coordinates go
through :meth:`BathyGrid.cell_center` / :meth:`BathyGrid.cell_at`; world
coordinates refer to cell centers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GridFormatError

DEFAULT_NODATA = -9999.0

_HEADER_KEYS = ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value")


@dataclass
class BathyGrid:
    """Georeferenced depth raster with a no-data sentinel.

    ``depths`` has shape (nrows, ncols); row 0 is the northernmost row.
    Depths are meters on whatever sign convention the source uses
    (negative below sea level is typical).
    """

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    nodata_value: float
    depths: np.ndarray

    def __post_init__(self):
        if self.ncols < 1 or self.nrows < 1:
            raise ValueError(f"grid shape {self.nrows}x{self.ncols} must be >= 1x1")
        if not self.cellsize > 0:
            raise ValueError(f"cellsize {self.cellsize} must be > 0")
        self.depths = np.asarray(self.depths, dtype=float).reshape(self.nrows, self.ncols)
        self.depths.flags.writeable = False

    @property
    def valid_mask(self) -> np.ndarray:
        """Boolean (nrows, ncols) array: True where the cell holds real data."""
        return np.isfinite(self.depths) & (self.depths != self.nodata_value)

    def cell_center(self, row: int, col: int) -> tuple[float, float]:
        """World (easting, northing) of a cell center."""
        e = self.xllcorner + (col + 0.5) * self.cellsize
        n = self.yllcorner + (self.nrows - row - 0.5) * self.cellsize
        return e, n

    def cell_centers(self, rows: np.ndarray, cols: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        e = self.xllcorner + (np.asarray(cols) + 0.5) * self.cellsize
        n = self.yllcorner + (self.nrows - np.asarray(rows) - 0.5) * self.cellsize
        return e, n

    def cell_at(self, easting: float, northing: float) -> tuple[int, int] | None:
        """Cell containing a world point, or None if outside the raster."""
        col = math.floor((easting - self.xllcorner) / self.cellsize)
        row = self.nrows - 1 - math.floor((northing - self.yllcorner) / self.cellsize)
        if 0 <= row < self.nrows and 0 <= col < self.ncols:
            return row, col
        return None

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """(xmin, ymin, xmax, ymax) of the raster edge."""
        return (
            self.xllcorner,
            self.yllcorner,
            self.xllcorner + self.ncols * self.cellsize,
            self.yllcorner + self.nrows * self.cellsize,
        )


@dataclass
class Patch:
    """A square window of valid depths centered on a grid cell."""

    center: tuple[int, int]
    size: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.size, self.size)


@dataclass
class ObstacleMask:
    """Per-cell operability: True means the AUV may not enter the cell.

    Carries a copy of the parent grid geometry so world positions can be
    tested directly; positions outside the raster count as blocked.
    """

    ncols: int
    nrows: int
    xllcorner: float
    yllcorner: float
    cellsize: float
    blocked: np.ndarray

    def __post_init__(self):
        self.blocked = np.asarray(self.blocked, dtype=bool).reshape(self.nrows, self.ncols)
        self.blocked.flags.writeable = False

    def blocked_at(self, easting: float, northing: float) -> bool:
        col = math.floor((easting - self.xllcorner) / self.cellsize)
        row = self.nrows - 1 - math.floor((northing - self.yllcorner) / self.cellsize)
        if 0 <= row < self.nrows and 0 <= col < self.ncols:
            return bool(self.blocked[row, col])
        return True

    def unblocked_cells(self) -> np.ndarray:
        """(n, 2) array of (row, col) indices of operable cells."""
        rows, cols = np.nonzero(~self.blocked)
        return np.column_stack([rows, cols])


@dataclass
class LabelMap:
    """Ground-truth habitat labels for synthetic terrain. -1 marks invalid cells."""

    labels: np.ndarray
    n_labels: int

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=int)
        self.labels.flags.writeable = False

    def label_at(self, row: int, col: int) -> int:
        return int(self.labels[row, col])


def parse_ascii_grid(text: str) -> BathyGrid:
    """Parse an ESRI ASCII grid.

    Header keys ncols/nrows/xllcorner/yllcorner/cellsize are required,
    NODATA_value is optional (defaults to -9999). Errors carry the
    1-based line number of the offending line.
    """
    lines = text.splitlines()
    header: dict[str, float] = {}
    idx = 0
    while idx < len(lines):
        line = lines[idx]
        stripped = line.strip()
        if not stripped:
            idx += 1
            continue
        parts = stripped.split()
        key = parts[0].lower()
        if key not in _HEADER_KEYS:
            break  # first data row
        if len(parts) != 2:
            raise GridFormatError(f"header '{parts[0]}' wants exactly one value", idx + 1)
        try:
            header[key] = float(parts[1])
        except ValueError:
            raise GridFormatError(f"non-numeric header value {parts[1]!r}", idx + 1) from None
        idx += 1

    for key in ("ncols", "nrows", "xllcorner", "yllcorner", "cellsize"):
        if key not in header:
            raise GridFormatError(f"missing required header '{key}'")
    ncols = int(header["ncols"])
    nrows = int(header["nrows"])
    if ncols != header["ncols"] or nrows != header["nrows"]:
        raise GridFormatError("ncols/nrows must be integers")
    if ncols <= 0 or nrows <= 0:
        raise GridFormatError(f"ncols/nrows must be positive, got {ncols}/{nrows}")
    if header["cellsize"] <= 0:
        raise GridFormatError(f"cellsize must be > 0, got {header['cellsize']}")
    nodata = header.get("nodata_value", DEFAULT_NODATA)

    depths = np.empty((nrows, ncols), dtype=float)
    row = 0
    while idx < len(lines):
        stripped = lines[idx].strip()
        if not stripped:
            idx += 1
            continue
        if row >= nrows:
            raise GridFormatError(f"extra data row (expected {nrows})", idx + 1)
        tokens = stripped.split()
        if len(tokens) != ncols:
            raise GridFormatError(
                f"row {row} has {len(tokens)} values, expected {ncols}", idx + 1
            )
        try:
            depths[row] = [float(t) for t in tokens]
        except ValueError:
            bad = next(t for t in tokens if not _is_number(t))
            raise GridFormatError(f"non-numeric value {bad!r}", idx + 1) from None
        row += 1
        idx += 1
    if row != nrows:
        raise GridFormatError(f"found {row} data rows, expected {nrows}")

    return BathyGrid(ncols, nrows, header["xllcorner"], header["yllcorner"],
                     header["cellsize"], nodata, depths)


def _is_number(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False


def _fmt(x: float) -> str:
    """Shortest round-trip decimal; integers lose the trailing '.0'."""
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(float(x))


def serialize_ascii_grid(grid: BathyGrid) -> str:
    """Inverse of parse_ascii_grid; values round-trip exactly."""
    out = [
        f"ncols {grid.ncols}",
        f"nrows {grid.nrows}",
        f"xllcorner {_fmt(grid.xllcorner)}",
        f"yllcorner {_fmt(grid.yllcorner)}",
        f"cellsize {_fmt(grid.cellsize)}",
        f"NODATA_value {_fmt(grid.nodata_value)}",
    ]
    for row in grid.depths:
        out.append(" ".join(_fmt(v) for v in row))
    return "\n".join(out) + "\n"


def extract_patch(grid: BathyGrid, center: tuple[int, int], size: int) -> Patch | None:
    """Cut a size x size window around a cell.

    Returns None (rejection, not a fault) when the window leaves the grid
    or touches a no-data cell. Even sizes are a caller bug.
    """
    if size < 1 or size % 2 == 0:
        raise ValueError(f"patch size must be odd and positive, got {size}")
    row, col = center
    half = size // 2
    r0, r1 = row - half, row + half + 1
    c0, c1 = col - half, col + half + 1
    if r0 < 0 or c0 < 0 or r1 > grid.nrows or c1 > grid.ncols:
        return None
    window = grid.depths[r0:r1, c0:c1]
    if not np.all(np.isfinite(window)) or np.any(window == grid.nodata_value):
        return None
    return Patch(center=(row, col), size=size, values=window.copy())


def operability_mask(grid: BathyGrid, depth_min: float, depth_max: float) -> ObstacleMask:
    """Blocked wherever the cell is invalid or its depth lies outside
    [depth_min, depth_max] (same sign convention as the grid)."""
    if depth_min > depth_max:
        raise ValueError(f"depth_min {depth_min} > depth_max {depth_max}")
    valid = grid.valid_mask
    with np.errstate(invalid="ignore"):
        in_range = (grid.depths >= depth_min) & (grid.depths <= depth_max)
    blocked = ~(valid & in_range)
    return ObstacleMask(grid.ncols, grid.nrows, grid.xllcorner, grid.yllcorner,
                        grid.cellsize, blocked)
