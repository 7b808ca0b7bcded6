"""Raster previews as binary PPM images: depth colormap, cluster
colormap, and path overlays. One pixel per cell, so world-to-pixel is the
same affine map the grid uses."""

from __future__ import annotations

import numpy as np

from .grid import BathyGrid
from .paths import Path

# dark blue -> teal -> sand, for depth shading
_DEPTH_STOPS = np.array([[8, 24, 88], [33, 145, 140], [237, 220, 160]], dtype=float)

# qualitative palette for cluster ids (cycled past 12 labels)
CLUSTER_PALETTE = np.array([
    [31, 119, 180], [255, 127, 14], [44, 160, 44], [214, 39, 40],
    [148, 103, 189], [140, 86, 75], [227, 119, 194], [127, 127, 127],
    [188, 189, 34], [23, 190, 207], [174, 199, 232], [255, 187, 120],
], dtype=np.uint8)

NODATA_RGB = np.array([0, 0, 0], dtype=np.uint8)
PATH_RGB = np.array([255, 0, 64], dtype=np.uint8)


def write_ppm(rgb: np.ndarray, path: str):
    """Binary (P6) portable pixmap."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode())
        fh.write(rgb.tobytes())


def read_ppm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    # header = magic, width, height, maxval as whitespace-separated tokens
    tokens, pos = [], 0
    while len(tokens) < 4:
        end = pos
        while data[end:end + 1] not in (b" ", b"\t", b"\n", b"\r"):
            end += 1
        tokens.append(data[pos:end])
        pos = end + 1
    if tokens[0] != b"P6":
        raise ValueError("only binary P6 pixmaps are supported")
    w, h = int(tokens[1]), int(tokens[2])
    return np.frombuffer(data[pos:pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def depth_image(grid: BathyGrid) -> np.ndarray:
    """Depth colormap, shallow bright / deep dark; no-data cells black."""
    valid = grid.valid_mask
    rgb = np.tile(NODATA_RGB, (grid.nrows, grid.ncols, 1))
    if not valid.any():
        return rgb
    vals = grid.depths[valid]
    lo, hi = float(vals.min()), float(vals.max())
    span = hi - lo if hi > lo else 1.0
    t = (grid.depths - lo) / span
    t = np.clip(np.where(valid, t, 0.0), 0.0, 1.0)
    seg = np.minimum(t * (len(_DEPTH_STOPS) - 1), len(_DEPTH_STOPS) - 1 - 1e-9)
    idx = seg.astype(int)
    frac = (seg - idx)[..., None]
    colors = _DEPTH_STOPS[idx] * (1 - frac) + _DEPTH_STOPS[idx + 1] * frac
    rgb = np.where(valid[..., None], colors, NODATA_RGB).astype(np.uint8)
    return rgb


def cluster_image(label_raster: np.ndarray) -> np.ndarray:
    """Distinct color per label; negative labels (holes) black."""
    labels = np.asarray(label_raster, dtype=int)
    rgb = np.tile(NODATA_RGB, (*labels.shape, 1))
    pos = labels >= 0
    rgb[pos] = CLUSTER_PALETTE[labels[pos] % len(CLUSTER_PALETTE)]
    return rgb


def world_to_pixel(grid: BathyGrid, easting: float, northing: float) -> tuple[int, int]:
    """Pixel (row, col) of a world point; matches the raster cell layout."""
    col = int(np.floor((easting - grid.xllcorner) / grid.cellsize))
    row = grid.nrows - 1 - int(np.floor((northing - grid.yllcorner) / grid.cellsize))
    return row, col


def draw_path(rgb: np.ndarray, grid: BathyGrid, path: Path,
              color: np.ndarray = PATH_RGB) -> np.ndarray:
    """Overlay a polyline (Bresenham per leg) in a contrasting stroke."""
    out = rgb.copy()
    h, w, _ = out.shape
    pix = [world_to_pixel(grid, x, y) for x, y in path.waypoints]
    for (r0, c0), (r1, c1) in zip(pix[:-1], pix[1:]):
        for r, c in _bresenham(r0, c0, r1, c1):
            if 0 <= r < h and 0 <= c < w:
                out[r, c] = color
    if pix:
        r, c = pix[0]
        if 0 <= r < h and 0 <= c < w:
            out[r, c] = color
    return out


def _bresenham(r0: int, c0: int, r1: int, c1: int):
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        yield r, c
        if r == r1 and c == c1:
            return
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr
