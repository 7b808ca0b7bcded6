"""Waypoint polylines and their exports (CSV, GeoJSON)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np


@dataclass
class Path:
    """Ordered (easting, northing) waypoints; open polyline in meters."""

    waypoints: np.ndarray

    def __post_init__(self):
        self.waypoints = np.atleast_2d(np.asarray(self.waypoints, dtype=float))
        if self.waypoints.shape[1] != 2:
            raise ValueError(f"waypoints must be (n, 2), got {self.waypoints.shape}")

    @property
    def n_points(self) -> int:
        return len(self.waypoints)

    @property
    def leg_lengths(self) -> np.ndarray:
        return np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)

    @property
    def length(self) -> float:
        return float(np.sum(self.leg_lengths))

    @property
    def cumulative(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.leg_lengths)])


def densify(path: Path, spacing: float) -> Path:
    """Subdivide legs so consecutive waypoints are at most `spacing` apart.

    Original vertices are preserved and the total length is unchanged; a
    leg shorter than the spacing is left alone.
    """
    if spacing <= 0:
        raise ValueError(f"spacing must be > 0, got {spacing}")
    wps = path.waypoints
    if len(wps) < 2:
        return Path(wps.copy())
    out = [wps[0]]
    for a, b in zip(wps[:-1], wps[1:]):
        leg = float(np.linalg.norm(b - a))
        k = max(1, int(np.ceil(leg / spacing)))
        for j in range(1, k + 1):
            out.append(a + (b - a) * (j / k))
    return Path(np.asarray(out))


def path_to_csv(path: Path, config_digest: str | None = None) -> str:
    """CSV with columns index,easting,northing,cum_length_m."""
    lines = []
    if config_digest is not None:
        lines.append(f"# config_digest={config_digest}")
    lines.append("index,easting,northing,cum_length_m")
    cum = path.cumulative
    for i, (x, y) in enumerate(path.waypoints):
        lines.append(f"{i},{float(x)!r},{float(y)!r},{float(cum[i])!r}")
    return "\n".join(lines) + "\n"


def path_from_csv(text: str) -> Path:
    wps = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("index"):
            continue
        parts = line.split(",")
        wps.append((float(parts[1]), float(parts[2])))
    return Path(np.asarray(wps))


def path_to_geojson(path: Path, crs_note: str = "planar grid frame (meters)",
                    config_digest: str | None = None, **extra_properties) -> str:
    """GeoJSON LineString; the CRS is recorded as a free-text property
    because coordinates pass through in whatever frame the raster used."""
    properties = {"crs_note": crs_note, "length_m": path.length}
    if config_digest is not None:
        properties["config_digest"] = config_digest
    properties.update(extra_properties)
    obj = {
        "type": "Feature",
        "properties": properties,
        "geometry": {
            "type": "LineString",
            "coordinates": [[float(x), float(y)] for x, y in path.waypoints],
        },
    }
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"
