"""Synthesize a labeled survey site and look at its feature space.

Walks the front half of the pipeline: generate bathymetry with known
habitat zones, extract geometric features (depth, slope, aspect,
rugosity) on a site lattice, fit the environment covariance, and show
how far apart the zones sit in whitened feature space. Writes preview
images and the feature field to demos/output/terrain/.

Run:  python demos/01_terrain_and_features.py
"""

import os

import numpy as np

from bathyplan import (TerrainSpec, ZoneSpec, build_feature_field, fit_mahalanobis,
                       mahalanobis, make_geometric_encoder, save_feature_field,
                       serialize_ascii_grid, synth_terrain)
from bathyplan.render import cluster_image, depth_image, write_ppm

OUT = os.path.join(os.path.dirname(__file__), "output", "terrain")

spec = TerrainSpec(
    nrows=96, ncols=96, cellsize=5.0, layout="rects", blend=1.0,
    zones=[
        ZoneSpec("sand", base_depth=-20.0, amplitude=0.2, scale=16, octaves=2,
                 rect=(0.0, 1.0, 0.0, 1.0)),
        ZoneSpec("rubble", base_depth=-24.0, amplitude=1.0, scale=7, octaves=3,
                 rect=(0.0, 0.45, 0.0, 1.0)),
        ZoneSpec("reef", base_depth=-10.0, amplitude=3.0, scale=3.5, octaves=3,
                 rect=(0.55, 0.85, 0.55, 0.85)),
    ],
)

grid, labels = synth_terrain(spec, seed=7)
areas = np.bincount(labels.labels.ravel())
print(f"site: {grid.nrows}x{grid.ncols} cells at {grid.cellsize} m "
      f"({grid.nrows * grid.cellsize:.0f} m x {grid.ncols * grid.cellsize:.0f} m)")
for zone, area in zip(spec.zones, areas):
    print(f"  zone {zone.name:7s} {area:5d} cells ({area / areas.sum():5.1%}) "
          f"base depth {zone.base_depth} m")

encoder = make_geometric_encoder(patch_size=5, cellsize=grid.cellsize)
ffield = build_feature_field(grid, encoder, stride=3)
print(f"\nfeature field: {ffield.n_sites} sites, d={ffield.d} "
      f"(depth, slope, sin(aspect), rugosity)")

site_zone = labels.labels[ffield.sites[:, 0], ffield.sites[:, 1]]
for z, zone in enumerate(spec.zones):
    F = ffield.features[site_zone == z]
    print(f"  {zone.name:7s} depth {F[:, 0].mean():7.2f} m   "
          f"slope {F[:, 1].mean():5.3f}   rugosity {F[:, 3].mean():5.3f}")

model = fit_mahalanobis(ffield.features)
print("\npairwise zone centroid separation (whitened units):")
centroids = [ffield.features[site_zone == z].mean(axis=0) for z in range(3)]
for i in range(3):
    for j in range(i + 1, 3):
        d = mahalanobis(model, centroids[i], centroids[j])
        print(f"  {spec.zones[i].name} <-> {spec.zones[j].name}: {d:.2f}")

os.makedirs(OUT, exist_ok=True)
with open(os.path.join(OUT, "site.asc"), "w") as fh:
    fh.write(serialize_ascii_grid(grid))
save_feature_field(ffield, os.path.join(OUT, "features.txt"))
write_ppm(depth_image(grid), os.path.join(OUT, "depth.ppm"))
write_ppm(cluster_image(labels.labels), os.path.join(OUT, "habitats.ppm"))
print(f"\nwrote site.asc, features.txt, depth.ppm, habitats.ppm -> {OUT}/")
