"""Route a survey through every cluster type with the set-TSP planner.

Clusters the feature field with a Gaussian mixture, splits each cluster
into spatial components, samples one representative point per component,
and anneals an open tour that visits one node of every cluster type.
Finishes by scoring the path and comparing it against the random
transect baseline. Artifacts land in demos/output/tsp/.

Run:  python demos/02_cluster_survey_tsp.py
"""

import os

import numpy as np

from bathyplan import (assign_clusters, benchmark_transects, enforce_budget, fit_gmm,
                       load_terrain_spec, mc, mpd, msd, operability_mask,
                       path_features, path_to_csv, path_to_geojson, polygonize,
                       representative_points, sample_environment_features,
                       solve_set_tsp, synth_terrain)
from bathyplan.clustering import cluster_raster_ascii
from bathyplan.features import build_feature_field, fit_mahalanobis, make_geometric_encoder
from bathyplan.tsp import SetTspInstance

HERE = os.path.dirname(__file__)
OUT = os.path.join(HERE, "output", "tsp")
FIXTURE = os.path.join(HERE, "..", "tests", "data", "threezone.toml")

BUDGET = 1500.0  # meters of travel available for the dive
SEED = 1

spec = load_terrain_spec(FIXTURE)
grid, labels = synth_terrain(spec, spec.seed)
mask = operability_mask(grid, -np.inf, np.inf)
encoder = make_geometric_encoder(5, grid.cellsize)
ffield = build_feature_field(grid, encoder, stride=3)
model = fit_mahalanobis(ffield.features)

gmm = fit_gmm(ffield, K=4, seed=0)
cmap = assign_clusters(gmm, ffield)
polys = polygonize(cmap, min_area=4)
print(f"gaussian mixture: K={gmm.K}, converged={gmm.converged} "
      f"in {len(gmm.log_likelihood_trace)} iterations")
print("spatial components (cluster, sites):",
      [(c.cluster_id, c.area) for c in polys.active()])

nodes = representative_points(polys, per_component=1, seed=SEED)
print(f"\nrouting {len(nodes)} representative nodes over "
      f"{len(set(n.cluster_id for n in nodes))} cluster types")
instance = SetTspInstance(
    nodes=np.asarray([[n.easting, n.northing] for n in nodes]),
    cluster_ids=np.asarray([n.cluster_id for n in nodes]))
tour = solve_set_tsp(instance, seed=SEED, sweeps=400)
order = [int(instance.cluster_ids[int(np.argmin(
    np.sum((instance.nodes - w) ** 2, axis=1)))]) for w in tour.waypoints]
path, dropped = enforce_budget(tour, order, BUDGET)
print(f"tour length {path.length:.0f} m (budget {BUDGET:.0f} m), "
      f"dropped clusters: {dropped or 'none'}")

spacing = 2 * grid.cellsize
feats = path_features(path, ffield, spacing)
env_samples = sample_environment_features(ffield, mask, 1000, seed=12345)
print("\npath quality:")
print(f"  mean pairwise feature distance  {mpd(feats, model):6.3f}  (higher = more varied)")
print(f"  mean env-sample min distance    {msd(feats, env_samples, model):6.3f}  (lower = better coverage)")
print(f"  cluster types visited           {mc(path, cmap, spacing):6.3f}")

bench = benchmark_transects(grid, mask, ffield, model, cmap, budget=BUDGET,
                            n=100, seed=999, spacing=spacing)
lb = bench.means
print("\nrandom-transect baseline (mean of 100):")
print(f"  mpd {lb['mpd']:.3f}   msd {lb['msd']:.3f}   mc {lb['mc']:.3f}   d {lb['d_m']:.0f} m")

os.makedirs(OUT, exist_ok=True)
with open(os.path.join(OUT, "path.csv"), "w") as fh:
    fh.write(path_to_csv(path))
with open(os.path.join(OUT, "path.geojson"), "w") as fh:
    fh.write(path_to_geojson(path, planner="tsp"))
with open(os.path.join(OUT, "clusters.asc"), "w") as fh:
    fh.write(cluster_raster_ascii(cmap, grid))
print(f"\nwrote path.csv, path.geojson, clusters.asc -> {OUT}/")
