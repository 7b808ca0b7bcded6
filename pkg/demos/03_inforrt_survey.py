"""Grow exploration trees that chase unseen terrain.

The tree planner needs no clustering: it aims for sampled points whose
features are far (in Mahalanobis distance) from everything already in
the tree, steers around inoperable cells, and respects the distance
budget as a hard cap. One tree per start; the path that best covers the
feature space wins. Artifacts land in demos/output/inforrt/.

Run:  python demos/03_inforrt_survey.py
"""

import os

import numpy as np

from bathyplan import (Environment, PlannerConfig, assign_clusters, evaluate, fit_gmm,
                       habitat_visits, load_terrain_spec, mc, mpd, msd,
                       operability_mask, path_features, path_to_csv, plan,
                       sample_environment_features, synth_terrain)
from bathyplan.features import build_feature_field, fit_mahalanobis, make_geometric_encoder

HERE = os.path.dirname(__file__)
OUT = os.path.join(HERE, "output", "inforrt")
FIXTURE = os.path.join(HERE, "..", "tests", "data", "threezone.toml")

BUDGET = 1500.0
SEED = 1

spec = load_terrain_spec(FIXTURE)
grid, labels = synth_terrain(spec, spec.seed)
mask = operability_mask(grid, -np.inf, np.inf)
ffield = build_feature_field(grid, make_geometric_encoder(5, grid.cellsize), stride=3)
model = fit_mahalanobis(ffield.features)
env = Environment(grid=grid, mask=mask, field=ffield, model=model)

config = PlannerConfig(
    budget=BUDGET,
    iterations=150,   # rounds of aim/select/steer/grow per start
    n_starts=4,       # independent trees from informative starting points
    goal_bias=0.5,    # half the aims chase novelty, half explore uniformly
    seed=SEED,
    eval_metric="msd",  # rank candidate paths by environment coverage
)

trees = []
candidates = plan(env, config, collect_trees=trees)
print("candidate paths, one per start:")
for s, (tree, cand) in enumerate(zip(trees, candidates)):
    print(f"  start {s}: tree {len(tree):3d} nodes, best path "
          f"{cand.n_points:3d} waypoints, {cand.length:6.0f} m")

best = evaluate(candidates, env, config)
spacing = 2 * grid.cellsize
feats = path_features(best, ffield, spacing)
env_samples = sample_environment_features(ffield, mask, 1000, seed=12345)

gmm = fit_gmm(ffield, K=4, seed=0)
cmap = assign_clusters(gmm, ffield)
print(f"\nselected path: {best.length:.0f} m of the {BUDGET:.0f} m budget")
print(f"  mean pairwise feature distance  {mpd(feats, model):6.3f}")
print(f"  mean env-sample min distance    {msd(feats, env_samples, model):6.3f}")
print(f"  cluster types visited           {mc(best, cmap, spacing):6.3f}")

visits = habitat_visits(best, labels, grid, spacing)
names = {0: "sand", 1: "rubble", 2: "reef"}
print("  habitat visits:", {names.get(k, k): v for k, v in sorted(visits.items())})

os.makedirs(OUT, exist_ok=True)
with open(os.path.join(OUT, "path.csv"), "w") as fh:
    fh.write(path_to_csv(best))
with open(os.path.join(OUT, "trees.csv"), "w") as fh:
    fh.write("start,child_id,parent_id,x,y,cost\n")
    for s, tree in enumerate(trees):
        for line in tree.edges_csv().splitlines()[1:]:
            fh.write(f"{s},{line}\n")
print(f"\nwrote path.csv, trees.csv -> {OUT}/")
