"""Shared fixtures: the frozen three-zone environment and its derived
feature/cluster objects, built once per session.

Fixture constants were calibrated once and frozen:
  * FIXTURE_BUDGET (1500 m) is the documented feasibility budget; the
    worst set-TSP tour over planner seeds 0..19 measures ~650 m, so any
    budget >= FEASIBLE_TOUR_M keeps every cluster reachable.
  * K=4 components: pure sand, pure rubble, pure reef, and the boundary
    ramp between them; the reef component lies entirely inside the true
    reef zone.
"""

import os
from dataclasses import dataclass

import numpy as np
import pytest

from bathyplan.clustering import assign_clusters, fit_gmm, polygonize
from bathyplan.features import build_feature_field, fit_mahalanobis, make_geometric_encoder
from bathyplan.grid import operability_mask
from bathyplan.inforrt import Environment
from bathyplan.terrain import load_terrain_spec, synth_terrain

DATA_DIR = os.path.join(os.path.dirname(__file__), "data")
THREEZONE_TOML = os.path.join(DATA_DIR, "threezone.toml")

FIXTURE_PATCH = 5
FIXTURE_STRIDE = 3
FIXTURE_K = 4
FIXTURE_BUDGET = 1500.0
FEASIBLE_TOUR_M = 700.0  # measured max tour ~650 m over seeds 0..19, rounded up
EVAL_SEED = 12345


@dataclass
class ThreeZone:
    spec: object
    grid: object
    labels: object
    mask: object
    encoder: object
    ffield: object
    model: object
    gmm: object
    cmap: object
    polys: object

    @property
    def spacing(self) -> float:
        return 2.0 * self.grid.cellsize

    @property
    def env(self) -> Environment:
        return Environment(grid=self.grid, mask=self.mask,
                           field=self.ffield, model=self.model)

    def site_true_labels(self) -> np.ndarray:
        return self.labels.labels[self.ffield.sites[:, 0], self.ffield.sites[:, 1]]


@pytest.fixture(scope="session")
def threezone() -> ThreeZone:
    spec = load_terrain_spec(THREEZONE_TOML)
    grid, labels = synth_terrain(spec, spec.seed)
    mask = operability_mask(grid, -np.inf, np.inf)
    encoder = make_geometric_encoder(FIXTURE_PATCH, grid.cellsize)
    ffield = build_feature_field(grid, encoder, FIXTURE_STRIDE)
    model = fit_mahalanobis(ffield.features)
    gmm = fit_gmm(ffield, FIXTURE_K, seed=0)
    cmap = assign_clusters(gmm, ffield)
    polys = polygonize(cmap, min_area=4)
    return ThreeZone(spec=spec, grid=grid, labels=labels, mask=mask,
                     encoder=encoder, ffield=ffield, model=model, gmm=gmm,
                     cmap=cmap, polys=polys)


def random_spd(rng: np.random.Generator, d: int) -> np.ndarray:
    """Random symmetric positive definite matrix via A A^T + eps I."""
    A = rng.standard_normal((d, d))
    return A @ A.T + 1e-3 * np.eye(d)
