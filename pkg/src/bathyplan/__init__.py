"""Budget-constrained AUV survey planning over gridded bathymetry.

Plans dive paths that maximize coverage of a learned bathymetric feature
space, via set-TSP routing over cluster representatives or an
information-gathering tree planner, and scores them against a
random-transect baseline.
"""

from .clustering import (ClusterMap, ClusterPolygons, GmmModel, assign_clusters,
                         cluster_raster_ascii, fit_gmm, polygonize,
                         representative_points, select_k_bic)
from .errors import BathyplanError, ConfigError, DataError, GridFormatError, PlannerError
from .evaluation import (BenchmarkResult, PlanReport, benchmark_transects,
                         habitat_visits, mc, mpd, msd, path_features,
                         report_for_path, sample_environment_features)
from .features import (Encoder, FeatureField, MahalanobisModel, build_feature_field,
                       encode, fit_linear_encoder, fit_mahalanobis,
                       geometric_features, load_feature_field, mahalanobis,
                       make_geometric_encoder, reconstruction_mse, reward,
                       save_feature_field)
from .grid import (BathyGrid, LabelMap, ObstacleMask, Patch, extract_patch,
                   operability_mask, parse_ascii_grid, serialize_ascii_grid)
from .inforrt import Environment, PlannerConfig, evaluate, find_start, plan, steer
from .paths import Path, densify, path_from_csv, path_to_csv, path_to_geojson
from .runner import RunConfig, run_benchmark, run_plan
from .terrain import TerrainSpec, ZoneSpec, load_terrain_spec, synth_terrain
from .tsp import SetTspInstance, enforce_budget, solve_set_tsp

__version__ = "0.1.0"
