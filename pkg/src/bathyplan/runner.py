"""End-to-end survey runs: ingest or synthesize a raster, build the
feature field and cluster decomposition, run a planner, score the path,
and write the artifact set.

Artifacts per plan run (all stamped with the same config digest):
  bathy.asc     input raster copy (synthetic runs materialize theirs)
  clusters.asc  stride-decimated integer cluster raster
  path.csv      index,easting,northing,cum_length_m
  path.geojson  LineString with length and digest in properties
  metrics.json  PlanReport (mpd/msd/mc/d_m/habitat_visits/...)
  tree.csv      InfoRRT only: child_id,parent_id,x,y,cost per start
  depth.ppm / clusters.ppm / overlay.ppm   raster previews
  run.json      manifest: resolved config + digest + artifact list
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np

from . import clustering, evaluation, inforrt, render
from .errors import ConfigError, DataError, PlannerError
from .features import (Encoder, FeatureField, MahalanobisModel, build_feature_field,
                       extract_patch, fit_linear_encoder, fit_mahalanobis,
                       make_geometric_encoder)
from .grid import (BathyGrid, LabelMap, ObstacleMask, operability_mask,
                   parse_ascii_grid, serialize_ascii_grid)
from .paths import Path, path_to_csv, path_to_geojson
from .terrain import load_terrain_spec, synth_terrain
from .tsp import SetTspInstance, enforce_budget, solve_set_tsp


@dataclass
class RunConfig:
    """Resolved parameters of one run; hashing this yields the digest
    stamped into every artifact."""

    input_path: str | None = None
    synthetic_spec: str | None = None
    planner: str = "tsp"  # tsp | inforrt
    budget: float = 1000.0
    seed: int = 0
    encoder: str = "geometric"  # geometric | linear
    latent_dim: int = 8
    patch_size: int = 9
    stride: int = 3
    k_clusters: int = 8
    bic: bool = False
    min_area: int = 4
    per_component: int = 1
    depth_min: float = -np.inf
    depth_max: float = np.inf
    starts: int = 4
    iterations: int = 200
    goal_bias: float = 0.5
    k_nearest: int = 5
    aim_samples: int = 100
    start_samples: int = 100
    sample_spacing: float | None = None
    step: float | None = None
    start_mode: str = "informative"
    eval_metric: str = "mpd"
    eval_seed: int = 12345
    env_sample_count: int = 1000
    n_transects: int = 100
    tsp_sweeps: int = 600
    time_budget: float | None = None
    encoder_samples: int = 500
    jobs: int = 1
    out_dir: str = "out"

    def validate(self):
        if (self.input_path is None) == (self.synthetic_spec is None):
            raise ConfigError("exactly one of input grid or synthetic spec is required")
        if self.planner not in ("tsp", "inforrt"):
            raise ConfigError(f"unknown planner {self.planner!r}")
        if self.encoder not in ("geometric", "linear"):
            raise ConfigError(f"unknown encoder {self.encoder!r}")
        if self.budget <= 0:
            raise ConfigError(f"budget must be > 0, got {self.budget}")
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ConfigError(f"patch size must be odd, got {self.patch_size}")
        if self.stride < 1:
            raise ConfigError(f"stride must be >= 1, got {self.stride}")
        if self.depth_min > self.depth_max:
            raise ConfigError("depth_min > depth_max")

    def digest(self) -> str:
        payload = {k: (repr(v) if isinstance(v, float) else v)
                   for k, v in asdict(self).items() if k != "out_dir"}
        blob = json.dumps(payload, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class Pipeline:
    """Shared preparation: raster, mask, features, clusters."""

    config: RunConfig
    grid: BathyGrid
    labels: LabelMap | None
    mask: ObstacleMask
    encoder: Encoder
    ffield: FeatureField
    model: MahalanobisModel
    gmm: clustering.GmmModel
    cmap: clustering.ClusterMap
    polys: clustering.ClusterPolygons


def load_grid(config: RunConfig) -> tuple[BathyGrid, LabelMap | None]:
    if config.input_path is not None:
        if not os.path.exists(config.input_path):
            raise DataError(f"input grid not found: {config.input_path}")
        with open(config.input_path) as fh:
            return parse_ascii_grid(fh.read()), None
    if not os.path.exists(config.synthetic_spec):
        raise DataError(f"terrain spec not found: {config.synthetic_spec}")
    spec = load_terrain_spec(config.synthetic_spec)
    # terrain is seeded by the spec, not the planner seed, so seed sweeps
    # rerun the planners on one frozen environment
    grid, labels = synth_terrain(spec, spec.seed)
    return grid, labels


def _build_encoder(config: RunConfig, grid: BathyGrid) -> Encoder:
    if config.encoder == "geometric":
        return make_geometric_encoder(config.patch_size, grid.cellsize)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0xE0C]))
    half = config.patch_size // 2
    samples = []
    tries = 0
    while len(samples) < config.encoder_samples and tries < 20 * config.encoder_samples:
        r = int(rng.integers(half, grid.nrows - half))
        c = int(rng.integers(half, grid.ncols - half))
        patch = extract_patch(grid, (r, c), config.patch_size)
        tries += 1
        if patch is not None:
            samples.append(patch)
    if len(samples) <= config.latent_dim:
        raise DataError("not enough valid patches to train the linear encoder")
    return fit_linear_encoder(samples, config.latent_dim)


def prepare(config: RunConfig) -> Pipeline:
    config.validate()
    grid, labels = load_grid(config)
    mask = operability_mask(grid, config.depth_min, config.depth_max)
    encoder = _build_encoder(config, grid)
    ffield = build_feature_field(grid, encoder, config.stride)
    model = fit_mahalanobis(ffield.features)
    if config.bic:
        gmm, _, _ = clustering.select_k_bic(ffield, seed=config.seed)
    else:
        gmm = clustering.fit_gmm(ffield, config.k_clusters, seed=config.seed)
    cmap = clustering.assign_clusters(gmm, ffield)
    polys = clustering.polygonize(cmap, min_area=config.min_area)
    return Pipeline(config=config, grid=grid, labels=labels, mask=mask,
                    encoder=encoder, ffield=ffield, model=model, gmm=gmm,
                    cmap=cmap, polys=polys)


def plan_tsp(pipe: Pipeline) -> tuple[Path, list[int], dict]:
    """Method 1: set-TSP over representative nodes, then budget trimming."""
    config = pipe.config
    nodes = clustering.representative_points(
        pipe.polys, per_component=config.per_component, seed=config.seed)
    if not nodes:
        raise PlannerError("no representative nodes (all components ignored?)")
    instance = SetTspInstance(
        nodes=np.asarray([[n.easting, n.northing] for n in nodes]),
        cluster_ids=np.asarray([n.cluster_id for n in nodes]))
    tour = solve_set_tsp(instance, seed=config.seed, sweeps=config.tsp_sweeps,
                         time_budget=config.time_budget)
    order = [int(instance.cluster_ids[_nearest_node(instance.nodes, w)])
             for w in tour.waypoints]
    path, dropped = enforce_budget(tour, order, config.budget)
    return path, dropped, {}


def _nearest_node(nodes: np.ndarray, waypoint: np.ndarray) -> int:
    return int(np.argmin(np.sum((nodes - waypoint) ** 2, axis=1)))


def plan_inforrt(pipe: Pipeline) -> tuple[Path, list[int], dict]:
    """Method 2: budgeted information-gathering tree, best path across starts."""
    config = pipe.config
    env = inforrt.Environment(grid=pipe.grid, mask=pipe.mask,
                              field=pipe.ffield, model=pipe.model)
    pcfg = inforrt.PlannerConfig(
        budget=config.budget, step=config.step, k_nearest=config.k_nearest,
        iterations=config.iterations, n_starts=config.starts,
        goal_bias=config.goal_bias, aim_samples=config.aim_samples,
        start_samples=config.start_samples, sample_spacing=config.sample_spacing,
        seed=config.seed, start_mode=config.start_mode,
        eval_metric=config.eval_metric, eval_seed=config.eval_seed,
        eval_env_samples=config.env_sample_count, time_budget=config.time_budget)
    trees: list = []
    candidates = inforrt.plan(env, pcfg, collect_trees=trees)
    best = inforrt.evaluate(candidates, env, pcfg)
    extras = {"candidates": candidates, "env": env, "planner_config": pcfg,
              "trees": trees}
    return best, [], extras


def run_plan(config: RunConfig, write: bool = True) -> tuple[evaluation.PlanReport, dict]:
    """Full plan pipeline; returns the report and the artifact text map."""
    pipe = prepare(config)
    if config.planner == "tsp":
        path, dropped, extras = plan_tsp(pipe)
    else:
        path, dropped, extras = plan_inforrt(pipe)

    spacing = (config.sample_spacing if config.sample_spacing is not None
               else 2.0 * pipe.grid.cellsize)
    digest = config.digest()
    report = evaluation.report_for_path(
        path, pipe.ffield, pipe.model, pipe.cmap, pipe.mask, spacing,
        env_sample_count=config.env_sample_count, eval_seed=config.eval_seed,
        labels=pipe.labels, grid=pipe.grid,
        excluded=tuple(pipe.polys.omitted_clusters),
        planner=config.planner, seed=config.seed, config_digest=digest,
        dropped_clusters=dropped)

    artifacts = {
        "bathy.asc": serialize_ascii_grid(pipe.grid),
        "clusters.asc": clustering.cluster_raster_ascii(pipe.cmap, pipe.grid),
        "path.csv": path_to_csv(path, config_digest=digest),
        "path.geojson": path_to_geojson(path, config_digest=digest,
                                        planner=config.planner),
        "metrics.json": report.to_json(),
    }
    if config.planner == "inforrt":
        tree_lines = []
        for s, tree in enumerate(extras["trees"]):
            block = tree.edges_csv().splitlines()
            tree_lines.extend(f"{s},{ln}" for ln in block[1:])
        artifacts["tree.csv"] = ("start,child_id,parent_id,x,y,cost\n"
                                 + "\n".join(tree_lines) + "\n")

    if write:
        _write_artifacts(config, pipe, path, artifacts, digest)
    return report, artifacts


def _write_artifacts(config: RunConfig, pipe: Pipeline, path: Path,
                     artifacts: dict, digest: str):
    os.makedirs(config.out_dir, exist_ok=True)
    for name, text in artifacts.items():
        with open(os.path.join(config.out_dir, name), "w") as fh:
            fh.write(text)
    render_previews(config.out_dir, pipe.grid, pipe.cmap, path)
    manifest = {
        "config": {k: (repr(v) if isinstance(v, float) and not np.isfinite(v) else v)
                   for k, v in asdict(config).items()},
        "config_digest": digest,
        "artifacts": sorted(list(artifacts) + ["depth.ppm", "clusters.ppm", "overlay.ppm"]),
    }
    with open(os.path.join(config.out_dir, "run.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")


def render_previews(out_dir: str, grid: BathyGrid, cmap, path: Path | None):
    depth_rgb = render.depth_image(grid)
    render.write_ppm(depth_rgb, os.path.join(out_dir, "depth.ppm"))
    raster = clustering.label_lattice(cmap)
    render.write_ppm(render.cluster_image(raster), os.path.join(out_dir, "clusters.ppm"))
    if path is not None:
        overlay = render.draw_path(depth_rgb, grid, path)
        render.write_ppm(overlay, os.path.join(out_dir, "overlay.ppm"))


def run_benchmark(config: RunConfig, write: bool = True) -> evaluation.BenchmarkResult:
    """Random-transect baseline over the same prepared environment."""
    pipe = prepare(config)
    spacing = (config.sample_spacing if config.sample_spacing is not None
               else 2.0 * pipe.grid.cellsize)
    result = evaluation.benchmark_transects(
        pipe.grid, pipe.mask, pipe.ffield, pipe.model, pipe.cmap,
        budget=config.budget, n=config.n_transects, seed=config.seed,
        spacing=spacing, env_sample_count=config.env_sample_count,
        eval_seed=config.eval_seed, excluded=tuple(pipe.polys.omitted_clusters),
        jobs=config.jobs)
    result.config_digest = config.digest()
    if write:
        os.makedirs(config.out_dir, exist_ok=True)
        with open(os.path.join(config.out_dir, "benchmark.json"), "w") as fh:
            fh.write(result.to_json())
    return result


def run_render(out_dir: str):
    """Rebuild preview images from a prior run's artifacts."""
    bathy = os.path.join(out_dir, "bathy.asc")
    clusters = os.path.join(out_dir, "clusters.asc")
    pcsv = os.path.join(out_dir, "path.csv")
    for p in (bathy, clusters, pcsv):
        if not os.path.exists(p):
            raise DataError(f"missing artifact: {p}")
    from .paths import path_from_csv

    with open(bathy) as fh:
        grid = parse_ascii_grid(fh.read())
    with open(clusters) as fh:
        cl = parse_ascii_grid(fh.read())
    with open(pcsv) as fh:
        path = path_from_csv(fh.read())
    depth_rgb = render.depth_image(grid)
    render.write_ppm(depth_rgb, os.path.join(out_dir, "depth.ppm"))
    labels = np.where(cl.valid_mask, cl.depths, -1).astype(int)
    render.write_ppm(render.cluster_image(labels), os.path.join(out_dir, "clusters.ppm"))
    render.write_ppm(render.draw_path(depth_rgb, grid, path),
                     os.path.join(out_dir, "overlay.ppm"))
