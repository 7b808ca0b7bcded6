"""Command-line driver.

    bathyplan plan --synthetic spec.toml --planner tsp --budget 2200 --seed 1 --out run1
    bathyplan benchmark --input site.asc --budget 1500 --n 100 --out run1
    bathyplan render --out run1

Exit codes: 0 ok, 2 config error, 3 data error, 4 planner failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigError, DataError, PlannerError
from .runner import RunConfig, run_benchmark, run_plan, run_render


def _add_common(p: argparse.ArgumentParser):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--input", help="ESRI ASCII grid (.asc)")
    src.add_argument("--synthetic", help="TOML terrain spec for synthetic bathymetry")
    p.add_argument("--budget", type=float, default=1000.0, help="distance budget B in meters")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--encoder", choices=["geometric", "linear"], default="geometric")
    p.add_argument("--latent-dim", type=int, default=8, help="linear encoder latent size")
    p.add_argument("--patch", type=int, default=9, help="patch size in cells (odd)")
    p.add_argument("--stride", type=int, default=3, help="feature site lattice step")
    p.add_argument("--k", type=int, default=8, help="GMM component count")
    p.add_argument("--bic", action="store_true", help="pick K by BIC sweep instead of --k")
    p.add_argument("--min-area", type=int, default=4, help="smallest routable component (sites)")
    p.add_argument("--depth-min", type=float, default=-np.inf, help="operability lower bound")
    p.add_argument("--depth-max", type=float, default=np.inf, help="operability upper bound")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="out", help="artifact directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bathyplan",
                                     description="feature-space coverage survey planning")
    sub = parser.add_subparsers(dest="command", required=True)

    plan = sub.add_parser("plan", help="plan one survey path and score it")
    _add_common(plan)
    plan.add_argument("--planner", choices=["tsp", "inforrt"], default="tsp")
    plan.add_argument("--starts", type=int, default=4, help="InfoRRT start count")
    plan.add_argument("--iterations", type=int, default=200, help="tree iterations per start")
    plan.add_argument("--goal-bias", type=float, default=0.5)
    plan.add_argument("--step", type=float, default=None, help="tree step (default 5*cellsize)")
    plan.add_argument("--start-mode", choices=["informative", "random"], default="informative")
    plan.add_argument("--metric", choices=["mpd", "msd"], default="mpd",
                      help="criterion for picking among candidate paths")
    plan.add_argument("--time-budget", type=float, default=None,
                      help="wall-clock planning seconds (TSP total / InfoRRT per "
                           "start); default: fixed sweep/iteration counts")

    bench = sub.add_parser("benchmark", help="random-transect baseline L_B")
    _add_common(bench)
    bench.add_argument("--n", type=int, default=100, help="transect count")

    rend = sub.add_parser("render", help="rebuild preview images from artifacts")
    rend.add_argument("--out", default="out", help="artifact directory of a prior run")
    return parser


def _config_from(args) -> RunConfig:
    cfg = RunConfig(
        input_path=args.input,
        synthetic_spec=args.synthetic,
        budget=args.budget,
        seed=args.seed,
        encoder=args.encoder,
        latent_dim=args.latent_dim,
        patch_size=args.patch,
        stride=args.stride,
        k_clusters=args.k,
        bic=args.bic,
        min_area=args.min_area,
        depth_min=args.depth_min,
        depth_max=args.depth_max,
        jobs=args.jobs,
        out_dir=args.out,
    )
    if args.command == "plan":
        cfg.planner = args.planner
        cfg.starts = args.starts
        cfg.iterations = args.iterations
        cfg.goal_bias = args.goal_bias
        cfg.step = args.step
        cfg.start_mode = args.start_mode
        cfg.eval_metric = args.metric
        cfg.time_budget = args.time_budget
    else:
        cfg.n_transects = args.n
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "render":
            run_render(args.out)
        elif args.command == "plan":
            report, _ = run_plan(_config_from(args))
            print(f"planner={report.planner} mpd={report.mpd:.4f} "
                  f"msd={report.msd:.4f} mc={report.mc:.3f} d={report.d_m:.1f}m "
                  f"-> {args.out}/")
        else:
            result = run_benchmark(_config_from(args))
            m = result.means
            print(f"benchmark n={result.n_transects} mpd={m['mpd']:.4f} "
                  f"msd={m['msd']:.4f} mc={m['mc']:.3f} d={m['d_m']:.1f}m "
                  f"-> {args.out}/benchmark.json")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except PlannerError as exc:
        print(f"planner failure: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
