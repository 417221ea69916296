"""Command-line benchmark harness: gen, run, compare, serve."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from binpack3d import __version__
from binpack3d.core import BinConfig, PackingError, RewardMode
from binpack3d.datagen import DatagenError, Origin, make_dataset, read_dataset, write_dataset
from binpack3d.reports import (
    ReportError,
    RunConfig,
    compare_reports,
    dataset_sha256,
    read_report,
    run_config,
    write_report,
)

ORIGIN_CHOICES = [o.value for o in Origin]


def _add_bin_flag(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--bin",
        nargs=3,
        type=int,
        default=[10, 10, 10],
        metavar=("L", "W", "H"),
        help="bin dimensions in grid units (default 10 10 10)",
    )


def _add_solver_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--policy", choices=["boundary", "dbl", "random"], default="boundary")
    parser.add_argument("--aggregate", choices=["mean", "sum"], default="mean",
                        help="spare-box aggregation for the boundary rule")
    parser.add_argument("--volume-scale", default="1",
                        help="weight of the spare-box volume term, a fraction like 1 or 1000")
    parser.add_argument("--k", type=int, default=1,
                        help="visible buffer size; k>1 runs the permutation search")
    parser.add_argument("--simulations", type=int, default=600,
                        help="search iterations per decision (k>1)")
    parser.add_argument("--exploration", type=float, default=1.0,
                        help="search exploration constant (k>1)")
    parser.add_argument("--search-seed", type=int, default=0)
    parser.add_argument("--estimator", choices=["zero", "greedy-fit", "free-volume"],
                        default="free-volume")
    parser.add_argument("--swap-lw", action="store_true",
                        help="allow the horizontal L/W swap orientation")


def cmd_gen(args: argparse.Namespace) -> int:
    bin = BinConfig(*args.bin)
    sequences = make_dataset(
        args.origin, bin, args.count, args.seed, args.dim_min, args.dim_max
    )
    write_dataset(args.out, sequences)
    print(
        f"wrote {args.count} {args.origin} sequences to {args.out}"
        f" (sha256 {dataset_sha256(sequences)[:12]})"
    )
    return 0


def cmd_run(args: argparse.Namespace) -> int:
    sequences = read_dataset(args.dataset)
    if not sequences:
        raise ReportError(f"dataset {args.dataset} is empty")
    config = RunConfig(
        bin=sequences[0].bin,
        origin=sequences[0].origin,
        count=len(sequences),
        seed=args.seed,
        dim_min=args.dim_min,
        dim_max=args.dim_max,
        policy=args.policy,
        aggregate=args.aggregate,
        volume_scale=args.volume_scale,
        k=args.k,
        simulations=args.simulations,
        exploration=args.exploration,
        search_seed=args.search_seed,
        estimator=args.estimator,
        swap_lw=args.swap_lw,
        reward_mode=RewardMode(args.reward_mode),
        bins=args.bins,
    )
    report = run_config(config, sequences)
    times_path = args.times_out
    if times_path is None and args.out is not None:
        times_path = str(args.out) + ".times"
    if args.out is not None:
        write_report(args.out, report, times_path)
    label = config.solver_label()
    print(f"solver {label}")
    print(f"episodes {len(report.episodes)}")
    print(f"mean_items {float(report.mean_items):.3f}")
    print(f"mean_utilization {100 * float(report.mean_utilization):.3f}%")
    print(f"mean_decision_ms {1e3 * report.mean_decision_seconds:.3f}")
    if args.out is not None:
        print(f"report {args.out}")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    reports = [read_report(path) for path in args.reports]
    print(compare_reports(reports), end="")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from binpack3d.service import ServiceSettings, create_app, load_settings_dataset

    settings = ServiceSettings(
        store=Path(args.store),
        bin=BinConfig(*args.bin),
        origin=Origin(args.origin),
        dim_min=args.dim_min,
        dim_max=args.dim_max,
        swap_lw=args.swap_lw,
        policy=args.policy,
        aggregate=args.aggregate,
        volume_scale=args.volume_scale,
        k=args.k,
        simulations=args.simulations,
        exploration=args.exploration,
        search_seed=args.search_seed,
        estimator=args.estimator,
    )
    if args.dataset is not None:
        settings = load_settings_dataset(settings, args.dataset)
    app = create_app(settings)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="binpack3d",
        description="Online 3D bin packing: datasets, benchmark runs and the game service",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate an arrival-sequence dataset file")
    gen.add_argument("--origin", choices=ORIGIN_CHOICES, required=True)
    gen.add_argument("--count", type=int, required=True)
    gen.add_argument("--seed", type=int, required=True)
    _add_bin_flag(gen)
    gen.add_argument("--dim-min", type=int, default=2)
    gen.add_argument("--dim-max", type=int, default=5)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    run = sub.add_parser("run", help="run a solver over a dataset and report")
    run.add_argument("--dataset", required=True)
    run.add_argument("--seed", type=int, required=True,
                     help="master seed the dataset was generated from")
    run.add_argument("--dim-min", type=int, default=2)
    run.add_argument("--dim-max", type=int, default=5)
    _add_solver_flags(run)
    run.add_argument("--reward-mode", choices=["stepwise", "termination"],
                     default="stepwise")
    run.add_argument("--bins", type=int, default=1,
                     help="bin pool size; >1 routes arrivals across open bins")
    run.add_argument("--out", help="report file; timings go to OUT.times")
    run.add_argument("--times-out", help="override the timing sidecar path")
    run.set_defaults(func=cmd_run)

    cmp = sub.add_parser("compare", help="side-by-side table from report files")
    cmp.add_argument("reports", nargs="+")
    cmp.set_defaults(func=cmd_compare)

    serve = sub.add_parser("serve", help="start the HTTP game service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--store", required=True, help="directory for game event logs")
    serve.add_argument("--origin", choices=ORIGIN_CHOICES, default="CUT2")
    _add_bin_flag(serve)
    serve.add_argument("--dim-min", type=int, default=2)
    serve.add_argument("--dim-max", type=int, default=5)
    _add_solver_flags(serve)
    serve.add_argument("--dataset", help="dataset file for index-based game creation")
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PackingError, DatagenError, ReportError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
