"""``pushid`` command line: simulate, preprocess, classify, segment, fit, stats, plot.

Every command writes ``<command>_report.json`` (with the resolved config)
into ``--out-dir``.  The exit status is 0 only when no trial failed and
all outputs were written; configuration errors exit with status 2.
"""
from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

from . import pipeline
from .config import SIM_STRATEGIES, RunConfig, load_config
from .errors import ConfigError


def _common() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON key-value config file")
    common.add_argument("--seed", type=int, help="base random seed")
    common.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--include-abandoned", action="store_true", default=None,
                        help="keep trials flagged as abandoned")
    common.add_argument("--lambda", dest="lam", type=float, help="ridge constant")
    common.add_argument("--law", help="comma-separated control laws, e.g. P,PD,PID")
    common.add_argument("--metric", help="comma-separated error metrics (linear, polynomial, exponential)")
    common.add_argument("--workers", type=int, help="worker threads for per-trial work")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pushid", description="Identify balance controllers from push-recovery CoM trials.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()

    sim = sub.add_parser("simulate", parents=[common], help="write synthetic trials")
    sim.add_argument("--strategy", choices=SIM_STRATEGIES, help="archetype to generate")
    sim.add_argument("--n", type=int, help="trials per strategy")
    sim.add_argument("--dt", type=float, help="integration step (s)")
    sim.add_argument("--output-dt", type=float, help="recording interval (s)")
    sim.add_argument("--duration", type=float, help="trial length (s)")

    for name, text in (("preprocess", "trim, filter and differentiate trials"),
                       ("classify", "classify recovery strategies"),
                       ("segment", "split trials into motion phases"),
                       ("fit", "fit control laws to whole trials"),
                       ("segment-fit", "fit control laws phase by phase"),
                       ("stats", "initial-state and fit group statistics"),
                       ("plot", "SVG projections and initial-state scatter")):
        cmd = sub.add_parser(name, parents=[common], help=text)
        cmd.add_argument("input", type=Path, help="directory of trial CSV files")
        if name in ("stats", "plot"):
            cmd.add_argument("--fits", type=Path, help="directory holding fit records")
    return parser


def _specs(law, metric):
    if law is None and metric is None:
        return None
    laws = [s.strip() for s in (law or "PD").split(",") if s.strip()]
    metrics = [s.strip() for s in (metric or "linear").split(",") if s.strip()]
    return [f"{a}-{m}" for a, m in itertools.product(laws, metrics)]


def resolve_config(args: argparse.Namespace) -> RunConfig:
    specs = _specs(args.law, args.metric)
    overrides = dict(seed=args.seed, include_abandoned=args.include_abandoned, lam=args.lam,
                     workers=args.workers, specs=specs,
                     plot_spec=specs[0] if specs else None)
    if args.command == "simulate":
        overrides.update(sim_strategy=args.strategy, sim_n=args.n, sim_dt=args.dt,
                         sim_output_dt=args.output_dt, sim_duration=args.duration)
    return load_config(args.config, **overrides)


def run(args: argparse.Namespace, config: RunConfig) -> dict:
    out = args.out_dir
    if args.command == "simulate":
        return pipeline.run_simulate(config, out)
    if args.command in ("stats", "plot"):
        fn = pipeline.run_stats if args.command == "stats" else pipeline.run_plot
        return fn(config, args.input, out, args.fits)
    fn = {"preprocess": pipeline.run_preprocess, "classify": pipeline.run_classify,
          "segment": pipeline.run_segment, "fit": pipeline.run_fit,
          "segment-fit": pipeline.run_segment_fit}[args.command]
    return fn(config, args.input, out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        print(f"pushid: invalid configuration: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(args, config)
    except FileNotFoundError as exc:
        print(f"pushid: {exc}", file=sys.stderr)
        return 1
    path = pipeline.write_json(report, args.out_dir / f"{args.command.replace('-', '_')}_report.json")
    n_ok, n_fail = len(report["results"]), len(report["failures"])
    print(f"{args.command}: {n_ok} results, {n_fail} failures, "
          f"{len(report['excluded'])} excluded, {len(report['skipped'])} skipped -> {path}")
    for failure in report["failures"]:
        print(f"  failed {failure['trial_id'] or '-'}: {failure['error']}", file=sys.stderr)
    return 1 if n_fail else 0


if __name__ == "__main__":
    sys.exit(main())
