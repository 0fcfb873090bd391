"""Command-line interface: simulation, Monte Carlo, audits, equivalence."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from ..errors import AffEkfError
from .audit import ATLASES, audit_app
from .config import ConfigError, load_config, parse_variants
from .csvio import export_csv
from .equivalence import equivalence_check
from .runner import aggregate_monte_carlo

EXIT_OK = 0
EXIT_RUN_FAILURE = 1
EXIT_BAD_CONFIG = 2


def _add_common(sub):
    sub.add_argument("--config", required=True, help="run configuration file")
    sub.add_argument("--runs", type=int, default=None)
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--out", default=None, help="output directory for CSV files")
    sub.add_argument("--variants", default=None, help="comma-separated variant names")
    sub.add_argument("--jobs", type=int, default=None, help="parallel worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="affekf", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    _add_common(subs.add_parser("simulate", help="single run with full per-step series"))
    _add_common(subs.add_parser("montecarlo", help="aggregate many runs"))

    audit = subs.add_parser("observability-audit", help="per-atlas observability report")
    audit.add_argument("--app", default=None, choices=sorted(ATLASES), help="one app (default: all)")
    audit.add_argument("--order", type=int, default=3)
    audit.add_argument("--samples", type=int, default=50)
    audit.add_argument("--seed", type=int, default=0)

    equiv = subs.add_parser("equivalence-check", help="affine-atlas vs corrected-standard dual run")
    equiv.add_argument("--steps", type=int, default=200)
    equiv.add_argument("--seed", type=int, default=0)
    equiv.add_argument("--variant", default="affv1", choices=("affv1", "affv2"))
    return parser


def _run_config_command(args, force_single_run: bool) -> int:
    overrides = {
        "runs": args.runs,
        "seed": args.seed,
        "out": args.out,
        "variants": parse_variants(args.variants) if args.variants else None,
        "jobs": args.jobs,
    }
    config = load_config(args.config, overrides)
    if force_single_run:
        config = replace(config, runs=1)
    report = aggregate_monte_carlo(config)
    if config.out_dir:
        files = export_csv(report, config.out_dir)
        print(f"wrote {len(files)} files to {config.out_dir}")
    for s in report.summaries:
        print(
            f"{s.variant}: rmse_ori={s.rmse_ori:.6g} rmse_pos={s.rmse_pos:.6g} "
            f"rmse_feat={s.rmse_feat:.6g} nees_pose={s.nees_pose:.6g} "
            f"nees_feat={s.nees_feat:.6g} time={s.time_s:.3f}s"
        )
    if report.incomplete:
        print(f"incomplete: failed runs {report.failed_runs}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command in ("simulate", "montecarlo"):
            return _run_config_command(args, force_single_run=args.command == "simulate")
        if args.command == "observability-audit":
            apps = [args.app] if args.app else sorted(ATLASES)
            for app in apps:
                print(audit_app(app, k=args.order, samples=args.samples, seed=args.seed))
            return EXIT_OK
        if args.command == "equivalence-check":
            out = equivalence_check(steps=args.steps, seed=args.seed, variant=args.variant)
            print(
                f"equivalence over {out['steps']} steps ({out['variant']}): "
                f"max state diff {out['max_state_diff']:.3e}, "
                f"max covariance relation diff {out['max_cov_rel_diff']:.3e}"
            )
            return EXIT_RUN_FAILURE if out["failed"] else EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except AffEkfError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUN_FAILURE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
