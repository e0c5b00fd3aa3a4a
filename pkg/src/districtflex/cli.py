"""Command line entry points.

    districtflex run <config.json> [--artifacts DIR]
    districtflex report <artifact_dir>
    districtflex gen-scenario --out DIR --buildings N --days D --seed S

Artifact root resolution: --artifacts flag, then $DISTRICTFLEX_ARTIFACTS,
then ./artifacts. Exit codes: 0 success, 2 configuration error, 3 runtime
error.
"""

from __future__ import annotations

import argparse
import sys

from .experiment import (
    ConfigParseError,
    MissingArtifactError,
    MissingDependencyError,
    UnknownControllerError,
    report,
    run_experiment,
)
from .scenario import generate_synthetic_scenario, write_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="districtflex",
                                     description="district energy flexibility testbed")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment config")
    p_run.add_argument("--artifacts", default=None, help="artifact root directory")

    p_rep = sub.add_parser("report", help="render summary tables for a finished run")
    p_rep.add_argument("artifact_dir", help="directory produced by 'run'")

    p_gen = sub.add_parser("gen-scenario", help="write a synthetic scenario as CSV")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--buildings", type=int, default=25)
    p_gen.add_argument("--days", type=int, default=30)
    p_gen.add_argument("--seed", type=int, default=1)
    p_gen.add_argument("--t-out-mean", type=float, default=-5.0)
    p_gen.add_argument("--t-out-shift", type=float, default=0.0)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            out = run_experiment(args.config, artifact_root=args.artifacts)
            print(f"artifacts written to {out}")
            print((out / "summary.md").read_text())
        elif args.command == "report":
            print(report(args.artifact_dir))
        elif args.command == "gen-scenario":
            scenario = generate_synthetic_scenario(
                args.buildings, args.days, args.seed,
                t_out_mean_c=args.t_out_mean, t_out_shift_c=args.t_out_shift,
            )
            write_scenario(scenario, args.out)
            print(f"scenario with N={scenario.n_buildings}, K={scenario.n_steps} written to {args.out}")
    except (ConfigParseError, UnknownControllerError, MissingDependencyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
