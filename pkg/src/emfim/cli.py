"""Command-line front end.

Subcommands:
    fit      EM fit only
    fim      one information matrix (--method spsa|louis|oakes|sem, --mode)
    dm       one EM-map Jacobian estimate (--method sem|spsa|fd)
    compare  everything the config asks for, plus the error table

All subcommands read a JSON experiment config (--config); --seed, --N, --c
and --out override the corresponding config entries. Replicate parallelism
is controlled by the EMFIM_WORKERS environment variable.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 EM non-convergence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import ConfigError, EmFimError, NonConvergenceError
from .report import ExperimentConfig, format_report, run_experiment, write_report

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_NONCONVERGENCE = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="emfim",
        description="Fisher information matrices for EM estimates",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the estimator seed")
        p.add_argument("--N", type=int, default=None, help="override the replicate count")
        p.add_argument("--c", type=float, default=None, help="override the perturbation size")
        p.add_argument("--out", default=None, help="override the report output path")

    common(sub.add_parser("fit", help="run the EM fit only"))

    fim = sub.add_parser("fim", help="compute one information matrix")
    common(fim)
    fim.add_argument("--method", choices=["spsa", "louis", "oakes", "sem"], default="spsa")
    fim.add_argument("--mode", choices=["expected", "observed"], default=None,
                     help="spsa estimator mode (overrides the config)")

    dm = sub.add_parser("dm", help="estimate the EM-map Jacobian")
    common(dm)
    dm.add_argument("--method", choices=["sem", "spsa", "fd"], default="fd")

    common(sub.add_parser("compare", help="run all configured methods and the error table"))
    return parser


def _shape_config(raw: dict, args) -> dict:
    raw = json.loads(json.dumps(raw))  # private copy
    spsa = raw.setdefault("spsa", {})
    if args.seed is not None:
        spsa["seed"] = args.seed
        raw.setdefault("dm", {})["seed"] = args.seed
    if args.N is not None:
        spsa["N"] = args.N
    if args.c is not None:
        spsa["c"] = args.c
    if args.out is not None:
        raw["out"] = args.out

    if args.command == "fit":
        raw["fim_methods"] = []
        raw["dm_methods"] = []
    elif args.command == "fim":
        raw["fim_methods"] = [args.method]
        raw["dm_methods"] = []
        if args.mode is not None:
            spsa["mode"] = args.mode
    elif args.command == "dm":
        raw["fim_methods"] = []
        raw["dm_methods"] = [args.method]
    return raw


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        config = ExperimentConfig.from_dict(_shape_config(raw, args))
        report = run_experiment(config)
    except (ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (EmFimError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"error ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    sys.stdout.write(format_report(report))
    if config.out:
        write_report(report, config.out)
        print(f"report written to {config.out}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
