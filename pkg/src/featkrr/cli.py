"""Command-line front end.

Subcommands: fit, derivs, optimize, verify, scenario gen.

Exit codes: 0 success, 1 verification suite failure, 2 bad configuration or
input data, 3 numerical failure.

BLAS thread pools are pinned to one thread before numpy loads (unless the
user already configured them): the --threads flag parallelizes independent
cases at the Python level instead, which keeps emitted files byte-identical
for any thread count.
"""

from __future__ import annotations

import argparse
import os
import sys


def _pin_blas_threads() -> None:
    if "numpy" in sys.modules:  # respect whatever the embedding process chose
        return
    for var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "OMP_NUM_THREADS",
                "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
        os.environ.setdefault(var, "1")


_pin_blas_threads()

from . import reports  # noqa: E402  (after BLAS pinning on purpose)
from .reports import ConfigError, ExperimentConfig  # noqa: E402


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featkrr",
        description="Compositional kernel ridge regression: fits, derivatives, optimization, verification.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, with_suites=False, with_preset=False):
        p.add_argument("--config", type=str, default=None, help="JSON experiment config")
        p.add_argument("--out", type=str, default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None, help="top-level seed (overrides config)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads for independent cases (FEATKRR_THREADS fallback)")
        if with_preset:
            p.add_argument("--preset", type=str, default=None,
                           help=f"built-in scenario: {sorted(reports.PRESETS)}")
        if with_suites:
            p.add_argument("--suite", action="append", default=None,
                           help="suite name (repeatable); overrides config suites")

    add_common(sub.add_parser("fit", help="solve the inner problem per lambda"), with_preset=True)
    add_common(sub.add_parser("derivs", help="directional derivative tables and fd sweeps"), with_preset=True)
    add_common(sub.add_parser("optimize", help="nonsmooth descent over feature weights"), with_preset=True)
    add_common(sub.add_parser("verify", help="run registered verification suites"), with_suites=True)
    scenario = sub.add_parser("scenario", help="scenario utilities")
    scen_sub = scenario.add_subparsers(dest="scenario_command", required=True)
    add_common(scen_sub.add_parser("gen", help="generate a scenario CSV with ground truth"), with_preset=True)
    return parser


def _resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = reports.load_config(args.config)
    else:
        cfg = ExperimentConfig()
    if getattr(args, "preset", None) is not None:
        if args.preset not in reports.PRESETS:
            raise ConfigError(f"unknown preset {args.preset!r}; choose from {sorted(reports.PRESETS)}")
        cfg.preset = args.preset
    if getattr(args, "suite", None):
        unknown = [s for s in args.suite if s not in reports.SUITES]
        if unknown:
            raise ConfigError(f"unknown suites {unknown}; registered: {sorted(reports.SUITES)}")
        cfg.suites = tuple(args.suite)
    if args.out is not None:
        from pathlib import Path

        cfg.output_dir = Path(args.out).resolve()
    if args.seed is not None:
        cfg.seed = args.seed
    env_threads = os.environ.get("FEATKRR_THREADS")
    if args.threads is not None:
        cfg.threads = args.threads
    elif env_threads is not None:
        try:
            cfg.threads = int(env_threads)
        except ValueError as exc:
            raise ConfigError(f"FEATKRR_THREADS must be an integer, got {env_threads!r}") from exc
    if cfg.threads < 1:
        raise ConfigError("threads must be >= 1")
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        if args.command == "fit":
            reports.run_fit(cfg)
        elif args.command == "derivs":
            reports.run_derivs(cfg)
        elif args.command == "optimize":
            reports.run_optimize(cfg)
        elif args.command == "verify":
            _, ok = reports.run_verify(cfg)
            if not ok:
                return 1
        elif args.command == "scenario":
            reports.run_scenario_gen(cfg)
        else:  # pragma: no cover - argparse enforces choices
            return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
