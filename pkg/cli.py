#!/usr/bin/env python3
"""
Plasma sheath lab - command line entry point

    python cli.py classify --config configs/degenerate.json
    python cli.py pipeline --config configs/degenerate.json --out experiments

Exit codes: 0 success, 1 configuration error, 2 invalid parameters,
3 stage failure, 4 missing stage dependency.

Copyright 2025 Intellegix
Licensed under the Apache License, Version 2.0
"""
import argparse
import json
import logging
import sys
from typing import Any, Dict, List, Optional

import numpy as np

from errors import (ConfigError, DependencyMissing, InvalidParams,
                    SheathLabError, StageFailure)
from params import classify_regime, derived_constants
from persistence import resolve_output_root, write_csv
from pipeline import STAGES, run_pipeline
from run_config import RunConfig, apply_overrides, load_run_config
from sagdeev import sagdeev_table

logger = logging.getLogger("sheathlab")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_INVALID = 2
EXIT_STAGE = 3
EXIT_DEPENDENCY = 4


def run_classify(cfg: RunConfig) -> Dict[str, Any]:
    """Regime and derived constants as a JSON-ready dict"""
    params = cfg.params
    regime = classify_regime(params)
    report: Dict[str, Any] = {
        "regime": regime.kind.value,
        "margin": regime.margin,
        "sonic_u2": params.gRT / params.m,
        "bohm_u2": (params.gRT + 1.0) / params.m,
        "c_crit": None,
        "Gamma": None,
        "f_at_c": None,
    }
    if regime.supersonic:
        consts = derived_constants(params, regime)
        report.update(c_crit=consts.c_crit, Gamma=consts.Gamma, f_at_c=consts.f_at_c)
    return report


def _parse_orders(text: str) -> int:
    """'0..3' or '3' -> highest order"""
    try:
        return int(text.split("..")[-1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"orders must look like 0..3, got {text!r}")


def _load(args) -> RunConfig:
    if not args.config:
        raise ConfigError("--config is required")
    return load_run_config(args.config)


# Subcommands ---------------------------------------------------------------

def cmd_classify(args) -> int:
    print(json.dumps(run_classify(_load(args)), indent=2))
    return EXIT_OK


def cmd_sagdeev(args) -> int:
    cfg = _load(args)
    params = cfg.params
    regime = classify_regime(params)
    if not regime.supersonic:
        raise InvalidParams(f"Sagdeev table needs a supersonic flow, got {regime.kind.value}")
    f_at_c = derived_constants(params, regime).f_at_c
    span = 2.0 * abs(params.phi_b) or 0.1
    lo = args.phi_min if args.phi_min is not None else max(-span, f_at_c)
    hi = args.phi_max if args.phi_max is not None else span
    phis, n, V = sagdeev_table(params, np.linspace(lo, hi, args.points))
    path = write_csv(resolve_output_root(args.out) / cfg.output_prefix / "sagdeev.csv",
                     ("phi", "n", "V"), [phis, n, V])
    print(path)
    return EXIT_OK


def _run_stages(args, stages: List[str], overrides: Optional[Dict[str, Any]] = None, **kwargs) -> int:
    cfg = _load(args)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    result = run_pipeline(cfg, stages, args.out, **kwargs)
    for stage in result.stages_skipped:
        print(f"skipped: {stage}")
    for path in result.manifest.paths():
        print(result.root / path)
    return EXIT_OK


def cmd_stationary(args) -> int:
    return _run_stages(args, ["stationary"])


def cmd_verify(args) -> int:
    return _run_stages(args, ["verify-asymptotics"], {"verify.max_order": args.orders},
                       profile_path=args.profile)


def cmd_evolve(args) -> int:
    overrides = {"evolution.t_end": args.t_end, "evolution.snapshot_every": args.snapshot_every}
    return _run_stages(args, ["evolve"], overrides, profile_path=args.profile, restart=args.restart)


def cmd_qcheck(args) -> int:
    overrides: Dict[str, Any] = {"diagnostics.qcheck_epsilon": args.epsilon}
    if args.beta is not None:
        cfg = _load(args)
        regime = classify_regime(cfg.params)
        Gamma = derived_constants(cfg.params, regime).Gamma
        if Gamma is None or not cfg.params.phi_b > 0:
            raise InvalidParams("--beta needs a degenerate sheath with phi_b > 0")
        overrides["diagnostics.qcheck_beta_fraction"] = args.beta / (Gamma * cfg.params.phi_b ** 0.5)
    return _run_stages(args, ["q-check"], overrides)


def cmd_decay_fit(args) -> int:
    overrides = {"diagnostics.fit_model": args.model,
                 "diagnostics.fit_window": list(args.window) if args.window else None}
    return _run_stages(args, ["decay-fit"], overrides, series_path=args.series)


def cmd_pipeline(args) -> int:
    stages = [s.strip() for s in args.stages.split(",")] if args.stages else list(STAGES)
    return _run_stages(args, stages)


# Parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="Run configuration (JSON or key=value)")
    common.add_argument("--out", default=None,
                        help="Output root directory; reports land in <root>/<output_prefix>/ "
                             "(default: $SHEATHLAB_OUTPUT_ROOT or ./experiments)")
    common.add_argument("--log-level", default="INFO",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"], help="Logging level")

    parser = argparse.ArgumentParser(description="Plasma sheath lab: stationary sheaths, "
                                                 "asymptotics and stability runs",
                                     epilog="Crafted by Intellegix")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", parents=[common], help="Bohm-criterion regime of the config")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("sagdeev", parents=[common], help="Table of f^-1 and V over a phi range")
    p.add_argument("--phi-min", type=float, default=None)
    p.add_argument("--phi-max", type=float, default=None)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=cmd_sagdeev)

    p = sub.add_parser("stationary", parents=[common], help="Stationary sheath profile")
    p.set_defaults(func=cmd_stationary)

    p = sub.add_parser("verify-asymptotics", parents=[common], help="Degenerate expansion check")
    p.add_argument("--profile", default=None, help="Profile CSV (default: the run's profile.csv)")
    p.add_argument("--orders", type=_parse_orders, default=None, help="Derivative orders, e.g. 0..3")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("evolve", parents=[common], help="Perturbed time evolution")
    p.add_argument("--profile", default=None, help="Profile CSV (default: the run's profile.csv)")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--snapshot-every", type=float, default=None)
    p.add_argument("--restart", default=None, help="Snapshot CSV to restart from")
    p.set_defaults(func=cmd_evolve)

    p = sub.add_parser("q-check", parents=[common], help="Quadratic form positivity check")
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.set_defaults(func=cmd_qcheck)

    p = sub.add_parser("decay-fit", parents=[common], help="Fit the decay of an observer series")
    p.add_argument("--series", default=None, help="Series CSV (default: the run's series.csv)")
    p.add_argument("--model", choices=["exp", "alg"], default=None)
    p.add_argument("--window", type=float, nargs=2, default=None, metavar=("T_LO", "T_HI"))
    p.set_defaults(func=cmd_decay_fit)

    p = sub.add_parser("pipeline", parents=[common], help="Run several stages in order")
    p.add_argument("--stages", default=None, help=f"Comma-separated subset of {','.join(STAGES)}")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        logger.error("configuration error: %s", e)
        return EXIT_CONFIG
    except InvalidParams as e:
        logger.error("invalid parameters: %s", e)
        return EXIT_INVALID
    except DependencyMissing as e:
        logger.error("missing dependency: %s", e)
        return EXIT_DEPENDENCY
    except StageFailure as e:
        logger.error("%s", e)
        return EXIT_INVALID if isinstance(e.cause, InvalidParams) else EXIT_STAGE
    except SheathLabError as e:
        logger.error("%s: %s", type(e).__name__, e)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
