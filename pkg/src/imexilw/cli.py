"""Command-line interface: ``imexilw run|convergence|list-models|list-problems|verify-oracle``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Sequence

import yaml

from .errors import ConfigError, ImexIlwError, ModelError, NonInflowBoundary, SolverError

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_MODEL = 3
EXIT_SOLVER = 4


def _raw_config(args) -> dict:
    from .driver import load_config_file

    raw = load_config_file(args.config) if args.config else {}
    if args.problem:
        raw["problem"] = args.problem
    for item in args.set or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        raw[key.strip()] = yaml.safe_load(value)
    if args.output:
        raw["output_dir"] = args.output
    return raw


def _cmd_run(args) -> int:
    from .driver import resolve_config, run_scenario

    cfg = resolve_config(_raw_config(args))
    res = run_scenario(cfg)
    print(f"{cfg.problem}: {res.steps} steps to t = {res.t:.6g} in {res.wall_time:.2f}s")
    if res.errors is not None:
        print("L1 = {:.3e}  L2 = {:.3e}  Linf = {:.3e}".format(*res.errors))
    for f in res.files:
        print(f"wrote {f}")
    return EXIT_OK


def _cmd_convergence(args) -> int:
    from .driver import convergence_study, resolve_config

    cfg = resolve_config(_raw_config(args))
    report = convergence_study(cfg)
    print(report.table())
    return EXIT_OK


def _cmd_list_models(args) -> int:
    from .models import MODEL_REGISTRY

    for name in sorted(MODEL_REGISTRY):
        doc = (MODEL_REGISTRY[name].__doc__ or "").strip().splitlines()
        print(f"{name:<18}{doc[0] if doc else ''}")
    return EXIT_OK


def _cmd_list_problems(args) -> int:
    from .driver import PROBLEMS

    for name, prob in PROBLEMS.items():
        print(f"{name:<10}{prob.ndim}D  {prob.model:<16}{prob.description}")
    return EXIT_OK


def _cmd_verify_oracle(args) -> int:
    from .oracle import comparison_table

    rows = comparison_table()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    print(f"{'law':<9}{'dt':>10}{'stage 1':>12}{'stage 2 exact':>15}{'stage 2 extrap':>16}")
    for r in rows:
        print(
            f"{r['law']:<9}{r['dt']:>10.4g}{r['stage1_diff']:>12.2e}"
            f"{r['stage2_diff_ilw']:>15.2e}{r['stage2_diff_extrap']:>16.2e}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="imexilw", description=__doc__)
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v progress, -vv per step")
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("--config", help="YAML or JSON scenario file")
        sp.add_argument("--problem", help="registered problem name (overrides the file)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
        sp.add_argument("--output", help="output directory (overrides the file and environment)")

    sp = sub.add_parser("run", help="run one scenario to t_end")
    scenario_args(sp)
    sp.set_defaults(func=_cmd_run)
    sp = sub.add_parser("convergence", help="run a refinement study")
    scenario_args(sp)
    sp.set_defaults(func=_cmd_convergence)
    sp = sub.add_parser("list-models", help="list available models")
    sp.set_defaults(func=_cmd_list_models)
    sp = sub.add_parser("list-problems", help="list registered problems")
    sp.set_defaults(func=_cmd_list_problems)
    sp = sub.add_parser("verify-oracle", help="compare stage boundary values with closed forms")
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=_cmd_verify_oracle)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "config", "x") is None and getattr(args, "problem", "x") is None:
        print("error: give --config or --problem", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ModelError, NonInflowBoundary) as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ImexIlwError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
