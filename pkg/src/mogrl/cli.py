"""Command-line entry points.

    mogrl run --config exp.cfg [--key value ...]
    mogrl sweep --config exp.cfg --axis num_components=1,2,5,10 --seeds 3
    mogrl eval-mdp --config exp.cfg --fixture chain5 [--key value ...]
"""
from __future__ import annotations

import argparse
import sys

from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .oracle import chain5, load_mdp, uniform_policy
from .runner import eval_policy_evaluation, run, sweep


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    return apply_overrides(cfg, args.overrides)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="mogrl",
        epilog="unrecognized --key value pairs override config fields",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="train one configuration")
    _add_common(p_run)

    p_sweep = sub.add_parser("sweep", help="grid over one config axis x seeds")
    p_sweep.add_argument("--axis", required=True, help="name=v1,v2,... (e.g. num_components=1,2,5,10)")
    p_sweep.add_argument("--seeds", type=int, required=True, help="number of seeds (0..n-1)")
    _add_common(p_sweep)

    p_eval = sub.add_parser("eval-mdp", help="policy evaluation against the exact oracle")
    p_eval.add_argument("--fixture", required=True, help="MDP fixture path, or 'chain5' for the built-in")
    _add_common(p_eval)

    args, args.overrides = parser.parse_known_args(argv)
    try:
        cfg = _load(args)
    except (ConfigError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    if args.command == "run":
        result = run(cfg)
        print(f"run_dir: {result.run_dir}")
        print(f"status: {result.status}")
        print(f"steps: {result.steps_completed}")
        print(f"final_eval_mean: {result.final_eval_mean}")
        print(f"best_eval_mean: {result.best_eval_mean}")
        return 0 if result.status == "ok" else 1

    if args.command == "sweep":
        if "=" not in args.axis:
            print("error: --axis expects name=v1,v2,...", file=sys.stderr)
            return 2
        name, _, raw = args.axis.partition("=")
        field_types = {f.name: f.type for f in __import__("dataclasses").fields(ExperimentConfig)}
        if name not in field_types:
            print(f"error: unknown axis {name!r}", file=sys.stderr)
            return 2
        caster = {"int": int, "float": float, "str": str, "bool": lambda s: s.lower() in ("1", "true")}
        cast = caster.get(str(field_types[name]), str)
        try:
            values = [cast(part) for part in raw.split(",") if part.strip()]
        except ValueError as e:
            print(f"error: bad axis value: {e}", file=sys.stderr)
            return 2
        summary = sweep(cfg, name, values, args.seeds)
        print(f"summary: {summary}")
        return 0

    # eval-mdp
    mdp = chain5() if args.fixture == "chain5" else load_mdp(args.fixture)
    report = eval_policy_evaluation(mdp, uniform_policy(mdp), cfg)
    print(f"q_range: {report.q_range:.6g}")
    print(f"max_abs_q_error: {report.max_abs_q_error:.6g}")
    print(f"mean_w1: {report.mean_w1:.6g}")
    print(f"mean_oracle_std: {report.mean_oracle_std:.6g}")
    print(f"final_loss: {report.final_loss:.6g}")
    ok = report.max_abs_q_error <= 0.05 * report.q_range
    print(f"q_within_5pct_of_range: {ok}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
