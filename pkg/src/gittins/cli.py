"""Command-line front end.

Subcommands: `oracle` prints the exact index table for the configured
environment, `train` runs bandit learning experiments, `schedule` runs
job-scheduling experiments, `gridsearch` produces a convergence map.
Flags override config-file values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import parse_config_file, resolve
from .harness import BANDIT_KINDS, grid_search, oracle_csv, run_experiment


def _add_common(sub):
    sub.add_argument("--config", type=str, default=None, help="config file path")
    sub.add_argument("--out", type=str, default=None, help="output directory or file")
    sub.add_argument("--algo", type=str, default=None, choices=["qgi", "restart", "qwi", "dgn"])
    sub.add_argument("--seed", type=str, default=None, help="seed or comma-separated seed list")
    sub.add_argument("--cadence", type=int, default=None)


def _build_parser():
    parser = argparse.ArgumentParser(prog="gittins", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)

    p_oracle = subs.add_parser("oracle", help="print exact index table as CSV")
    _add_common(p_oracle)

    p_train = subs.add_parser("train", help="bandit learning experiment")
    _add_common(p_train)
    p_train.add_argument("--steps", type=int, default=None)

    p_sched = subs.add_parser("schedule", help="job scheduling experiment")
    _add_common(p_sched)
    p_sched.add_argument("--episodes", type=int, default=None)

    p_grid = subs.add_parser("gridsearch", help="hyperparameter convergence map")
    _add_common(p_grid)
    p_grid.add_argument("--steps", type=int, default=None)
    return parser


def _config_from_args(args):
    overrides = parse_config_file(args.config) if args.config else {}
    extra = {}
    if args.algo:
        extra["algo"] = args.algo
    if args.seed:
        extra["run_seeds"] = [int(t) for t in args.seed.replace(",", " ").split()]
    if args.cadence:
        extra["run_cadence"] = args.cadence
    if getattr(args, "steps", None):
        extra["run_steps"] = args.steps
        extra["grid_steps"] = args.steps
    if getattr(args, "episodes", None):
        extra["run_episodes"] = args.episodes
    if args.out:
        extra["run_out"] = args.out
    return resolve(overrides, **extra)


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        cfg = _config_from_args(args)
    except (ValueError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        if args.command == "oracle":
            text = oracle_csv(cfg)
            if args.out and args.out != "-":
                Path(args.out).parent.mkdir(parents=True, exist_ok=True)
                Path(args.out).write_text(text)
            else:
                sys.stdout.write(text)
        elif args.command == "train":
            if cfg.env_kind not in BANDIT_KINDS:
                raise ValueError(f"`train` expects a bandit env, got {cfg.env_kind!r}")
            run_experiment(cfg)
        elif args.command == "schedule":
            if cfg.env_kind in BANDIT_KINDS:
                raise ValueError(f"`schedule` expects a job env, got {cfg.env_kind!r}")
            run_experiment(cfg)
        elif args.command == "gridsearch":
            out = Path(cfg.run_out) / "convergence_map.csv"
            grid_search(cfg, out_path=out)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure: report and signal
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
