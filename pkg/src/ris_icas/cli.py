"""Command-line entry point: ``ris-icas <subcommand> [--config F] [--seed S] ...``."""
from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from . import harness
from .config import ConfigError, ExperimentConfig, load_config, save_config

COMMANDS = {
    "rates": harness.run_rates,
    "static-ne": harness.run_static_ne,
    "train": harness.run_convergence,
    "compare": harness.run_strategy_comparison,
    "sweep-weights": harness.run_weight_sweep,
    "sweep-ris": harness.run_ris_sweep,
    "flops": harness.run_flops,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-icas",
        description="RIS-assisted transmission and key generation under a smart attacker.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="sectioned key=value config file")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--out", help="output directory for CSV files")
        p.add_argument("--replicates", type=int, help="override the replicate count")
        p.add_argument("--save-config", action="store_true",
                       help="also write the fully resolved config next to the CSVs")
    return parser


def resolve_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    updates = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("invalid value for 'seed': must be >= 0")
        updates["seed"] = args.seed
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.replicates is not None:
        if args.replicates < 1:
            raise ConfigError("invalid value for 'replicates': must be >= 1")
        updates["replicates"] = args.replicates
    return replace(cfg, **updates) if updates else cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    paths = COMMANDS[args.command](cfg, cfg.out_dir)
    if args.save_config:
        paths.append(save_config(cfg, f"{cfg.out_dir}/{args.command}_config.ini"))
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":
    sys.exit(main())
