"""Command-line entry point: ``trialoffer <command> ...``."""

from __future__ import annotations

import argparse
import json
import sys

from .dataset import market_by_name
from .equilibrium import (
    equilibrium_for_support,
    expected_purchases_at,
    optimal_static_ranking,
    support_from_string,
)
from .errors import ConfigError, TrialOfferError
from .experiments import dump_config, run_experiment, validate_config
from .model import quality_ranking
from .signals import Affine, Power


def _overrides(args: argparse.Namespace) -> dict:
    return {
        "seed": args.seed,
        "worlds": args.worlds,
        "iterations": args.iterations,
        "output_dir": args.output_dir,
        "workers": args.workers,
        "r_grid": args.r,
    }


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = validate_config(args.config, _overrides(args))
    for path in run_experiment(cfg):
        print(path)
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    cfg = validate_config(args.config)
    sys.stdout.write(dump_config(cfg))
    return 0


def _cmd_equilibrium(args: argparse.Namespace) -> int:
    spec = market_by_name(args.market)
    rank = quality_ranking(spec)
    support = range(spec.n) if args.support is None else support_from_string(args.support, spec.n)
    eq = equilibrium_for_support(spec, rank, args.r, support)
    no_signal = Affine(alpha=1.0, beta=0.0)
    out = {
        "market": args.market,
        "ranking": rank.sigma.tolist(),
        **eq.to_dict(),
        "expected_purchases_with_signal": expected_purchases_at(spec, rank, Power(args.r), eq.shares),
        "expected_purchases_no_signal": expected_purchases_at(spec, rank, no_signal, eq.shares),
    }
    print(json.dumps(out, indent=2))
    return 0


def _cmd_rank_search(args: argparse.Namespace) -> int:
    spec = market_by_name(args.market)
    rank, value = optimal_static_ranking(spec, args.r, args.method)
    print(json.dumps({"market": args.market, "r": args.r, "method": args.method,
                      "ranking": rank.sigma.tolist(), "expected_purchases": value}, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trialoffer",
        description="Simulate and analyse trial-offer markets with social signals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the experiment described by a YAML config")
    run.add_argument("config")
    run.add_argument("--seed", type=int)
    run.add_argument("--worlds", type=int)
    run.add_argument("--iterations", type=int)
    run.add_argument("--output-dir")
    run.add_argument("--workers", type=int)
    run.add_argument("--r", type=float, nargs="+", help="replace the config's r_grid")
    run.set_defaults(func=_cmd_run)

    val = sub.add_parser("validate", help="check a config and echo the parsed result")
    val.add_argument("config")
    val.set_defaults(func=_cmd_validate)

    eq = sub.add_parser("equilibrium", help="closed-form equilibrium under the quality ranking")
    eq.add_argument("--market", required=True, help="built-in market name or dataset directory")
    eq.add_argument("--r", type=float, required=True)
    eq.add_argument("--support", help="1-based item numbers, e.g. 1,3 (default: all)")
    eq.set_defaults(func=_cmd_equilibrium)

    rs = sub.add_parser("rank-search", help="best static ranking at equilibrium (0 < r < 1)")
    rs.add_argument("--market", required=True)
    rs.add_argument("--r", type=float, required=True)
    rs.add_argument("--method", choices=["exhaustive", "local"], default="exhaustive")
    rs.set_defaults(func=_cmd_rank_search)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for err in exc.errors:
            print(f"error: {err}", file=sys.stderr)
        return 2
    except (TrialOfferError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
