"""Command line entry points.

Exit codes: 0 success, 2 configuration error, 1 runtime error. The output
directory resolves as CLI flag > LEO_CPSA_OUTPUT_DIR environment variable >
config file value.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys

from .config import ScenarioConfig, load_scenario
from .errors import ConfigurationError
from .harness import compare, emit_request_trace, run

ENV_OUTPUT_DIR = "LEO_CPSA_OUTPUT_DIR"


def _apply_overrides(scenario: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    updates = {}
    if getattr(args, "seed", None) is not None:
        updates["rng_seed"] = args.seed
    if getattr(args, "slots", None) is not None:
        updates["slots"] = args.slots
    if getattr(args, "strategy", None) is not None:
        updates["strategy"] = args.strategy
    out = getattr(args, "out", None) or os.environ.get(ENV_OUTPUT_DIR)
    if out:
        updates["output_dir"] = out
    if updates:
        scenario = dataclasses.replace(scenario, **updates)
    return scenario


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("config", help="scenario config JSON")
    parser.add_argument("--seed", type=int, help="override rng_seed")
    parser.add_argument("--slots", type=int, help="override slot count")
    parser.add_argument("--out", help="override output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="leo-cpsa",
        description="Time-slotted controller placement and switch assignment for LEO constellations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one strategy and write artifacts")
    _add_common(p_run)
    p_run.add_argument("--strategy", choices=("ga", "soft_leo", "static_cluster", "brute_force"))

    p_cmp = sub.add_parser("compare", help="run several strategies and merge their metrics")
    _add_common(p_cmp)
    p_cmp.add_argument(
        "--strategies",
        default="ga,soft_leo,static_cluster",
        help="comma-separated strategy list",
    )

    p_trace = sub.add_parser("trace", help="emit the per-slot total request trace")
    _add_common(p_trace)

    p_oracle = sub.add_parser("oracle", help="run the exhaustive oracle (tiny scenarios only)")
    _add_common(p_oracle)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        scenario = _apply_overrides(load_scenario(args.config), args)
        if args.command == "run":
            result = run(scenario)
            totals = result.totals()
            print(
                f"{result.strategy_name}: {scenario.slots} slots, "
                f"total objective {totals['objective']:.3f} -> {scenario.output_dir}"
            )
        elif args.command == "compare":
            names = [s.strip() for s in args.strategies.split(",") if s.strip()]
            results = compare(scenario, names)
            for name in sorted(results):
                totals = results[name].totals()
                print(f"{name}: total objective {totals['objective']:.3f}")
        elif args.command == "trace":
            rows = emit_request_trace(scenario)
            print(f"request trace: {len(rows)} slots -> {scenario.output_dir}")
        elif args.command == "oracle":
            scenario = dataclasses.replace(scenario, strategy="brute_force")
            result = run(scenario)
            totals = result.totals()
            print(f"oracle: total objective {totals['objective']:.3f} -> {scenario.output_dir}")
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # runtime failure; artifacts may be partial
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
