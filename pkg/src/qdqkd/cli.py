"""``qdot-qkd`` command line: run scenarios, compute photon stats, validate configs."""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .dynamics import IntegrationError
from .metrics import InconsistentStatisticsError
from .sweep import (FINE_NUMERICS, SWEEP_NUMERICS, SCENARIOS, ConfigError, ScenarioConfig,
                    cache_photon_stats, load_scenario, run_scenario, validate_scenario)

EXIT_OK, EXIT_CONFIG, EXIT_CONVERGENCE = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdot-qkd", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a figure or custom scenario")
    run.add_argument("--scenario", choices=SCENARIOS)
    run.add_argument("--config", help="scenario file (INI)")
    run.add_argument("--out", help="output directory")
    run.add_argument("--paper-stats", action="store_true",
                     help="use fixed reference p1/p2 instead of simulating them")
    run.add_argument("--fine", action="store_true", help="publication-density grids")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--cache-dir")

    stats = sub.add_parser("stats", help="photon statistics of a preset")
    stats.add_argument("--preset", choices=("resonant", "adiabatic"), required=True)
    stats.add_argument("--delta-hv", type=float, default=1.5, help="meV")
    stats.add_argument("--paper-stats", action="store_true")
    stats.add_argument("--fast", action="store_true", help="reduced sweep resolution")
    stats.add_argument("--cache-dir")

    val = sub.add_parser("validate", help="check a scenario file")
    val.add_argument("--config", required=True)
    return p


def _scenario_from_args(args) -> ScenarioConfig:
    overrides = {"paper_stats": args.paper_stats or None, "fine": args.fine or None}
    if args.config:
        cfg = load_scenario(args.config, **overrides)
        if args.scenario:
            cfg.scenario = args.scenario
    elif args.scenario:
        cfg = ScenarioConfig(scenario=args.scenario, paper_stats=args.paper_stats, fine=args.fine)
    else:
        raise ConfigError("give --scenario or --config")
    if args.out:
        cfg.output_path = args.out
    return validate_scenario(cfg)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "validate":
            cfg = load_scenario(args.config)
            print(f"{args.config}: ok ({cfg.scenario}, {len(cfg.axes)} axes)")
        elif args.command == "stats":
            stats = cache_photon_stats(args.preset, args.delta_hv, paper_stats=args.paper_stats,
                                       numerics=SWEEP_NUMERICS if args.fast else FINE_NUMERICS,
                                       cache_dir=args.cache_dir)
            print(json.dumps(stats.to_record(), indent=2, sort_keys=True))
        else:
            cfg = _scenario_from_args(args)
            result = run_scenario(cfg, threads=args.threads, cache_dir=args.cache_dir)
            path = result.write(cfg.output_path, cfg.scenario)
            print(f"wrote {path} ({len(result.rows)} rows)")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationError, InconsistentStatisticsError) as exc:
        print(f"convergence error: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
