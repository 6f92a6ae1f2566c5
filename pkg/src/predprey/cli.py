"""Command-line entry point: ``predprey run ...`` and ``predprey replay ...``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .coevolution import EPISODE
from .experiment import ConfigError, SETUPS, build_spec, load_config_file, load_genomes, replay_champion, run_experiment
from .world import WorldConfig

RUN_OPTIONS = ("seed", "runs", "generations", "pop", "grid", "trials", "scheme", "modules", "out", "time_limit")
RATES = ("weight", "add_link", "splice", "crossover")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="predprey")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment setup")
    run.add_argument("name", help=f"one of {', '.join(SETUPS)} or custom")
    run.add_argument("--config", type=Path, help="JSON file of overrides")
    run.add_argument("--seed", type=int)
    run.add_argument("--runs", type=int)
    run.add_argument("--generations", type=int)
    run.add_argument("--pop", type=int, help="mu = lambda")
    run.add_argument("--grid", type=int, help="square grid side")
    run.add_argument("--time-limit", type=int, dest="time_limit")
    run.add_argument("--trials", type=int)
    run.add_argument("--scheme", choices=["individual", "team", "both"])
    run.add_argument("--modules", type=int)
    run.add_argument("--out", type=Path)
    run.add_argument("--log-teams", action="store_true", default=None)
    run.add_argument("--checkpoint", action="store_true", default=None)
    for r in RATES:
        run.add_argument(f"--rates.{r}", dest=f"rates.{r}", type=float)

    rep = sub.add_parser("replay", help="replay champion genomes and write a trace")
    rep.add_argument("genomes", nargs="+", type=Path)
    rep.add_argument("--seed", type=int, default=0)
    rep.add_argument("--episode", nargs=3, type=int, metavar=("GEN", "ROUND", "TEAM"),
                     help="reproduce this evaluation episode of the run seeded with --seed")
    rep.add_argument("--grid", type=int)
    rep.add_argument("--time-limit", type=int, dest="time_limit")
    rep.add_argument("--out", type=Path, required=True)
    return p


def main(argv=None) -> int:
    parser = _parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    if args.command == "run":
        overrides = load_config_file(args.config) if args.config else {}
        cli = {k: getattr(args, k) for k in RUN_OPTIONS + ("log_teams", "checkpoint")}
        cli.update({f"rates.{r}": getattr(args, f"rates.{r}") for r in RATES})
        overrides.update({k: v for k, v in cli.items() if v is not None})
        try:
            spec = build_spec(args.name, overrides)
        except ConfigError as e:
            parser.error(str(e))
        try:
            return run_experiment(spec)
        except OSError as e:
            print(f"predprey: {e}", file=sys.stderr)
            return 1

    genomes = load_genomes(args.genomes)
    world_kw = {}
    if args.grid:
        world_kw["width"] = world_kw["height"] = args.grid
    if args.time_limit:
        world_kw["time_limit"] = args.time_limit
    key = (args.seed, args.episode[0], EPISODE, args.episode[1], args.episode[2]) if args.episode else (args.seed,)
    try:
        outcome, _ = replay_champion(genomes, WorldConfig(**world_kw), key, args.out)
    except ValueError as e:
        parser.error(str(e))
    print(f"steps {outcome.steps_used} captures {outcome.captures.tolist()}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
