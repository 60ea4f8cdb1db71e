"""Command-line entry point: ``ighastar gen|bench|rankplot|render``.

Exit codes: 0 success, 1 usage error, 2 bad config, input file, generator
parameters or render mismatch, 3 broken search invariant or rule contract.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from dotenv import load_dotenv
from pydantic import ValidationError

from config.experiment import ExperimentConfig, load_experiment
from config.settings import settings
from functions.bench_functions import (
    BenchService,
    build_schedule,
    generate_world,
    rank_matrix,
    rank_matrix_to_csv,
    runs_from_csv,
)
from functions.render_functions import RenderService
from functions.world_functions import ElevationMap, load_map, queries_to_csv, save_map
from models.schemas import KinodynamicCarParams, RunRecord
from utils.exceptions import (
    ConfigError,
    DomainFault,
    InvariantViolation,
    MapParseError,
    RenderError,
    RuleContractViolation,
    WorldGenerationError,
)
from utils.utils import configure_logging

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INVARIANT = 3


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser that reports usage errors with exit code 1."""

    def error(self, message: str) -> None:
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _rules(text: str) -> list[str]:
    return [rule.strip() for rule in text.split(",") if rule.strip()]


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="ighastar", description="Adaptive-resolution anytime planners and benchmarks")
    parser.add_argument("--log-level", default=None, help="Logging level (default from settings)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    gen = sub.add_parser("gen", help="Generate a world and its query file")
    gen.add_argument("--config", type=Path, help="Experiment config supplying generator and parameters")
    gen.add_argument("--generator", choices=["sb", "mb", "urban", "offroad"], help="Generator (overrides config)")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", type=Path, default=Path("worlds"))

    bench = sub.add_parser("bench", help="Run every rule on every query of an experiment")
    bench.add_argument("--config", type=Path, required=True)
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--budget", type=int, default=None)
    bench.add_argument("--out", type=Path, default=None)
    bench.add_argument("--jobs", type=int, default=None)
    bench.add_argument("--rules", type=_rules, default=None, help="Comma-separated rule ids")

    rank = sub.add_parser("rankplot", help="Rank matrix of first-path expansions from a runs CSV")
    rank.add_argument("--records", type=Path, required=True, help="runs.csv written by bench")
    rank.add_argument("--rules", type=_rules, default=None)
    rank.add_argument("--out", type=Path, default=Path("rank.csv"))

    render = sub.add_parser("render", help="Render a run record on its map as SVG")
    render.add_argument("--map", type=Path, required=True)
    render.add_argument("--record", type=Path, required=True, help="Record JSON written by bench")
    render.add_argument("--out", type=Path, default=Path("run.svg"))
    render.add_argument(
        "--config", type=Path, default=None, help="Experiment TOML whose domain_params override the record's"
    )
    return parser


def cmd_gen(args: argparse.Namespace) -> int:
    config = load_experiment(args.config) if args.config else ExperimentConfig()
    generator = args.generator or config.world.generator
    if generator == "file":
        raise ConfigError("gen needs a generator, not 'file'")
    seed = args.seed if args.seed is not None else config.seed
    world_params, domain_params, schedule = {}, {}, None
    if generator == config.world.generator:
        world_params, domain_params = config.world.params, config.domain_params
        schedule = build_schedule(
            config.domain, config.schedule.levels, config.schedule.scale, config.schedule.base_cell
        )
    generated = generate_world(generator, seed, world_params, domain_params, config.schedule.levels, schedule)
    args.out.mkdir(parents=True, exist_ok=True)
    suffix = "elev" if isinstance(generated.world, ElevationMap) else "occ"
    map_path = args.out / f"{generator}-{seed}.{suffix}"
    query_path = args.out / f"{generator}-{seed}.csv"
    save_map(generated.world, map_path)
    query_path.write_text(queries_to_csv(generated.queries.queries), encoding="utf-8")
    logger.info(
        f"Wrote {map_path} and {len(generated.queries.queries)} queries "
        f"({generated.queries.rejected} draws rejected)"
    )
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_experiment(args.config).with_overrides(
        seed=args.seed, budget=args.budget, out=args.out, jobs=args.jobs, rules=args.rules
    )
    service = BenchService(config)
    records = service.run()
    service.write(records)
    return EXIT_OK


def cmd_rankplot(args: argparse.Namespace) -> int:
    try:
        text = args.records.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"Cannot read {args.records}: {e}") from e
    rules, matrix, skipped = rank_matrix(runs_from_csv(text), args.rules)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(rank_matrix_to_csv(rules, matrix), encoding="utf-8")
    logger.info(f"Wrote rank matrix for {len(rules)} rules to {args.out} ({skipped} queries skipped)")
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    try:
        world = load_map(args.map)
        record = RunRecord.model_validate_json(args.record.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read input: {e}") from e
    except ValidationError as e:
        raise ConfigError(f"Invalid record {args.record}: {e}") from e
    obstacle_params = None
    if args.config is not None:
        config = load_experiment(args.config)
        try:
            obstacle_params = KinodynamicCarParams.model_validate(config.domain_params)
        except ValidationError as e:
            raise ConfigError(f"Invalid domain_params in {args.config}: {e}") from e
    RenderService().render_to_file(world, record, args.out, obstacle_params)
    return EXIT_OK


COMMANDS = {"gen": cmd_gen, "bench": cmd_bench, "rankplot": cmd_rankplot, "render": cmd_render}


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Runs one subcommand and returns its exit code."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level or settings.log_level)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MapParseError, WorldGenerationError, RenderError) as e:
        logger.error(str(e))
        return EXIT_INPUT
    except (InvariantViolation, RuleContractViolation, DomainFault) as e:
        logger.exception(f"Internal error: {e}")
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
