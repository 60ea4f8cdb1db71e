"""Benchmark sweeps: running rules over query sets and reducing the results.

A sweep prepares queries (generated or read from files), runs every
(query, rule) pair in a bounded process pool, and writes:

* ``runs.csv``: one row per run, float fields written with ``repr``;
* ``summary.json``: head-to-head statistics, a pure function of the rows;
* ``records/<qid>__<rule>.json``: full records, when snapshots are kept.
"""

import csv
import io
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, ValidationError

from config.experiment import ExperimentConfig
from config.settings import settings
from functions.domain_functions import (
    Domain,
    KinematicCarDomain,
    KinodynamicCarDomain,
    PointRobotDomain,
)
from functions.generator_functions import GeneratedWorld, gen_mb, gen_offroad, gen_sb, gen_urban
from functions.resolution_functions import ResolutionSchedule, default_schedule
from functions.rule_functions import parse_rule
from functions.search_functions import hybrid_astar, iha_star, ighastar
from functions.world_functions import ElevationMap, OccupancyGrid, World, load_map, queries_from_csv
from models.schemas import (
    BottleneckParams,
    EmittedPath,
    KinematicCarParams,
    KinodynamicCarParams,
    OffroadParams,
    PlanResult,
    PointRobotParams,
    Query,
    RunRecord,
    UrbanParams,
)
from utils.exceptions import ConfigError
from utils.utils import derive_seed, format_float

logger = logging.getLogger(__name__)

RUNS_SCHEMA = "# ighastar-runs v1"
RUN_COLUMNS = [
    "qid",
    "rule",
    "status",
    "first_expansions",
    "best_expansions",
    "total_expansions",
    "first_cost",
    "best_cost",
    "emitted",
    "world_digest",
    "error",
]
ERROR_STATUS = "error"

DOMAIN_PARAMS: dict[str, type[BaseModel]] = {
    "r2": PointRobotParams,
    "se2": KinematicCarParams,
    "kinodynamic": KinodynamicCarParams,
}
DOMAIN_DIMENSIONS = {"r2": 2, "se2": 3, "kinodynamic": 4}


@dataclass
class PreparedQuery:
    """A query with the world it runs on."""

    query: Query
    world: World
    digest: str


@dataclass
class RunTask:
    """Everything a worker process needs for one (query, rule) run."""

    prepared: PreparedQuery
    rule: str
    domain_id: str
    domain_params: dict[str, Any]
    schedule: ResolutionSchedule
    budget: int
    record_snapshot: bool = False


def _validated(model: type[BaseModel], values: dict[str, Any], what: str) -> BaseModel:
    try:
        return model.model_validate(values)
    except ValidationError as e:
        raise ConfigError(f"Invalid {what} parameters: {e}") from e


def build_domain(domain_id: str, world: World, params: Optional[dict[str, Any]] = None) -> Domain:
    """Instantiates a domain on a world.

    Raises:
        ConfigError: For an unknown domain, bad parameters, or a world of
            the wrong kind (occupancy for ``r2``/``se2``, elevation for
            ``kinodynamic``).
    """
    if domain_id not in DOMAIN_PARAMS:
        raise ConfigError(f"Unknown domain {domain_id!r}")
    model = _validated(DOMAIN_PARAMS[domain_id], params or {}, domain_id)
    if domain_id == "kinodynamic":
        if not isinstance(world, ElevationMap):
            raise ConfigError("The kinodynamic domain needs an elevation map")
        return KinodynamicCarDomain(world, model)
    if not isinstance(world, OccupancyGrid):
        raise ConfigError(f"The {domain_id} domain needs an occupancy grid")
    if domain_id == "r2":
        return PointRobotDomain(world, model)
    return KinematicCarDomain(world, model)


def build_schedule(
    domain_id: str, levels: int, scale: float = 2.0, base_cell: Optional[list[float]] = None
) -> ResolutionSchedule:
    try:
        return default_schedule(domain_id, levels, scale, base_cell)
    except ValueError as e:
        raise ConfigError(str(e)) from e


def generate_world(
    generator: str,
    seed: int,
    world_params: Optional[dict[str, Any]] = None,
    domain_params: Optional[dict[str, Any]] = None,
    levels: int = 4,
    schedule: Optional[ResolutionSchedule] = None,
) -> GeneratedWorld:
    """Runs one generator with parameter dicts, validating them first.

    Queries are validated against ``schedule`` when given, so that the
    generator's guarantees hold for the schedule the planners will use.

    Raises:
        ConfigError: For an unknown generator or bad parameters.
        WorldGenerationError: If the generator cannot produce a valid world.
    """
    world_params = dict(world_params or {})
    domain_params = domain_params or {}
    if generator == "sb":
        return gen_sb(
            seed,
            _validated(BottleneckParams, world_params, "sb"),
            _validated(PointRobotParams, domain_params, "r2"),
            schedule,
        )
    if generator == "mb":
        world_params.setdefault("walls", 3)
        return gen_mb(
            seed,
            _validated(BottleneckParams, world_params, "mb"),
            _validated(PointRobotParams, domain_params, "r2"),
            schedule,
        )
    if generator == "urban":
        return gen_urban(
            seed,
            _validated(UrbanParams, world_params, "urban"),
            _validated(KinematicCarParams, domain_params, "se2"),
            levels,
            schedule,
        )
    if generator == "offroad":
        return gen_offroad(
            seed,
            _validated(OffroadParams, world_params, "offroad"),
            _validated(KinodynamicCarParams, domain_params, "kinodynamic"),
            levels,
            schedule,
        )
    raise ConfigError(f"Unknown generator {generator!r}")


def run_planner(
    rule: str,
    query: Query,
    schedule: ResolutionSchedule,
    domain: Domain,
    budget: int,
    record_snapshot: bool = False,
) -> PlanResult:
    """Runs the planner a rule id names: ``ha``, ``iha`` or an ``ighastar`` rule."""
    if rule == "ha":
        return hybrid_astar(query.start, query.goal, 0, schedule, domain, budget, record_snapshot=record_snapshot)
    if rule == "iha":
        return iha_star(query.start, query.goal, schedule, domain, budget, record_snapshot=record_snapshot)
    return ighastar(
        query.start, query.goal, schedule, domain, parse_rule(rule), budget, record_snapshot=record_snapshot
    )


def record_from_result(
    query: Query,
    rule: str,
    result: PlanResult,
    digest: Optional[str] = None,
    keep_snapshot: bool = False,
    domain_params: Optional[dict[str, Any]] = None,
) -> RunRecord:
    """Flattens a planner result into a run row; paths and snapshots only on request."""
    emitted = result.stats.emitted
    return RunRecord(
        qid=query.qid,
        rule=rule,
        status=result.stats.status.value,
        emitted=emitted,
        first_expansions=emitted[0].expansions if emitted else None,
        best_expansions=emitted[-1].expansions if emitted else None,
        total_expansions=result.stats.expansions,
        first_cost=emitted[0].cost if emitted else None,
        best_cost=emitted[-1].cost if emitted else None,
        world_digest=digest,
        start=query.start if keep_snapshot else None,
        goal=query.goal if keep_snapshot else None,
        path=result.path if keep_snapshot else None,
        snapshot=result.snapshot if keep_snapshot else None,
        domain_params=(domain_params or {}) if keep_snapshot else None,
    )


def run_task(task: RunTask) -> RunRecord:
    """Runs one (query, rule) pair; planner failures become ``error`` rows."""
    qid = task.prepared.query.qid
    try:
        domain = build_domain(task.domain_id, task.prepared.world, task.domain_params)
        result = run_planner(
            task.rule, task.prepared.query, task.schedule, domain, task.budget, task.record_snapshot
        )
    except Exception as e:
        logger.exception(f"Run {qid}/{task.rule} aborted")
        return RunRecord(
            qid=qid, rule=task.rule, status=ERROR_STATUS, error=f"{type(e).__name__}: {e}",
            world_digest=task.prepared.digest,
        )
    return record_from_result(
        task.prepared.query, task.rule, result, task.prepared.digest, task.record_snapshot, task.domain_params
    )


def _emitted_to_text(emitted: list[EmittedPath]) -> str:
    return ";".join(f"{format_float(e.cost)}:{e.expansions}:{e.iteration}" for e in emitted)


def _emitted_from_text(text: str) -> list[EmittedPath]:
    if not text:
        return []
    entries = []
    for item in text.split(";"):
        cost, expansions, iteration = item.split(":")
        entries.append(EmittedPath(cost=float(cost), expansions=int(expansions), iteration=int(iteration)))
    return entries


def _optional(value: Optional[float]) -> str:
    if value is None:
        return ""
    return format_float(value) if isinstance(value, float) else str(value)


def runs_to_csv(records: list[RunRecord]) -> str:
    """Serializes records as the versioned runs CSV, sorted by (qid, rule)."""
    buffer = io.StringIO()
    buffer.write(RUNS_SCHEMA + "\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RUN_COLUMNS)
    for r in sorted(records, key=lambda r: (r.qid, r.rule)):
        writer.writerow(
            [
                r.qid,
                r.rule,
                r.status,
                _optional(r.first_expansions),
                _optional(r.best_expansions),
                r.total_expansions,
                _optional(r.first_cost),
                _optional(r.best_cost),
                _emitted_to_text(r.emitted),
                r.world_digest or "",
                r.error or "",
            ]
        )
    return buffer.getvalue()


def runs_from_csv(text: str) -> list[RunRecord]:
    """Parses a runs CSV written by ``runs_to_csv``.

    Raises:
        ConfigError: On a missing schema line, a wrong header or a bad row.
    """
    lines = text.splitlines()
    if not lines or lines[0] != RUNS_SCHEMA:
        raise ConfigError(f"Runs file must start with {RUNS_SCHEMA!r}")
    rows = list(csv.reader(lines[1:]))
    if not rows or rows[0] != RUN_COLUMNS:
        raise ConfigError(f"Runs header must be {','.join(RUN_COLUMNS)}")
    records = []
    for number, row in enumerate(rows[1:], start=3):
        if not row:
            continue
        try:
            values = dict(zip(RUN_COLUMNS, row, strict=True))
            records.append(
                RunRecord(
                    qid=values["qid"],
                    rule=values["rule"],
                    status=values["status"],
                    emitted=_emitted_from_text(values["emitted"]),
                    first_expansions=int(values["first_expansions"]) if values["first_expansions"] else None,
                    best_expansions=int(values["best_expansions"]) if values["best_expansions"] else None,
                    total_expansions=int(values["total_expansions"]),
                    first_cost=float(values["first_cost"]) if values["first_cost"] else None,
                    best_cost=float(values["best_cost"]) if values["best_cost"] else None,
                    world_digest=values["world_digest"] or None,
                    error=values["error"] or None,
                )
            )
        except ValueError as e:
            raise ConfigError(f"Bad runs row on line {number}: {e}") from e
    return records


def _bootstrap_ci(values: np.ndarray, resamples: int, rng: np.random.Generator) -> Optional[list[float]]:
    """Percentile bootstrap 95% interval of the mean."""
    if values.size == 0:
        return None
    picks = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[picks].mean(axis=1)
    low, high = np.percentile(means, [2.5, 97.5])
    return [float(low), float(high)]


def _first_expansions(record: RunRecord) -> float:
    return float(record.first_expansions) if record.first_expansions is not None else math.inf


def _by_query(records: list[RunRecord]) -> dict[str, dict[str, RunRecord]]:
    table: dict[str, dict[str, RunRecord]] = defaultdict(dict)
    for record in records:
        table[record.qid][record.rule] = record
    return table


def summarize(
    records: list[RunRecord],
    rules: Optional[list[str]] = None,
    resamples: Optional[int] = None,
    seed: int = 0,
) -> dict[str, Any]:
    """Reduces run rows to head-to-head statistics.

    For every ordered pair (A, B) of rules, over queries both ran: the
    fraction of queries where A found its first path with fewer expansions
    than B, the tie fraction, and the mean ratio B/A over A's wins with a
    finite ratio, each with a bootstrap 95% interval. A run without a path
    counts as infinitely many expansions. When ``iha`` is among the rules,
    every other rule also gets its termination speed-up (iHA* total
    expansions over the rule's) over queries where iHA* terminated.

    Args:
        records: Run rows.
        rules: Rules to compare, defaults to every rule in the rows.
        resamples: Bootstrap resamples, defaults to the settings value.
        seed: Seed of the bootstrap generator.

    Returns:
        A JSON-serializable dict.
    """
    resamples = resamples or settings.bootstrap_resamples
    rules = rules or sorted({r.rule for r in records})
    table = _by_query(records)
    rng = np.random.default_rng(seed)
    pairs = []
    for a in rules:
        for b in rules:
            if a == b:
                continue
            shared = [row for _, row in sorted(table.items()) if a in row and b in row]
            first_a = np.array([_first_expansions(row[a]) for row in shared])
            first_b = np.array([_first_expansions(row[b]) for row in shared])
            wins = (first_a < first_b).astype(float)
            ties = (first_a == first_b).astype(float)
            finite = wins.astype(bool) & np.isfinite(first_b) & (first_a > 0)
            ratios = first_b[finite] / first_a[finite]
            pairs.append(
                {
                    "a": a,
                    "b": b,
                    "queries": len(shared),
                    "win_ratio": float(wins.mean()) if shared else None,
                    "win_ci": _bootstrap_ci(wins, resamples, rng),
                    "tie_fraction": float(ties.mean()) if shared else None,
                    "speedup_mean": float(ratios.mean()) if ratios.size else None,
                    "speedup_ci": _bootstrap_ci(ratios, resamples, rng),
                    "speedup_queries": int(ratios.size),
                }
            )
    termination = []
    if "iha" in rules:
        for rule in rules:
            if rule == "iha":
                continue
            ratios = np.array(
                [
                    row["iha"].total_expansions / row[rule].total_expansions
                    for _, row in sorted(table.items())
                    if "iha" in row
                    and rule in row
                    and row["iha"].status == "optimal-terminated"
                    and row[rule].total_expansions > 0
                ]
            )
            termination.append(
                {
                    "rule": rule,
                    "queries": int(ratios.size),
                    "median": float(np.median(ratios)) if ratios.size else None,
                    "mean": float(ratios.mean()) if ratios.size else None,
                    "mean_ci": _bootstrap_ci(ratios, resamples, rng),
                }
            )
    status_counts: dict[str, dict[str, int]] = {rule: defaultdict(int) for rule in rules}
    for record in records:
        if record.rule in status_counts:
            status_counts[record.rule][record.status] += 1
    return {
        "queries": len(table),
        "rules": rules,
        "pairs": pairs,
        "termination": termination,
        "status_counts": {rule: dict(sorted(counts.items())) for rule, counts in status_counts.items()},
    }


def rank_matrix(
    records: list[RunRecord], rules: Optional[list[str]] = None
) -> tuple[list[str], list[list[float]], int]:
    """Percentage of queries each rule reached each first-path rank.

    Rules are ranked by first-path expansions per query; tied rules share
    the better rank (1 + number of strictly better rules). Queries missing
    a row for any rule are skipped.

    Returns:
        The rules, a rules × ranks matrix of percentages, and the number of
        skipped queries.
    """
    rules = rules or sorted({r.rule for r in records})
    counts = np.zeros((len(rules), len(rules)))
    used = skipped = 0
    for _, row in sorted(_by_query(records).items()):
        if any(rule not in row for rule in rules):
            skipped += 1
            continue
        values = [_first_expansions(row[rule]) for rule in rules]
        for index, value in enumerate(values):
            rank = sum(1 for other in values if other < value)
            counts[index, rank] += 1
        used += 1
    if skipped:
        logger.warning(f"Skipped {skipped} queries with missing rule rows")
    matrix = (counts * 100.0 / used).tolist() if used else counts.tolist()
    return rules, matrix, skipped


def rank_matrix_to_csv(rules: list[str], matrix: list[list[float]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["rule", *[f"rank_{k + 1}" for k in range(len(rules))]])
    for rule, row in zip(rules, matrix):
        writer.writerow([rule, *[format_float(value) for value in row]])
    return buffer.getvalue()


class BenchService:
    """Runs experiment sweeps and writes their result files."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.schedule = build_schedule(
            config.domain, config.schedule.levels, config.schedule.scale, config.schedule.base_cell
        )

    def prepare_queries(self) -> list[PreparedQuery]:
        """Generates ``query_count`` worlds, or reads the configured files.

        Raises:
            ConfigError: On bad parameters or a world of the wrong kind.
            WorldGenerationError: If a generator gives up.
            MapParseError: If a map or query file is malformed.
        """
        config = self.config
        if config.world.generator == "file":
            world = load_map(config.world.map)
            build_domain(config.domain, world, config.domain_params)
            text = config.world.queries.read_text(encoding="utf-8")
            digest = world.digest()
            queries = queries_from_csv(text, DOMAIN_DIMENSIONS[config.domain])
            return [PreparedQuery(query=q, world=world, digest=digest) for q in queries]
        prepared = []
        for index in range(config.query_count):
            seed = derive_seed(config.seed, config.world.generator, index)
            generated = generate_world(
                config.world.generator, seed, config.world.params, config.domain_params,
                config.schedule.levels, self.schedule,
            )
            digest = generated.world.digest()
            prepared.extend(
                PreparedQuery(query=q, world=generated.world, digest=digest) for q in generated.queries.queries
            )
        return prepared

    def tasks(self, prepared: list[PreparedQuery]) -> list[RunTask]:
        return [
            RunTask(
                prepared=p,
                rule=rule,
                domain_id=self.config.domain,
                domain_params=self.config.domain_params,
                schedule=self.schedule,
                budget=self.config.budget,
                record_snapshot=self.config.record_snapshots,
            )
            for p in prepared
            for rule in self.config.rules
        ]

    def run(self, prepared: Optional[list[PreparedQuery]] = None) -> list[RunRecord]:
        """Runs every (query, rule) pair and returns the records sorted by (qid, rule)."""
        prepared = prepared if prepared is not None else self.prepare_queries()
        tasks = self.tasks(prepared)
        logger.info(f"Running {len(tasks)} runs on {self.config.jobs} worker(s)")
        if self.config.jobs == 1:
            records = [run_task(task) for task in tasks]
        else:
            records = []
            with ProcessPoolExecutor(max_workers=self.config.jobs) as pool:
                futures = [pool.submit(run_task, task) for task in tasks]
                for future in as_completed(futures):
                    records.append(future.result())
        records.sort(key=lambda r: (r.qid, r.rule))
        for record in records:
            logger.info(f"{record.qid} {record.rule}: {record.status}, {record.total_expansions} expansions")
        return records

    def write(self, records: list[RunRecord], out: Optional[Path] = None) -> dict[str, Any]:
        """Writes ``runs.csv``, ``summary.json`` and, with snapshots, the per-run records."""
        out = Path(out or self.config.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "runs.csv").write_text(runs_to_csv(records), encoding="utf-8")
        summary = summarize(records, self.config.rules, seed=self.config.seed)
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if self.config.record_snapshots:
            folder = out / "records"
            folder.mkdir(exist_ok=True)
            for record in records:
                (folder / f"{record.qid}__{record.rule}.json").write_text(
                    record.model_dump_json(indent=2), encoding="utf-8"
                )
        logger.info(f"Wrote {len(records)} runs to {out}")
        return summary
