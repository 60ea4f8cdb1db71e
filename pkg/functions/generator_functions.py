"""Seeded procedural worlds and the query sets drawn in them.

Every generator is a pure function of its seed and parameters: all
randomness comes from one ``numpy.random.Generator`` built from the seed.
Each drawn query is checked with ``hybrid_astar`` before it is accepted;
draws that fail the check are resampled and counted as rejected.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from functions.domain_functions import (
    Domain,
    KinematicCarDomain,
    KinodynamicCarDomain,
    PointRobotDomain,
)
from functions.resolution_functions import ResolutionSchedule, default_schedule
from functions.search_functions import hybrid_astar
from functions.world_functions import ElevationMap, OccupancyGrid, World
from models.schemas import (
    BottleneckParams,
    GoalSet,
    KinematicCarParams,
    KinodynamicCarParams,
    OffroadParams,
    PointRobotParams,
    Query,
    QuerySet,
    State,
    TerminalStatus,
    UrbanParams,
)
from utils.exceptions import WorldGenerationError

logger = logging.getLogger(__name__)

BOTTLENECK_CONSTRAINTS = "ha-fails-coarsest;ha-solves-finest"
PRACTICAL_CONSTRAINTS = "ha-solves-coarsest"


@dataclass
class GeneratedWorld:
    """A generated map together with its validated queries."""

    world: World
    queries: QuerySet


def bottleneck_constraints(params: BottleneckParams) -> str:
    if params.coarse_failures == 1:
        return BOTTLENECK_CONSTRAINTS
    return f"ha-fails-{params.coarse_failures}-coarsest;ha-solves-finest"


def bottleneck_schedule(params: BottleneckParams) -> ResolutionSchedule:
    """Doubling R² schedule from ``coarsest_cell`` down to ``finest_cell``."""
    levels = max(0, round(math.log2(params.coarsest_cell / params.finest_cell))) + 1
    return ResolutionSchedule.doubling((params.coarsest_cell, params.coarsest_cell), levels)


def _check_bottleneck(params: BottleneckParams, walls: int, schedule: ResolutionSchedule) -> None:
    if params.coarse_failures > schedule.finest:
        raise WorldGenerationError(
            f"coarse_failures {params.coarse_failures} leaves no solving level in {len(schedule.levels)} levels"
        )
    if params.gap_min > params.gap_max:
        raise WorldGenerationError(f"gap_min {params.gap_min} exceeds gap_max {params.gap_max}")
    coarsest, finest = min(schedule.levels[0][:2]), max(schedule.levels[-1][:2])
    if params.gap_min <= finest:
        raise WorldGenerationError(f"Gap {params.gap_min} m is not wider than the finest cell {finest} m")
    if params.gap_max >= coarsest:
        raise WorldGenerationError(f"Gap {params.gap_max} m is not narrower than the coarsest cell {coarsest} m")
    if params.gap_max + 2.0 * params.cell_size >= params.height:
        raise WorldGenerationError("Gap does not fit inside the map height")
    spacing = params.width / (walls + 1)
    if params.wall_thickness >= spacing:
        raise WorldGenerationError(f"{walls} walls of thickness {params.wall_thickness} m do not fit the map")


def _wall_positions(params: BottleneckParams, walls: int) -> list[float]:
    return [params.width * (i + 1) / (walls + 1) for i in range(walls)]


def _bottleneck_grid(params: BottleneckParams, walls: int, rng: np.random.Generator) -> OccupancyGrid:
    cols = max(1, round(params.width / params.cell_size))
    rows = max(1, round(params.height / params.cell_size))
    xs = (np.arange(cols) + 0.5) * params.cell_size
    ys = (np.arange(rows) + 0.5) * params.cell_size
    occupancy = np.zeros((rows, cols), dtype=bool)
    half = params.wall_thickness / 2.0
    for x_wall in _wall_positions(params, walls):
        gap = rng.uniform(params.gap_min, params.gap_max)
        margin = gap / 2.0 + params.cell_size
        y_gap = rng.uniform(margin, params.height - margin)
        in_wall = np.abs(xs - x_wall) < half
        in_gap = np.abs(ys - y_gap) < gap / 2.0
        occupancy[np.ix_(~in_gap, in_wall)] = True
    return OccupancyGrid(occupancy, params.cell_size)


def _sample_point(rng: np.random.Generator, x_range: tuple[float, float], y_range: tuple[float, float]) -> State:
    return (float(rng.uniform(*x_range)), float(rng.uniform(*y_range)))


def _validate(
    domain: Domain,
    query: Query,
    schedule: ResolutionSchedule,
    budget: int,
    failing_levels: int,
) -> bool:
    """Checks a query against fixed-resolution search.

    With ``failing_levels`` 0 the coarsest level must solve the query;
    otherwise that many levels from the coarsest must fail and the finest
    must solve it.
    """
    if domain.in_goal(query.start, query.goal):
        return False
    if failing_levels == 0:
        coarse = hybrid_astar(query.start, query.goal, 0, schedule, domain, budget)
        return coarse.stats.status is TerminalStatus.SOLVED
    for level in range(min(failing_levels, schedule.finest)):
        coarse = hybrid_astar(query.start, query.goal, level, schedule, domain, budget)
        if coarse.stats.status is not TerminalStatus.FAILURE:
            return False
    fine = hybrid_astar(query.start, query.goal, schedule.finest, schedule, domain, budget)
    return fine.stats.status is TerminalStatus.SOLVED


def _draw_queries(
    name: str,
    seed: int,
    queries_per_world: int,
    max_attempts: int,
    draw_world: Callable[[], tuple[World, Domain]],
    draw_query: Callable[[World, Domain, str], Optional[Query]],
    accept: Callable[[Domain, Query], bool],
    constraints: str,
) -> GeneratedWorld:
    """Draws a world and its queries until ``queries_per_world`` pass ``accept``.

    Until the first query is accepted every attempt redraws the world as
    well; afterwards the world is kept and only queries are redrawn.
    """
    world: Optional[World] = None
    domain: Optional[Domain] = None
    queries: list[Query] = []
    rejected = 0
    for _ in range(max_attempts):
        if not queries:
            world, domain = draw_world()
        qid = f"{name}-{seed}-{len(queries)}"
        query = draw_query(world, domain, qid)
        if query is not None and accept(domain, query):
            queries.append(query)
            if len(queries) == queries_per_world:
                logger.info(f"Generated {name} world for seed {seed} ({rejected} draws rejected)")
                return GeneratedWorld(
                    world=world,
                    queries=QuerySet(queries=queries, seed=seed, constraints=constraints, rejected=rejected),
                )
            continue
        rejected += 1
        if rejected == max_attempts // 2:
            logger.warning(f"{name} seed {seed}: {rejected} draws rejected so far")
    raise WorldGenerationError(
        f"No valid {name} query set for seed {seed} after {max_attempts} attempts ({rejected} rejected)"
    )


def _gen_bottleneck(
    name: str,
    seed: int,
    params: BottleneckParams,
    walls: int,
    robot: Optional[PointRobotParams],
    schedule: Optional[ResolutionSchedule],
) -> GeneratedWorld:
    schedule = schedule if schedule is not None else bottleneck_schedule(params)
    _check_bottleneck(params, walls, schedule)
    rng = np.random.default_rng(seed)
    positions = _wall_positions(params, walls)
    half = params.wall_thickness / 2.0
    corner_w = params.corner_fraction * params.width
    corner_h = params.corner_fraction * params.height
    edge = params.cell_size
    start_x = (edge, min(corner_w, positions[0] - half) - edge)
    goal_x = (max(params.width - corner_w, positions[-1] + half) + edge, params.width - edge)
    start_y = (params.height - corner_h, params.height - edge)
    goal_y = (edge, corner_h)

    def draw_world() -> tuple[World, Domain]:
        grid = _bottleneck_grid(params, walls, rng)
        return grid, PointRobotDomain(grid, robot)

    def draw_query(world: World, domain: Domain, qid: str) -> Optional[Query]:
        start = _sample_point(rng, start_x, start_y)
        center = _sample_point(rng, goal_x, goal_y)
        if not domain.is_valid(start) or not domain.is_valid(center):
            return None
        return Query(qid=qid, start=start, goal=GoalSet(center=center, radius=params.goal_radius))

    def accept(domain: Domain, query: Query) -> bool:
        return _validate(domain, query, schedule, params.validation_budget, params.coarse_failures)

    return _draw_queries(
        name, seed, params.queries_per_world, params.max_attempts,
        draw_world, draw_query, accept, bottleneck_constraints(params),
    )


def gen_sb(
    seed: int,
    params: Optional[BottleneckParams] = None,
    robot: Optional[PointRobotParams] = None,
    schedule: Optional[ResolutionSchedule] = None,
) -> GeneratedWorld:
    """Single-bottleneck world: one wall across the map with one seeded gap.

    Starts are drawn in the top-left corner and goals in the bottom-right;
    every accepted query is unsolvable by ``hybrid_astar`` at the
    ``params.coarse_failures`` coarsest levels and solvable at the finest.
    Queries are checked against ``schedule``, by default the doubling
    schedule from ``coarsest_cell`` to ``finest_cell``.

    Raises:
        WorldGenerationError: If the gap range does not sit strictly between
            the finest and coarsest cell sizes, or no query passes validation.
    """
    return _gen_bottleneck("sb", seed, params or BottleneckParams(), 1, robot, schedule)


def gen_mb(
    seed: int,
    params: Optional[BottleneckParams] = None,
    robot: Optional[PointRobotParams] = None,
    schedule: Optional[ResolutionSchedule] = None,
) -> GeneratedWorld:
    """Multi-bottleneck world: ``params.walls`` parallel walls, one seeded gap each."""
    params = params or BottleneckParams(walls=3)
    if params.walls < 2:
        raise WorldGenerationError(f"A multi-bottleneck world needs at least 2 walls, got {params.walls}")
    return _gen_bottleneck("mb", seed, params, params.walls, robot, schedule)


def _urban_grid(params: UrbanParams, rng: np.random.Generator) -> OccupancyGrid:
    cols = max(1, round(params.width / params.cell_size))
    rows = max(1, round(params.height / params.cell_size))
    xs = (np.arange(cols) + 0.5) * params.cell_size
    ys = (np.arange(rows) + 0.5) * params.cell_size
    occupancy = np.zeros((rows, cols), dtype=bool)
    pitch = params.block + params.street
    for bx in np.arange(params.street, params.width, pitch):
        for by in np.arange(params.street, params.height, pitch):
            if rng.random() >= params.fill:
                continue
            shrink = rng.uniform(0.0, params.jitter, size=4)
            x0, x1 = bx + shrink[0], bx + params.block - shrink[1]
            y0, y1 = by + shrink[2], by + params.block - shrink[3]
            if x1 <= x0 or y1 <= y0:
                continue
            in_x = (xs >= x0) & (xs < x1)
            in_y = (ys >= y0) & (ys < y1)
            occupancy[np.ix_(in_y, in_x)] = True
    return OccupancyGrid(occupancy, params.cell_size)


def gen_urban(
    seed: int,
    params: Optional[UrbanParams] = None,
    car: Optional[KinematicCarParams] = None,
    levels: int = 4,
    schedule: Optional[ResolutionSchedule] = None,
) -> GeneratedWorld:
    """City blocks separated by streets, for the kinematic car.

    Buildings fill a jittered share of the blocks; queries join two free
    poses at least ``min_distance`` apart and are accepted when
    ``hybrid_astar`` solves them at the coarsest level of ``schedule``, by
    default the ``levels``-level se2 schedule.
    """
    params = params or UrbanParams()
    rng = np.random.default_rng(seed)
    schedule = schedule if schedule is not None else default_schedule("se2", levels)

    def draw_world() -> tuple[World, Domain]:
        grid = _urban_grid(params, rng)
        return grid, KinematicCarDomain(grid, car)

    def draw_query(world: World, domain: Domain, qid: str) -> Optional[Query]:
        start = (*_sample_point(rng, (0.0, params.width), (0.0, params.height)), float(rng.uniform(0, 2 * math.pi)))
        center = _sample_point(rng, (0.0, params.width), (0.0, params.height))
        if math.hypot(start[0] - center[0], start[1] - center[1]) < params.min_distance:
            return None
        if not domain.is_valid(start) or not world.is_free(*center):
            return None
        return Query(qid=qid, start=start, goal=GoalSet(center=center, radius=params.goal_radius))

    def accept(domain: Domain, query: Query) -> bool:
        return _validate(domain, query, schedule, params.validation_budget, failing_levels=0)

    return _draw_queries(
        "urban", seed, params.queries_per_world, params.max_attempts,
        draw_world, draw_query, accept, PRACTICAL_CONSTRAINTS,
    )


def _offroad_heights(params: OffroadParams, rng: np.random.Generator) -> np.ndarray:
    cols = max(1, round(params.width / params.cell_size))
    rows = max(1, round(params.height / params.cell_size))
    xs = (np.arange(cols) + 0.5) * params.cell_size
    ys = (np.arange(rows) + 0.5) * params.cell_size
    gx, gy = np.meshgrid(xs, ys)
    heights = np.zeros((rows, cols))
    for _ in range(params.hills):
        cx, cy = rng.uniform(0, params.width), rng.uniform(0, params.height)
        peak = params.hill_height * rng.uniform(0.3, 1.0)
        radius = params.hill_radius * rng.uniform(0.5, 1.5)
        heights += peak * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * radius**2))
    for _ in range(params.ridges):
        ax, ay = rng.uniform(0, params.width), rng.uniform(0, params.height)
        angle = rng.uniform(0, math.pi)
        length = rng.uniform(0.2, 0.5) * min(params.width, params.height)
        bx, by = ax + length * math.cos(angle), ay + length * math.sin(angle)
        # distance from every cell centre to the segment a-b
        t = np.clip(((gx - ax) * (bx - ax) + (gy - ay) * (by - ay)) / length**2, 0.0, 1.0)
        distance = np.hypot(gx - (ax + t * (bx - ax)), gy - (ay + t * (by - ay)))
        heights += np.where(distance < params.cell_size, params.ridge_height, 0.0)
    return heights


def gen_offroad(
    seed: int,
    params: Optional[OffroadParams] = None,
    car: Optional[KinodynamicCarParams] = None,
    levels: int = 4,
    schedule: Optional[ResolutionSchedule] = None,
) -> GeneratedWorld:
    """Smooth hills crossed by steep ridges, for the kinodynamic car.

    Queries start at rest and are accepted when ``hybrid_astar`` solves them
    at the coarsest level of ``schedule``.
    """
    params = params or OffroadParams()
    rng = np.random.default_rng(seed)
    schedule = schedule if schedule is not None else default_schedule("kinodynamic", levels)

    def draw_world() -> tuple[World, Domain]:
        elevation = ElevationMap(_offroad_heights(params, rng), params.cell_size)
        return elevation, KinodynamicCarDomain(elevation, car)

    def draw_query(world: World, domain: Domain, qid: str) -> Optional[Query]:
        x, y = _sample_point(rng, (0.0, params.width), (0.0, params.height))
        start = (x, y, float(rng.uniform(0, 2 * math.pi)), domain.params.v_min)
        center = _sample_point(rng, (0.0, params.width), (0.0, params.height))
        if math.hypot(start[0] - center[0], start[1] - center[1]) < params.min_distance:
            return None
        if not domain.is_valid(start) or domain.mask[world.index(*center)]:
            return None
        return Query(qid=qid, start=start, goal=GoalSet(center=center, radius=params.goal_radius))

    def accept(domain: Domain, query: Query) -> bool:
        return _validate(domain, query, schedule, params.validation_budget, failing_levels=0)

    return _draw_queries(
        "offroad", seed, params.queries_per_world, params.max_attempts,
        draw_world, draw_query, accept, PRACTICAL_CONSTRAINTS,
    )


GENERATORS = {"sb": gen_sb, "mb": gen_mb, "urban": gen_urban, "offroad": gen_offroad}
