"""Pydantic models for queries, planner results and benchmark records.

This module defines the models used for validation and serialization
across the planners, the benchmark harness, the CLI and the HTTP routes.
Search-internal structures (vertices, queues) are plain dataclasses in
``functions.search_functions``; everything that crosses a file or network
boundary is defined here.
"""

import math
from enum import Enum
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

State = tuple[float, ...]


class TerminalStatus(str, Enum):
    """How a planner run ended."""

    OPTIMAL_TERMINATED = "optimal-terminated"
    BUDGET = "budget"
    FAILURE = "failure"
    SOLVED = "solved"


class GoalSet(BaseModel):
    """A closed goal region around a center state.

    Attributes:
        center: Goal center; the first two entries are x, y in metres.
        radius: Position radius r_g in metres, > 0.
        heading_tolerance: Optional max heading error in radians; needs a
            heading in ``center[2]``.
        speed_tolerance: Optional max speed error in m/s; needs a speed in
            ``center[3]``.
    """

    model_config = ConfigDict(frozen=True)

    center: State
    radius: float = Field(gt=0.0)
    heading_tolerance: Optional[float] = Field(default=None, ge=0.0)
    speed_tolerance: Optional[float] = Field(default=None, ge=0.0)

    @model_validator(mode="after")
    def _tolerances_have_targets(self) -> "GoalSet":
        if self.heading_tolerance is not None and len(self.center) < 3:
            raise ValueError("heading_tolerance needs a heading in the goal center")
        if self.speed_tolerance is not None and len(self.center) < 4:
            raise ValueError("speed_tolerance needs a speed in the goal center")
        return self


class Query(BaseModel):
    """A single planning query.

    Attributes:
        qid: Query identifier, unique within a query set.
        start: Start state in the domain's state space.
        goal: Goal set.
    """

    model_config = ConfigDict(frozen=True)

    qid: str
    start: State
    goal: GoalSet


class QuerySet(BaseModel):
    """Queries generated for one world.

    Attributes:
        queries: The queries, in generation order.
        seed: Generator seed the set was drawn with.
        constraints: Tag describing the validation applied to every query.
        rejected: Number of draws rejected during generation.
    """

    queries: list[Query]
    seed: int
    constraints: str = ""
    rejected: int = 0


class PlanPath(BaseModel):
    """A root-to-goal path through the search tree.

    Attributes:
        states: Vertex states from the start to the goal vertex.
        primitives: Primitive index of every edge, one fewer than states.
        cost: Sum of edge costs, w(π).
    """

    states: list[State]
    primitives: list[int]
    cost: float

    @model_validator(mode="after")
    def _edges_match_states(self) -> "PlanPath":
        if len(self.primitives) != max(0, len(self.states) - 1):
            raise ValueError("A path needs exactly one primitive per edge")
        return self


class EmittedPath(BaseModel):
    """One improving solution reported by an anytime planner.

    Attributes:
        cost: Cost of the emitted path.
        expansions: Cumulative expansions when it was emitted.
        iteration: Iteration (or resolution level, for iHA*) it was found in.
    """

    cost: float
    expansions: int
    iteration: int


class SearchSnapshot(BaseModel):
    """Vertex positions by category, captured for rendering.

    Attributes:
        expanded: Vertices popped and expanded.
        active: Unexpanded vertices eligible for expansion at the end.
        inactive: Unexpanded, deactivated vertices.
        removed: Vertices deleted by Bound.
        pruned: Children discarded by the dominance check (fixed resolution).
        invalid: Children rejected by the validity checker.
    """

    expanded: list[tuple[float, float]] = Field(default_factory=list)
    active: list[tuple[float, float]] = Field(default_factory=list)
    inactive: list[tuple[float, float]] = Field(default_factory=list)
    removed: list[tuple[float, float]] = Field(default_factory=list)
    pruned: list[tuple[float, float]] = Field(default_factory=list)
    invalid: list[tuple[float, float]] = Field(default_factory=list)

    def counts(self) -> dict[str, int]:
        return {name: len(getattr(self, name)) for name in type(self).model_fields}


class SearchStats(BaseModel):
    """Counters and outcome of one planner run.

    Attributes:
        status: Terminal status.
        expansions: Total vertex expansions (pops).
        iterations: Completed forward-search iterations (levels for iHA*).
        emitted: Every improving path, in emission order.
        expansions_per_iteration: Expansions spent in each iteration.
        open_size: Unexpanded vertices retained at the end.
        active_size: Active vertices at the end.
        removed_by_bound: Vertices deleted by Bound over the run.
        pruned: Children discarded by dominance (fixed-resolution search).
        level_trace: Resolution level of every iteration.
    """

    status: TerminalStatus
    expansions: int = 0
    iterations: int = 0
    emitted: list[EmittedPath] = Field(default_factory=list)
    expansions_per_iteration: list[int] = Field(default_factory=list)
    open_size: int = 0
    active_size: int = 0
    removed_by_bound: int = 0
    pruned: int = 0
    level_trace: list[int] = Field(default_factory=list)


class PlanResult(BaseModel):
    """What every planner returns: the best path plus its statistics.

    Attributes:
        path: Best path found, or None.
        stats: Run statistics.
        expansion_trace: Expanded vertex states as ``(iteration, state)``,
            only when tracing was requested.
        snapshot: Vertex categories for rendering, only when requested.
    """

    path: Optional[PlanPath] = None
    stats: SearchStats
    expansion_trace: Optional[list[tuple[int, State]]] = None
    snapshot: Optional[SearchSnapshot] = None

    @property
    def cost(self) -> float:
        return self.path.cost if self.path is not None else math.inf


class RunRecord(BaseModel):
    """One (query, rule) result row of a benchmark sweep.

    Attributes:
        qid: Query identifier.
        rule: Rule or planner identifier.
        status: Terminal status.
        emitted: Emitted (cost, expansions, iteration) log.
        first_expansions: Expansions at the first emitted path, None if none.
        best_expansions: Expansions at the best emitted path, None if none.
        total_expansions: Expansions at termination.
        first_cost: Cost of the first path, None if none.
        best_cost: Cost of the best path, None if none.
        error: Diagnostic when the planner aborted.
        world_digest: SHA-256 of the serialized world the query ran on.
        start: Start state of the query, kept with snapshots.
        goal: Goal set of the query, kept with snapshots.
        path: Best path, kept when snapshots are recorded.
        snapshot: Vertex categories for rendering.
        domain_params: Domain parameter overrides of the run, kept with
            snapshots so the map is drawn with the limits the planner used.
    """

    qid: str
    rule: str
    status: str
    emitted: list[EmittedPath] = Field(default_factory=list)
    first_expansions: Optional[int] = None
    best_expansions: Optional[int] = None
    total_expansions: int = 0
    first_cost: Optional[float] = None
    best_cost: Optional[float] = None
    error: Optional[str] = None
    world_digest: Optional[str] = None
    start: Optional[State] = None
    goal: Optional[GoalSet] = None
    path: Optional[PlanPath] = None
    snapshot: Optional[SearchSnapshot] = None
    domain_params: Optional[dict] = None

    @field_validator("emitted")
    @classmethod
    def _costs_strictly_decrease(cls, emitted: list[EmittedPath]) -> list[EmittedPath]:
        for before, after in zip(emitted, emitted[1:]):
            if not after.cost < before.cost:
                raise ValueError("Emitted path costs must strictly decrease")
        return emitted


class PointRobotParams(BaseModel):
    """Motion primitives and limits of the R² point robot.

    Attributes:
        step: Step length δ in metres.
        direction_subset: Optional indices of the 8-connected moves to keep
            (E, NE, N, NW, W, SW, S, SE order), for reduced branching factors.
        epsilon: Minimum edge cost ε.
        max_depth: Optional depth limit of the tree.
    """

    step: float = Field(default=0.25, gt=0.0)
    direction_subset: Optional[list[int]] = None
    epsilon: float = Field(default=1e-3, gt=0.0)
    max_depth: Optional[int] = Field(default=None, ge=0)


class KinematicCarParams(BaseModel):
    """Constant-curvature arc primitives of the kinematic car (SE(2)).

    Attributes:
        max_steer: Largest steering angle δ_max in radians.
        arc_length: Arc length s of every primitive in metres.
        wheelbase: Wheelbase L in metres.
        substeps: Integration/collision substeps per primitive.
        footprint_length: Vehicle rectangle length in metres.
        footprint_width: Vehicle rectangle width in metres.
        curvature_penalty: Extra cost factor per unit |δ|/δ_max.
        epsilon: Minimum edge cost ε.
        max_depth: Optional depth limit of the tree.
    """

    max_steer: float = Field(default=0.5, gt=0.0, lt=math.pi / 2)
    arc_length: float = Field(default=2.0, gt=0.0)
    wheelbase: float = Field(default=2.0, gt=0.0)
    substeps: int = Field(default=6, ge=1)
    footprint_length: float = Field(default=1.6, gt=0.0)
    footprint_width: float = Field(default=0.8, gt=0.0)
    curvature_penalty: float = Field(default=0.0, ge=0.0)
    epsilon: float = Field(default=1e-3, gt=0.0)
    max_depth: Optional[int] = Field(default=None, ge=0)


class KinodynamicCarParams(BaseModel):
    """Steering × acceleration primitives of the kinodynamic car (R⁴).

    Attributes:
        max_steer: Largest steering angle in radians.
        acceleration: Magnitude a of the acceleration choices {−a, 0, +a}.
        duration: Duration s of every primitive in seconds.
        substeps: Forward-Euler substeps per primitive.
        v_min: Lowest forward speed in m/s.
        v_max: Highest forward speed in m/s.
        wheelbase: Wheelbase L in metres.
        footprint_length: Vehicle rectangle length in metres.
        footprint_width: Vehicle rectangle width in metres.
        max_slope: Cells steeper than this (rise over run) are obstacles.
        max_step: Cells with a height jump above this (metres) are obstacles.
        roughness_weight: Weight of the terrain roughness penalty in the cost.
        min_progress: Displacement below which a primitive is zero-progress.
        epsilon: Minimum edge cost ε.
        max_depth: Optional depth limit of the tree.
    """

    max_steer: float = Field(default=0.5, gt=0.0, lt=math.pi / 2)
    acceleration: float = Field(default=1.0, gt=0.0)
    duration: float = Field(default=1.0, gt=0.0)
    substeps: int = Field(default=5, ge=1)
    v_min: float = Field(default=0.0, ge=0.0)
    v_max: float = Field(default=4.0, gt=0.0)
    wheelbase: float = Field(default=2.0, gt=0.0)
    footprint_length: float = Field(default=1.6, gt=0.0)
    footprint_width: float = Field(default=0.8, gt=0.0)
    max_slope: float = Field(default=0.6, gt=0.0)
    max_step: float = Field(default=0.4, gt=0.0)
    roughness_weight: float = Field(default=1.0, ge=0.0)
    min_progress: float = Field(default=1e-3, gt=0.0)
    epsilon: float = Field(default=1e-3, gt=0.0)
    max_depth: Optional[int] = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _speed_bounds(self) -> "KinodynamicCarParams":
        if self.v_min > self.v_max:
            raise ValueError("v_min must not exceed v_max")
        if self.epsilon > self.duration:
            raise ValueError("epsilon must not exceed the primitive duration")
        return self


class BottleneckParams(BaseModel):
    """Parameters of the single- and multi-bottleneck R² worlds.

    Attributes:
        width: Map width in metres.
        height: Map height in metres.
        cell_size: Occupancy cell size in metres.
        walls: Number of parallel walls (1 for SB, ≥ 2 for MB).
        wall_thickness: Wall thickness in metres.
        gap_min: Narrowest gap width in metres.
        gap_max: Widest gap width in metres.
        coarsest_cell: Position cell size of R_0, must exceed every gap.
        finest_cell: Position cell size of R_N, must be below every gap.
        corner_fraction: Start/goal corner square size as a map fraction.
        goal_radius: Goal radius r_g in metres.
        queries_per_world: Queries drawn per world.
        validation_budget: Expansion cap of the validating planner runs.
        coarse_failures: Levels, from the coarsest, at which the validating
            ``hybrid_astar`` run must fail.
        max_attempts: Draws tried before giving up.
    """

    width: float = Field(default=16.0, gt=0.0)
    height: float = Field(default=16.0, gt=0.0)
    cell_size: float = Field(default=0.1, gt=0.0)
    walls: int = Field(default=1, ge=1)
    wall_thickness: float = Field(default=1.0, gt=0.0)
    gap_min: float = Field(default=0.3, gt=0.0)
    gap_max: float = Field(default=0.45, gt=0.0)
    coarsest_cell: float = Field(default=1.0, gt=0.0)
    finest_cell: float = Field(default=0.125, gt=0.0)
    corner_fraction: float = Field(default=0.25, gt=0.0, le=0.5)
    goal_radius: float = Field(default=0.75, gt=0.0)
    queries_per_world: int = Field(default=1, ge=1)
    validation_budget: int = Field(default=60_000, ge=1)
    coarse_failures: int = Field(default=1, ge=1)
    max_attempts: int = Field(default=200, ge=1)


class UrbanParams(BaseModel):
    """Parameters of the city-block worlds for the kinematic car.

    Attributes:
        width: Map width in metres.
        height: Map height in metres.
        cell_size: Occupancy cell size in metres.
        block: Nominal city-block edge length in metres.
        street: Street width in metres.
        jitter: Random shrink applied to each block in metres.
        fill: Probability that a block holds a building.
        min_distance: Minimum start-goal distance in metres.
        goal_radius: Goal radius r_g in metres.
        queries_per_world: Queries drawn per world.
        validation_budget: Expansion cap of the validating planner run.
        max_attempts: Draws tried before giving up.
    """

    width: float = Field(default=40.0, gt=0.0)
    height: float = Field(default=40.0, gt=0.0)
    cell_size: float = Field(default=0.25, gt=0.0)
    block: float = Field(default=8.0, gt=0.0)
    street: float = Field(default=4.0, gt=0.0)
    jitter: float = Field(default=2.0, ge=0.0)
    fill: float = Field(default=0.8, ge=0.0, le=1.0)
    min_distance: float = Field(default=20.0, ge=0.0)
    goal_radius: float = Field(default=1.5, gt=0.0)
    queries_per_world: int = Field(default=1, ge=1)
    validation_budget: int = Field(default=20_000, ge=1)
    max_attempts: int = Field(default=200, ge=1)


class OffroadParams(BaseModel):
    """Parameters of the elevation worlds for the kinodynamic car.

    Attributes:
        width: Map width in metres.
        height: Map height in metres.
        cell_size: Elevation cell size in metres.
        hills: Number of smooth Gaussian hills.
        hill_height: Largest hill height in metres.
        hill_radius: Typical hill radius in metres.
        ridges: Number of steep ridges (impassable walls of terrain).
        ridge_height: Ridge height in metres.
        min_distance: Minimum start-goal distance in metres.
        goal_radius: Goal radius r_g in metres.
        queries_per_world: Queries drawn per world.
        validation_budget: Expansion cap of the validating planner run.
        max_attempts: Draws tried before giving up.
    """

    width: float = Field(default=40.0, gt=0.0)
    height: float = Field(default=40.0, gt=0.0)
    cell_size: float = Field(default=0.5, gt=0.0)
    hills: int = Field(default=6, ge=0)
    hill_height: float = Field(default=3.0, ge=0.0)
    hill_radius: float = Field(default=5.0, gt=0.0)
    ridges: int = Field(default=3, ge=0)
    ridge_height: float = Field(default=2.0, ge=0.0)
    min_distance: float = Field(default=20.0, ge=0.0)
    goal_radius: float = Field(default=2.0, gt=0.0)
    queries_per_world: int = Field(default=1, ge=1)
    validation_budget: int = Field(default=20_000, ge=1)
    max_attempts: int = Field(default=200, ge=1)


DomainId = Literal["r2", "se2", "kinodynamic"]
GeneratorId = Literal["sb", "mb", "urban", "offroad"]


class PlanRequest(BaseModel):
    """A request to generate one world and run one planner on it.

    Attributes:
        domain: State space of the query.
        generator: World generator.
        seed: Generator seed.
        rule: Rule or planner identifier.
        budget: Expansion budget.
        levels: Number of resolution levels.
        world_params: Overrides for the generator parameters.
        domain_params: Overrides for the domain parameters.
    """

    domain: DomainId = "r2"
    generator: GeneratorId = "sb"
    seed: int = 0
    rule: str = "H0"
    budget: int = Field(default=20_000, gt=0)
    levels: int = Field(default=4, ge=1)
    world_params: dict = Field(default_factory=dict)
    domain_params: dict = Field(default_factory=dict)
