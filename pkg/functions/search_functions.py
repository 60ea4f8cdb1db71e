"""Anytime tree search with adaptive-resolution approximate dominance.

This module holds the search state shared by every planner and the
planners themselves:

* ``hybrid_astar`` searches at one fixed resolution and discards vertices
  that lose the dominance check in their grid cell.
* ``iha_star`` restarts ``hybrid_astar`` at successively finer levels,
  bounding each restart by the best cost found so far.
* ``ighastar`` keeps every vertex it generates, marks the ones that win
  the dominance check at the current level as active, and lets a rule
  decide which resolution to search next and which vertices to reactivate.

Vertices are ordered by ``(f, id)``; ids follow insertion order, so runs are
reproducible and the first forward search of ``ighastar`` expands exactly
the vertices ``hybrid_astar`` expands at the coarsest level.
"""

import heapq
import logging
import math
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Optional

from config.settings import settings
from functions.domain_functions import Domain, Successor
from functions.resolution_functions import DominanceResult, DominanceTable, ResolutionSchedule
from models.schemas import (
    EmittedPath,
    GoalSet,
    PlanPath,
    PlanResult,
    SearchSnapshot,
    SearchStats,
    State,
    TerminalStatus,
)
from utils.exceptions import DomainFault, InvariantViolation, RuleContractViolation

if TYPE_CHECKING:
    from functions.rule_functions import Rule

logger = logging.getLogger(__name__)


@dataclass(slots=True, eq=False)
class Vertex:
    """A search-tree node.

    Attributes:
        id: Insertion sequence number, unique and increasing.
        state: Domain state.
        g: Cost-to-come.
        f: ``g + h(state)``, fixed at insertion.
        parent: Parent vertex id, None for the root.
        primitive: Primitive that produced this vertex from its parent.
        depth: Number of edges from the root.
        active: Eligible for expansion in the current forward search.
        expanded: Already popped and expanded (no longer in Q_v).
        dom_level: Coarsest level at which this vertex owns its cell, if any.
    """

    id: int
    state: State
    g: float
    f: float
    parent: Optional[int] = None
    primitive: Optional[int] = None
    depth: int = 0
    active: bool = False
    expanded: bool = False
    dom_level: Optional[int] = None


class SearchState:
    """The persistent structures of one query.

    ``vertices`` is the arena of every retained vertex, expanded ones
    included, so parent chains stay intact. ``open`` is Q_v: unexpanded
    vertices in ascending id order. Active vertices are additionally kept in
    a lazily cleaned heap keyed by ``(f, id)``; inactive ones are only held
    in ``open``.
    """

    def __init__(
        self,
        schedule: ResolutionSchedule,
        domain: Domain,
        goal: GoalSet,
        record_snapshot: bool = False,
    ):
        self.schedule = replace(schedule, current_level=0, next_level=0)
        self.domain = domain
        self.goal = goal
        self.tables = DominanceTable(self.schedule)
        self.vertices: dict[int, Vertex] = {}
        self.open: dict[int, Vertex] = {}
        self._heap: list[tuple[float, int]] = []
        self.active_count = 0
        self.incumbent: Optional[PlanPath] = None
        self.incumbent_cost = math.inf
        self.expansions = 0
        self.iteration_expansions = 0
        self.iterations = 0
        self.removed_by_bound = 0
        self.pruned = 0
        self.root_id: Optional[int] = None
        self.start: Optional[State] = None
        self._next_id = 0
        self.snapshot = SearchSnapshot() if record_snapshot else None

    @property
    def level(self) -> int:
        return self.schedule.current_level

    @property
    def next_level(self) -> int:
        return self.schedule.next_level

    @next_level.setter
    def next_level(self, level: int) -> None:
        self.schedule.next_level = self.schedule.clamp(level)

    def lookup_g(self, vertex_id: int) -> Optional[float]:
        vertex = self.vertices.get(vertex_id)
        return vertex.g if vertex is not None else None

    def new_vertex(
        self,
        state: State,
        g: float,
        h: float,
        parent: Optional[Vertex] = None,
        primitive: Optional[int] = None,
    ) -> Vertex:
        """Creates a vertex in the arena with the next id; it is not yet in Q_v."""
        vertex = Vertex(
            id=self._next_id,
            state=state,
            g=g,
            f=g + h,
            parent=parent.id if parent is not None else None,
            primitive=primitive,
            depth=parent.depth + 1 if parent is not None else 0,
        )
        self._next_id += 1
        self.vertices[vertex.id] = vertex
        return vertex

    def insert_root(self, start: State) -> Vertex:
        """Places the root in Q_v, dominant at every level and active."""
        root = self.new_vertex(start, 0.0, self.domain.heuristic(start, self.goal))
        self.root_id = root.id
        self.start = start
        for level in range(len(self.schedule.levels)):
            self.tables.try_dominate(root.id, root.g, root.state, level, self.lookup_g)
        root.dom_level = 0
        self.add_open(root, active=True)
        return root

    def add_open(self, vertex: Vertex, active: bool) -> None:
        self.open[vertex.id] = vertex
        vertex.active = False
        if active:
            self.set_active(vertex, True)

    def set_active(self, vertex: Vertex, active: bool) -> None:
        """Moves an unexpanded vertex between the active queue and the inactive store."""
        if vertex.active == active or vertex.expanded:
            return
        vertex.active = active
        if active:
            self.active_count += 1
            heapq.heappush(self._heap, (vertex.f, vertex.id))
        else:
            self.active_count -= 1

    def _clean_head(self) -> None:
        heap = self._heap
        while heap:
            vertex = self.vertices.get(heap[0][1])
            if vertex is not None and vertex.active and not vertex.expanded and vertex.f == heap[0][0]:
                return
            heapq.heappop(heap)

    def peek_active(self) -> Optional[Vertex]:
        """The active vertex with the smallest ``(f, id)``, left in place."""
        self._clean_head()
        return self.vertices[self._heap[0][1]] if self._heap else None

    def pop_active(self) -> Vertex:
        """Removes and returns the head of the active queue from Q_v."""
        self._clean_head()
        if not self._heap:
            raise InvariantViolation("Pop from an empty active queue")
        _, vertex_id = heapq.heappop(self._heap)
        vertex = self.vertices[vertex_id]
        vertex.active = False
        vertex.expanded = True
        self.active_count -= 1
        del self.open[vertex_id]
        return vertex

    def rebuild_queue(self) -> None:
        """Rebuilds the heap from the active flags, dropping stale entries."""
        self._heap = [(v.f, v.id) for v in self.open.values() if v.active]
        heapq.heapify(self._heap)
        self.active_count = len(self._heap)

    def discard(self, vertex: Vertex) -> None:
        """Deletes a vertex from Q_v, the arena and its table cells."""
        if vertex.active and not vertex.expanded:
            self.active_count -= 1
        vertex.active = False
        self.open.pop(vertex.id, None)
        self.vertices.pop(vertex.id, None)
        for level in range(len(self.schedule.levels)):
            table = self.tables.tables[level]
            key = self.tables.key(vertex.state, level)
            if table.get(key) == vertex.id:
                del table[key]

    def reset(self, start: State) -> Vertex:
        """Empties the arena, Q_v and the tables, then inserts a fresh root."""
        self.vertices.clear()
        self.open.clear()
        self._heap = []
        self.active_count = 0
        self.tables.clear()
        return self.insert_root(start)

    def clear_open(self) -> None:
        """Empties Q_v, which ends the search."""
        for vertex in self.open.values():
            vertex.active = False
        self.open.clear()
        self._heap = []
        self.active_count = 0

    def is_expandable(self, vertex: Vertex) -> bool:
        return vertex.f < self.incumbent_cost

    def expandable_count(self) -> int:
        return sum(1 for v in self.open.values() if v.f < self.incumbent_cost)

    def owns_cell(self, vertex: Vertex, level: Optional[int] = None) -> bool:
        """Whether the vertex is v̂(v, R_level), defaulting to the current level."""
        return self.tables.owns(vertex.id, vertex.state, self.level if level is None else level)

    def record(self, category: str, state: State) -> None:
        if self.snapshot is not None:
            getattr(self.snapshot, category).append((round(state[0], 6), round(state[1], 6)))

    def finish_snapshot(self) -> Optional[SearchSnapshot]:
        if self.snapshot is None:
            return None
        for vertex in self.vertices.values():
            if vertex.expanded:
                self.record("expanded", vertex.state)
            elif vertex.active:
                self.record("active", vertex.state)
            else:
                self.record("inactive", vertex.state)
        return self.snapshot


def try_dominate(vertex: Vertex, level: int, state: SearchState) -> DominanceResult:
    """Approximate dominance check of ``vertex`` in its cell at ``level``.

    The vertex takes the cell if the cell is empty or it has strictly lower
    g than the occupant; ties never displace.
    """
    return state.tables.try_dominate(vertex.id, vertex.g, vertex.state, level, state.lookup_g)


def _check_edge(parent: Vertex, successor: Successor, domain: Domain, goal: GoalSet) -> float:
    if not (successor.cost >= domain.epsilon and math.isfinite(successor.cost)):
        raise InvariantViolation(
            f"Edge cost {successor.cost} from vertex {parent.id} is below epsilon {domain.epsilon}"
        )
    h = domain.heuristic(successor.state, goal)
    if settings.debug_checks:
        h_parent = parent.f - parent.g
        if h_parent > successor.cost + h + settings.cost_tolerance:
            raise InvariantViolation(
                f"Inconsistent heuristic on edge {parent.id}: {h_parent} > {successor.cost} + {h}"
            )
    return h


def expand(u: Vertex, domain: Domain, state: SearchState, retain_inactive: bool = True) -> list[int]:
    """Generates the children of ``u`` and inserts them into Q_v.

    Every valid child is checked for dominance at every level of the
    schedule, coarsest first; its ``dom_level`` is the first level it wins.
    It is active if it wins at the current level, and the occupant it
    displaced there is deactivated. With ``retain_inactive`` False (fixed
    resolution search) losing children are discarded and displaced
    unexpanded vertices are deleted instead.

    Args:
        u: The vertex just popped.
        domain: State space.
        state: Search state of the query.
        retain_inactive: Keep children that lose the dominance check.

    Returns:
        Ids of the children inserted into Q_v.

    Raises:
        DomainFault: If the domain cannot expand ``u``.
        InvariantViolation: If an edge costs less than ε.
    """
    if not u.expanded:
        raise InvariantViolation(f"Vertex {u.id} must be popped before it is expanded")
    inserted = []
    current = state.level
    level_count = len(state.schedule.levels)
    for successor in domain.successors(u.state, u.depth):
        if not successor.valid:
            state.record("invalid", successor.state)
            continue
        h = _check_edge(u, successor, domain, state.goal)
        child = state.new_vertex(successor.state, u.g + successor.cost, h, u, successor.primitive)
        wins_current = False
        for level in range(level_count):
            result = try_dominate(child, level, state)
            if not result.became_dominant:
                continue
            if child.dom_level is None:
                child.dom_level = level
            if level == current:
                wins_current = True
            if result.displaced is None:
                continue
            displaced = state.vertices.get(result.displaced)
            if displaced is None:
                continue
            if level == current and not displaced.expanded:
                if retain_inactive:
                    state.set_active(displaced, False)
                else:
                    state.pruned += 1
                    state.record("pruned", displaced.state)
                    state.discard(displaced)
                    continue
            if displaced.dom_level == level:
                displaced.dom_level = state.tables.lowest_owned_level(displaced.id, displaced.state)
        if wins_current or retain_inactive:
            state.add_open(child, active=wins_current)
            inserted.append(child.id)
        else:
            state.pruned += 1
            state.record("pruned", child.state)
            del state.vertices[child.id]
    return inserted


def bound(state: SearchState) -> int:
    """Branch-and-bound: deletes every retained vertex with ``f > w(π̂)``.

    Vertices with ``f = w(π̂)`` stay; the forward search never expands them.
    A small tolerance keeps float rounding along a path from removing an
    ancestor of a retained vertex.

    Returns:
        Number of vertices removed.

    Raises:
        InvariantViolation: If a retained vertex lost its parent.
    """
    if math.isinf(state.incumbent_cost):
        return 0
    limit = state.incumbent_cost + settings.cost_tolerance
    doomed = [v for v in state.vertices.values() if v.f > limit]
    for vertex in doomed:
        state.record("removed", vertex.state)
        state.discard(vertex)
    for vertex in state.vertices.values():
        if vertex.parent is not None and vertex.parent not in state.vertices:
            raise InvariantViolation(f"Bound removed vertex {vertex.parent}, an ancestor of {vertex.id}")
    state.removed_by_bound += len(doomed)
    return len(doomed)


def project(state: SearchState, new_level: int, rebuild: bool = True) -> None:
    """Moves the search to ``new_level`` and recomputes dominance.

    Tables are rebuilt from every retained vertex of the arena, expanded ones
    included, in ascending id order, so ties in g go to the smaller id. An
    expanded vertex keeps its cells and keeps later, costlier arrivals there
    inactive. Every vertex's ``dom_level`` is recomputed.

    The tables kept up during expansion already equal that rebuild as long
    as no vertex has been deleted since, so ``rebuild=False`` only moves the
    level.
    """
    schedule = state.schedule
    schedule.current_level = schedule.clamp(new_level)
    schedule.next_level = schedule.current_level
    if not rebuild:
        return
    state.tables.clear()
    levels = range(len(schedule.levels))
    for vertex in state.vertices.values():
        for level in levels:
            try_dominate(vertex, level, state)
    for vertex in state.vertices.values():
        vertex.dom_level = state.tables.lowest_owned_level(vertex.id, vertex.state)


def activatable_level(state: SearchState) -> Optional[int]:
    """The level to move to when no vertex owns a cell at the current one.

    Scans finer levels first, then coarser ones, for a level at which some
    expandable vertex of Q_v owns its cell. None means no such level exists.
    """
    candidates = [v for v in state.open.values() if state.is_expandable(v)]
    if not candidates:
        return None
    finest = state.schedule.finest
    order = list(range(state.level + 1, finest + 1)) + list(range(state.level - 1, -1, -1))
    for level in order:
        if any(state.owns_cell(v, level) for v in candidates):
            return level
    return None


def emit_path(state: SearchState, goal_vertex: Vertex) -> PlanPath:
    """Walks parent links from a goal vertex back to the root.

    Raises:
        InvariantViolation: If an ancestor is missing from the arena.
    """
    states, primitives = [], []
    vertex = goal_vertex
    while True:
        states.append(vertex.state)
        if vertex.parent is None:
            break
        primitives.append(vertex.primitive)
        parent = state.vertices.get(vertex.parent)
        if parent is None:
            raise InvariantViolation(f"Broken parent chain at vertex {vertex.id}")
        vertex = parent
    if vertex.id != state.root_id:
        raise InvariantViolation(f"Parent chain of vertex {goal_vertex.id} does not end at the root")
    states.reverse()
    primitives.reverse()
    return PlanPath(states=states, primitives=primitives, cost=goal_vertex.g)


def _check_start(domain: Domain, start: State) -> None:
    if not domain.in_bounds(start) or not domain.is_valid(start):
        raise DomainFault(f"Start state {start} is not valid")


def _fixed_resolution_search(
    start: State,
    goal: GoalSet,
    cells: tuple[float, ...],
    domain: Domain,
    budget: int,
    cost_bound: float = math.inf,
    trace: Optional[list] = None,
    iteration: int = 0,
    record_snapshot: bool = False,
) -> tuple[Optional[PlanPath], SearchState, TerminalStatus]:
    schedule = ResolutionSchedule(levels=[cells], angular_dims=domain.angular_dims)
    state = SearchState(schedule, domain, goal, record_snapshot)
    state.insert_root(start)
    while state.active_count:
        u = state.peek_active()
        if u.f >= cost_bound:
            return None, state, TerminalStatus.OPTIMAL_TERMINATED
        if domain.in_goal(u.state, goal):
            return emit_path(state, u), state, TerminalStatus.SOLVED
        if state.expansions >= budget:
            return None, state, TerminalStatus.BUDGET
        state.pop_active()
        state.expansions += 1
        if trace is not None:
            trace.append((iteration, u.state))
        expand(u, domain, state, retain_inactive=False)
    return None, state, TerminalStatus.FAILURE


def hybrid_astar(
    start: State,
    goal: GoalSet,
    level: int,
    schedule: ResolutionSchedule,
    domain: Domain,
    budget: int,
    trace: bool = False,
    record_snapshot: bool = False,
) -> PlanResult:
    """Hybrid A* on the tree at the fixed resolution ``schedule.levels[level]``.

    Args:
        start: Start state.
        goal: Goal set.
        level: Resolution level to search at.
        schedule: Resolution schedule holding the level's cell sizes.
        domain: State space.
        budget: Maximum number of expansions.
        trace: Record the expanded states.
        record_snapshot: Capture vertex categories for rendering.

    Returns:
        The first goal-reaching path, or none with status ``failure`` (queue
        emptied) or ``budget``.
    """
    _check_start(domain, start)
    expansion_trace = [] if trace else None
    path, state, status = _fixed_resolution_search(
        start, goal, schedule.levels[level], domain, budget,
        trace=expansion_trace, record_snapshot=record_snapshot,
    )
    emitted = [EmittedPath(cost=path.cost, expansions=state.expansions, iteration=0)] if path else []
    stats = SearchStats(
        status=status,
        expansions=state.expansions,
        iterations=1,
        emitted=emitted,
        expansions_per_iteration=[state.expansions],
        open_size=len(state.open),
        active_size=state.active_count,
        pruned=state.pruned,
        level_trace=[level],
    )
    return PlanResult(
        path=path, stats=stats, expansion_trace=expansion_trace, snapshot=state.finish_snapshot()
    )


def iha_star(
    start: State,
    goal: GoalSet,
    schedule: ResolutionSchedule,
    domain: Domain,
    budget: int,
    branch_and_bound: bool = True,
    trace: bool = False,
    record_snapshot: bool = False,
) -> PlanResult:
    """Restarts Hybrid A* from scratch at every level, coarsest first.

    With ``branch_and_bound`` a level's search ends as soon as the next
    vertex to pop has ``f ≥ w(π̂)``. Every improving path is logged with the
    cumulative expansion count and the level it was found at.
    """
    _check_start(domain, start)
    best: Optional[PlanPath] = None
    expansions = 0
    emitted: list[EmittedPath] = []
    per_level: list[int] = []
    pruned = 0
    expansion_trace = [] if trace else None
    status = TerminalStatus.OPTIMAL_TERMINATED
    last_state: Optional[SearchState] = None
    for level, cells in enumerate(schedule.levels):
        cost_bound = best.cost if (best is not None and branch_and_bound) else math.inf
        path, state, level_status = _fixed_resolution_search(
            start, goal, cells, domain, budget - expansions, cost_bound,
            trace=expansion_trace, iteration=level, record_snapshot=record_snapshot,
        )
        expansions += state.expansions
        per_level.append(state.expansions)
        pruned += state.pruned
        last_state = state
        if path is not None and (best is None or path.cost < best.cost):
            best = path
            emitted.append(EmittedPath(cost=path.cost, expansions=expansions, iteration=level))
        logger.debug(f"iHA* level {level}: {state.expansions} expansions, status {level_status.value}")
        if level_status is TerminalStatus.BUDGET:
            status = TerminalStatus.BUDGET
            break
    if status is not TerminalStatus.BUDGET and best is None:
        status = TerminalStatus.FAILURE
    stats = SearchStats(
        status=status,
        expansions=expansions,
        iterations=len(per_level),
        emitted=emitted,
        expansions_per_iteration=per_level,
        open_size=len(last_state.open) if last_state else 0,
        active_size=last_state.active_count if last_state else 0,
        pruned=pruned,
        level_trace=list(range(len(per_level))),
    )
    return PlanResult(
        path=best,
        stats=stats,
        expansion_trace=expansion_trace,
        snapshot=last_state.finish_snapshot() if last_state else None,
    )


def ighastar(
    start: State,
    goal: GoalSet,
    schedule: ResolutionSchedule,
    domain: Domain,
    rule: "Rule",
    budget: int,
    trace: bool = False,
    record_snapshot: bool = False,
) -> PlanResult:
    """Incremental Generalized Hybrid A*.

    Each iteration lets the rule ACTIVATE vertices of Q_v, then runs a
    forward search over active vertices that stops when the active set
    empties, the head fails the bound check (``f ≥ w(π̂)``), the head is a
    goal (an improving path is emitted) or SHIFT asks to break. Between
    iterations Bound deletes vertices above the incumbent cost and Project
    moves to the level SHIFT chose.

    When ACTIVATE finds nothing because every expandable vertex of Q_v is
    dominated at the current level, the search moves to the nearest level,
    finer ones first, at which one of them owns its cell; this does not
    count as an iteration. The run ends when no expandable vertex owns its
    cell at any level, or the budget is spent.

    Args:
        start: Start state.
        goal: Goal set.
        schedule: Resolution schedule, coarsest first.
        domain: State space.
        rule: SHIFT/ACTIVATE strategy.
        budget: Maximum number of expansions.
        trace: Record expanded states with their iteration index.
        record_snapshot: Capture vertex categories for rendering.

    Returns:
        The best path, statistics and the emitted-path log.

    Raises:
        RuleContractViolation: If ACTIVATE leaves nothing active while an
            expandable vertex of Q_v owns its cell at the current level.
    """
    _check_start(domain, start)
    state = SearchState(schedule, domain, goal, record_snapshot)
    state.insert_root(start)
    rule.reset()
    emitted: list[EmittedPath] = []
    per_iteration: list[int] = []
    level_trace: list[int] = []
    expansion_trace = [] if trace else None
    status: Optional[TerminalStatus] = None

    while status is None:
        rule.activate(state)
        if state.active_count == 0:
            if any(state.is_expandable(v) and state.owns_cell(v) for v in state.open.values()):
                raise RuleContractViolation(
                    f"Rule {rule.name} activated no vertex while {len(state.open)} remain in Q_v"
                )
            escalate_to = activatable_level(state)
            if escalate_to is None:
                break
            logger.debug(f"No vertex owns a cell at level {state.level}, moving to level {escalate_to}")
            project(state, escalate_to, rebuild=False)
            continue
        level_trace.append(state.level)
        state.iteration_expansions = 0
        shift_consulted = False
        while state.active_count:
            u = state.peek_active()
            if u.f >= state.incumbent_cost:
                break
            if domain.in_goal(u.state, goal):
                state.incumbent = emit_path(state, u)
                state.incumbent_cost = state.incumbent.cost
                emitted.append(
                    EmittedPath(cost=state.incumbent_cost, expansions=state.expansions, iteration=state.iterations)
                )
                logger.debug(f"Iteration {state.iterations}: path of cost {state.incumbent_cost}")
                break
            wants_break = rule.shift(state)
            shift_consulted = True
            if wants_break and state.iteration_expansions > 0:
                break
            if state.expansions >= budget:
                status = TerminalStatus.BUDGET
                break
            if settings.debug_checks and not state.owns_cell(u):
                raise InvariantViolation(f"Popped vertex {u.id} does not own its cell at level {state.level}")
            state.pop_active()
            state.expansions += 1
            state.iteration_expansions += 1
            if expansion_trace is not None:
                expansion_trace.append((state.iterations, u.state))
            expand(u, domain, state)
        if status is not None:
            per_iteration.append(state.iteration_expansions)
            break
        if not shift_consulted and state.active_count:
            rule.shift(state)
        removed = bound(state)
        per_iteration.append(state.iteration_expansions)
        logger.debug(
            f"Iteration {state.iterations} at level {state.level}: {state.iteration_expansions} expansions, "
            f"{removed} removed, next level {state.next_level}"
        )
        state.iterations += 1
        project(state, state.next_level, rebuild=removed > 0)

    if status is None:
        status = TerminalStatus.OPTIMAL_TERMINATED if state.incumbent is not None else TerminalStatus.FAILURE
    stats = SearchStats(
        status=status,
        expansions=state.expansions,
        iterations=state.iterations,
        emitted=emitted,
        expansions_per_iteration=per_iteration,
        open_size=len(state.open),
        active_size=state.active_count,
        removed_by_bound=state.removed_by_bound,
        level_trace=level_trace,
    )
    return PlanResult(
        path=state.incumbent,
        stats=stats,
        expansion_trace=expansion_trace,
        snapshot=state.finish_snapshot(),
    )


def resolution_sweep(
    start: State,
    goal: GoalSet,
    schedule: ResolutionSchedule,
    domain: Domain,
    budget: int,
) -> list[PlanResult]:
    """Runs ``hybrid_astar`` independently at every level of the schedule."""
    return [hybrid_astar(start, goal, level, schedule, domain, budget) for level in range(len(schedule.levels))]
