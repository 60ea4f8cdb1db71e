import math

import numpy as np
import pytest

from functions.domain_functions import PointRobotDomain
from functions.resolution_functions import ResolutionSchedule
from functions.rule_functions import HysteresisRule, MonotoneRule, RestartRule, Rule
from functions.search_functions import (
    SearchState,
    activatable_level,
    bound,
    emit_path,
    hybrid_astar,
    iha_star,
    ighastar,
    project,
    resolution_sweep,
)
from functions.world_functions import OccupancyGrid
from models.schemas import GoalSet, PointRobotParams, TerminalStatus
from tests.conftest import ScriptedDomain
from utils.exceptions import DomainFault, InvariantViolation

FAR_GOAL = GoalSet(center=(100.0, 100.0), radius=0.5)
CHAIN = {
    (0.0, 0.0): [((1.0, 0.0), 1.0)],
    (1.0, 0.0): [((2.0, 0.0), 2.0)],
    (2.0, 0.0): [((3.0, 0.0), 3.0)],
}
CHAIN_GOAL = GoalSet(center=(3.0, 0.0), radius=0.1)


def make_state(levels=((1.0, 1.0),)) -> SearchState:
    return SearchState(ResolutionSchedule(levels=list(levels)), ScriptedDomain({}), FAR_GOAL)


def open_vertex(state, xy, g, h=0.0, parent=None, active=False):
    vertex = state.new_vertex(xy, g, h, parent)
    state.add_open(vertex, active)
    return vertex


class TestBound:
    def test_removes_only_vertices_above_incumbent(self):
        state = make_state()
        root = open_vertex(state, (0.0, 0.0), 0.0, 3.0)
        kept = open_vertex(state, (1.0, 0.0), 5.0, parent=root)
        doomed = open_vertex(state, (2.0, 0.0), 9.0, parent=root)
        state.incumbent_cost = 6.0
        assert bound(state) == 1
        assert doomed.id not in state.vertices and doomed.id not in state.open
        assert {root.id, kept.id} <= set(state.vertices)

    def test_keeps_vertices_equal_to_incumbent(self):
        state = make_state()
        root = open_vertex(state, (0.0, 0.0), 0.0, 6.0)
        open_vertex(state, (1.0, 0.0), 6.0, parent=root)
        state.incumbent_cost = 6.0
        assert bound(state) == 0
        assert state.expandable_count() == 0

    def test_no_incumbent_removes_nothing(self):
        state = make_state()
        open_vertex(state, (0.0, 0.0), 0.0, 50.0)
        assert bound(state) == 0

    def test_removed_ancestor_is_an_invariant_violation(self):
        state = make_state()
        root = open_vertex(state, (0.0, 0.0), 0.0, 3.0)
        middle = open_vertex(state, (1.0, 0.0), 1.0, 8.0, parent=root)
        open_vertex(state, (2.0, 0.0), 2.0, 3.0, parent=middle)
        state.incumbent_cost = 6.0
        with pytest.raises(InvariantViolation):
            bound(state)


class TestProject:
    def test_single_vertex_dominates_every_level(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)])
        root = state.insert_root((0.3, 0.3))
        project(state, 2)
        assert state.level == 2
        assert all(state.owns_cell(root, level) for level in range(3))
        assert root.dom_level == 0

    def test_coarse_cell_splits_at_the_fine_level(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        cheap = open_vertex(state, (0.2, 0.2), 2.0)
        dear = open_vertex(state, (0.7, 0.7), 3.0)
        project(state, 0)
        assert state.tables.dominant(0, (0, 0)) == cheap.id
        assert state.tables.dominant(1, (0, 0)) == cheap.id
        assert state.tables.dominant(1, (1, 1)) == dear.id
        assert cheap.dom_level == 0
        assert dear.dom_level == 1

    def test_rebuild_is_idempotent(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        for index, g in enumerate([4.0, 2.0, 3.0, 2.0]):
            open_vertex(state, (0.1 + 0.3 * index, 0.2), g)
        project(state, 1)
        tables = state.tables.snapshot()
        levels = [v.dom_level for v in state.open.values()]
        project(state, 1)
        assert state.tables.snapshot() == tables
        assert [v.dom_level for v in state.open.values()] == levels

    def test_ties_go_to_the_smaller_id(self):
        state = make_state()
        first = open_vertex(state, (0.2, 0.2), 2.0)
        open_vertex(state, (0.7, 0.7), 2.0)
        project(state, 0)
        assert state.tables.dominant(0, (0, 0)) == first.id

    def test_expanded_vertices_keep_their_cells(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        root = state.insert_root((0.2, 0.2))
        state.pop_active()
        later = open_vertex(state, (0.3, 0.3), 1.0, parent=root)
        beside = open_vertex(state, (0.7, 0.7), 1.0, parent=root)
        project(state, 1)
        assert state.tables.dominant(0, (0, 0)) == root.id
        assert state.tables.dominant(1, (0, 0)) == root.id
        assert later.dom_level is None
        assert beside.dom_level == 1
        MonotoneRule().activate(state)
        assert not later.active and beside.active

    def test_moving_level_without_rebuild_keeps_the_tables(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        open_vertex(state, (0.2, 0.2), 2.0)
        project(state, 0)
        tables = state.tables.snapshot()
        project(state, 1, rebuild=False)
        assert state.level == 1
        assert state.tables.snapshot() == tables

    def test_level_is_clamped(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        state.insert_root((0.0, 0.0))
        project(state, 7)
        assert state.level == 1


class TestActivatableLevel:
    def test_prefers_the_nearest_finer_level(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5), (0.25, 0.25)])
        root = state.insert_root((0.2, 0.2))
        state.pop_active()
        open_vertex(state, (0.7, 0.7), 1.0, parent=root)
        project(state, 0)
        assert activatable_level(state) == 1

    def test_none_when_every_vertex_is_dominated(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        root = state.insert_root((0.2, 0.2))
        state.pop_active()
        open_vertex(state, (0.3, 0.3), 1.0, parent=root)
        project(state, 0)
        assert activatable_level(state) is None

    def test_falls_back_to_coarser_levels(self):
        state = make_state([(1.0, 1.0), (0.5, 0.5)])
        open_vertex(state, (0.2, 0.2), 1.0)
        project(state, 1)
        state.schedule.current_level = 1
        assert activatable_level(state) == 0


class TestEmitPath:
    def test_start_inside_goal_gives_an_empty_path(self):
        domain = ScriptedDomain(CHAIN)
        start_goal = GoalSet(center=(0.0, 0.0), radius=0.5)
        schedule = ResolutionSchedule(levels=[(0.5, 0.5)])
        result = hybrid_astar((0.0, 0.0), start_goal, 0, schedule, domain, 10)
        assert result.path.states == [(0.0, 0.0)]
        assert result.path.primitives == []
        assert result.cost == 0.0
        igha = ighastar((0.0, 0.0), start_goal, schedule, domain, MonotoneRule(), 10)
        assert igha.stats.status is TerminalStatus.OPTIMAL_TERMINATED
        assert igha.cost == 0.0
        assert igha.stats.expansions == 0

    def test_chain_cost_is_the_sum_of_edges(self):
        schedule = ResolutionSchedule(levels=[(0.5, 0.5)])
        result = hybrid_astar((0.0, 0.0), CHAIN_GOAL, 0, schedule, ScriptedDomain(CHAIN), 10)
        assert result.stats.status is TerminalStatus.SOLVED
        assert result.path.states == [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0)]
        assert result.path.primitives == [0, 0, 0]
        assert result.cost == 6.0

    def test_broken_parent_chain(self):
        state = make_state()
        root = state.insert_root((0.0, 0.0))
        child = state.new_vertex((1.0, 0.0), 1.0, 0.0, root)
        del state.vertices[root.id]
        with pytest.raises(InvariantViolation):
            emit_path(state, child)

    def test_path_replays_on_the_domain(self, point_domain):
        goal = GoalSet(center=(7.25, 3.25), radius=0.3)
        schedule = ResolutionSchedule.doubling((1.0, 1.0), 3)
        result = hybrid_astar((1.25, 1.25), goal, 2, schedule, point_domain, 10_000)
        assert point_domain.replay((1.25, 1.25), result.path.primitives) == result.path.states


class TestHybridAStar:
    schedule = ResolutionSchedule(levels=[(0.5, 0.5)])
    goal = GoalSet(center=(4.25, 0.25), radius=0.1)

    def test_straight_line_is_optimal(self, point_domain):
        result = hybrid_astar((0.25, 0.25), self.goal, 0, self.schedule, point_domain, 10_000)
        assert result.stats.status is TerminalStatus.SOLVED
        assert result.cost == pytest.approx(4.0)
        assert len(result.path.states) == 9

    def test_budget(self, point_domain):
        result = hybrid_astar((0.25, 0.25), self.goal, 0, self.schedule, point_domain, 1)
        assert result.stats.status is TerminalStatus.BUDGET
        assert result.stats.expansions == 1
        assert result.path is None

    def test_failure_behind_a_closed_wall(self):
        occupancy = np.zeros((20, 20), dtype=bool)
        occupancy[:, 10] = True
        domain = PointRobotDomain(OccupancyGrid(occupancy, 0.5), PointRobotParams())
        goal = GoalSet(center=(8.25, 0.25), radius=0.1)
        result = hybrid_astar((0.25, 0.25), goal, 0, self.schedule, domain, 100_000)
        assert result.stats.status is TerminalStatus.FAILURE
        assert result.path is None

    def test_invalid_start(self, point_domain):
        with pytest.raises(DomainFault):
            hybrid_astar((-1.0, 0.25), self.goal, 0, self.schedule, point_domain, 10)

    def test_cheap_edge_is_an_invariant_violation(self):
        domain = ScriptedDomain({(0.0, 0.0): [((1.0, 0.0), 1e-6)]})
        with pytest.raises(InvariantViolation):
            hybrid_astar((0.0, 0.0), FAR_GOAL, 0, self.schedule, domain, 10)

    def test_coarse_cells_prune_children(self, point_domain, r2_schedule):
        result = hybrid_astar((0.25, 0.25), self.goal, 0, r2_schedule, point_domain, 10_000)
        assert result.stats.pruned > 0

    def test_snapshot_counts_expansions(self, point_domain):
        result = hybrid_astar((0.25, 0.25), self.goal, 0, self.schedule, point_domain, 10_000, record_snapshot=True)
        assert len(result.snapshot.expanded) == result.stats.expansions


def test_first_iteration_matches_fixed_resolution_search(bottleneck_domain, bottleneck_query, r2_schedule):
    start, goal = bottleneck_query
    ha = hybrid_astar(start, goal, 0, r2_schedule, bottleneck_domain, 100_000, trace=True)
    expected = [s for _, s in ha.expansion_trace]
    for rule in (HysteresisRule(0), MonotoneRule(), RestartRule()):
        result = ighastar(start, goal, r2_schedule, bottleneck_domain, rule, ha.stats.expansions, trace=True)
        assert [s for it, s in result.expansion_trace if it == 0] == expected


def test_single_level_schedule_returns_the_fixed_resolution_path(point_domain):
    schedule = ResolutionSchedule(levels=[(0.5, 0.5)])
    goal = GoalSet(center=(8.25, 6.75), radius=0.3)
    ha = hybrid_astar((1.25, 1.25), goal, 0, schedule, point_domain, 100_000)
    assert ha.stats.status is TerminalStatus.SOLVED
    result = ighastar((1.25, 1.25), goal, schedule, point_domain, MonotoneRule(), ha.stats.expansions)
    first = result.stats.emitted[0]
    assert first.cost == ha.cost
    assert first.expansions == ha.stats.expansions
    assert first.iteration == 0


class StayCoarse(Rule):
    name = "stay-coarse"

    def shift(self, state):
        state.next_level = 0
        return False


def test_vertices_dominated_by_expanded_ones_are_never_expanded():
    domain = ScriptedDomain({(0.2, 0.2): [((0.3, 0.3), 1.0)], (0.3, 0.3): [((5.0, 5.0), 1.0)]})
    schedule = ResolutionSchedule(levels=[(1.0, 1.0)])
    result = ighastar((0.2, 0.2), FAR_GOAL, schedule, domain, MonotoneRule(), 100)
    assert result.stats.status is TerminalStatus.FAILURE
    assert result.stats.expansions == 1
    assert result.stats.iterations == 1


def test_search_moves_finer_when_no_vertex_owns_a_coarse_cell():
    domain = ScriptedDomain({(0.2, 0.2): [((0.7, 0.7), 1.0)], (0.7, 0.7): [((5.0, 5.0), 1.0)]})
    schedule = ResolutionSchedule(levels=[(1.0, 1.0), (0.5, 0.5)])
    result = ighastar((0.2, 0.2), FAR_GOAL, schedule, domain, StayCoarse(), 100)
    assert result.stats.status is TerminalStatus.FAILURE
    assert result.stats.level_trace == [0, 1]
    assert result.stats.expansions_per_iteration == [1, 2]


def test_restart_rule_reproduces_iha_star(bottleneck_domain, bottleneck_query, r2_schedule):
    start, goal = bottleneck_query
    iha = iha_star(start, goal, r2_schedule, bottleneck_domain, 100_000)
    igha = ighastar(start, goal, r2_schedule, bottleneck_domain, RestartRule(), 100_000)
    assert [e.model_dump() for e in igha.stats.emitted] == [e.model_dump() for e in iha.stats.emitted]
    assert igha.cost == iha.cost
    assert igha.stats.status is TerminalStatus.OPTIMAL_TERMINATED


def test_iha_star_reports_levels_as_iterations(bottleneck_domain, bottleneck_query, r2_schedule):
    start, goal = bottleneck_query
    result = iha_star(start, goal, r2_schedule, bottleneck_domain, 100_000)
    assert result.stats.level_trace == [0, 1, 2, 3]
    assert result.stats.status is TerminalStatus.OPTIMAL_TERMINATED
    assert all(0 <= e.iteration <= 3 for e in result.stats.emitted)
    costs = [e.cost for e in result.stats.emitted]
    assert costs == sorted(costs, reverse=True) and len(set(costs)) == len(costs)


def test_branch_and_bound_never_costs_more(bottleneck_domain, bottleneck_query, r2_schedule):
    start, goal = bottleneck_query
    bounded = iha_star(start, goal, r2_schedule, bottleneck_domain, 100_000)
    unbounded = iha_star(start, goal, r2_schedule, bottleneck_domain, 100_000, branch_and_bound=False)
    assert bounded.stats.expansions <= unbounded.stats.expansions
    assert bounded.cost == unbounded.cost


def test_budget_keeps_the_best_path_so_far(point_domain):
    schedule = ResolutionSchedule.doubling((0.5, 0.5), 2)
    goal = GoalSet(center=(8.25, 6.75), radius=0.3)
    result = ighastar((1.25, 1.25), goal, schedule, point_domain, HysteresisRule(0), 200)
    assert result.stats.status is TerminalStatus.BUDGET
    assert result.stats.expansions == 200
    assert result.path is not None
    assert result.cost == result.stats.emitted[-1].cost


def test_runs_are_deterministic(bottleneck_domain, bottleneck_query, r2_schedule):
    start, goal = bottleneck_query
    first = ighastar(start, goal, r2_schedule, bottleneck_domain, HysteresisRule(0), 200, trace=True)
    second = ighastar(start, goal, r2_schedule, bottleneck_domain, HysteresisRule(0), 200, trace=True)
    assert first.model_dump() == second.model_dump()


def test_resolution_sweep_runs_every_level(bottleneck_domain, bottleneck_query, r2_schedule):
    start, goal = bottleneck_query
    results = resolution_sweep(start, goal, r2_schedule, bottleneck_domain, 100_000)
    assert [r.stats.level_trace for r in results] == [[0], [1], [2], [3]]
    assert results[-1].stats.status is TerminalStatus.SOLVED
    assert all(r.stats.status in (TerminalStatus.SOLVED, TerminalStatus.FAILURE) for r in results)
    assert results[-1].cost >= math.hypot(6.0, 5.0) - goal.radius
