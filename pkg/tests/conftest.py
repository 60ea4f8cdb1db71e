"""Shared fixtures: small worlds, a scripted tree domain and search helpers."""

from typing import Optional

import numpy as np
import pytest

from functions.domain_functions import Domain, PointRobotDomain, Successor
from functions.resolution_functions import ResolutionSchedule
from functions.world_functions import OccupancyGrid
from models.schemas import GoalSet, PointRobotParams, State


class ScriptedDomain(Domain):
    """A domain whose tree is spelled out as ``state -> [(child, cost), ...]``."""

    dimension = 2

    def __init__(self, edges: dict, h: Optional[dict] = None, epsilon: float = 1e-3):
        self.edges = edges
        self.h = h or {}
        self.epsilon = epsilon
        self.max_depth = None

    @property
    def primitive_count(self) -> int:
        return max((len(children) for children in self.edges.values()), default=0)

    def apply(self, state: State, primitive: int) -> Successor:
        children = self.edges.get(tuple(state), [])
        if primitive >= len(children):
            return Successor(state=state, cost=1.0, primitive=primitive, valid=False)
        child, cost = children[primitive]
        return Successor(state=child, cost=cost, primitive=primitive)

    def is_valid(self, state: State) -> bool:
        return True

    def in_bounds(self, state: State) -> bool:
        return True

    def heuristic(self, state: State, goal: GoalSet) -> float:
        return self.h.get(tuple(state), 0.0)


def open_grid(width: int = 20, height: int = 20, cell: float = 0.5) -> OccupancyGrid:
    return OccupancyGrid(np.zeros((height, width), dtype=bool), cell)


def bottleneck_grid() -> OccupancyGrid:
    """8 m × 8 m, cell 0.1 m, a 1 m wall at x ∈ [3.5, 4.5) with a gap at y ∈ [4.0, 4.6)."""
    occupancy = np.zeros((80, 80), dtype=bool)
    occupancy[:, 35:45] = True
    occupancy[40:46, 35:45] = False
    return OccupancyGrid(occupancy, 0.1)


@pytest.fixture
def grid() -> OccupancyGrid:
    return open_grid()


@pytest.fixture
def point_domain(grid: OccupancyGrid) -> PointRobotDomain:
    return PointRobotDomain(grid, PointRobotParams(step=0.5))


@pytest.fixture
def bottleneck_domain() -> PointRobotDomain:
    return PointRobotDomain(bottleneck_grid(), PointRobotParams(step=0.5))


@pytest.fixture
def bottleneck_query() -> tuple[State, GoalSet]:
    return (1.1, 6.1), GoalSet(center=(7.1, 1.1), radius=0.5)


@pytest.fixture
def r2_schedule() -> ResolutionSchedule:
    return ResolutionSchedule.doubling((1.0, 1.0), 4)
