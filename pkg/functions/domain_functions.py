"""State spaces, motion primitives, heuristics and goal tests.

Three domains share one interface: the R² point robot on an occupancy
grid, the kinematic car (SE(2)) on an occupancy grid and the kinodynamic
car (SE(2) plus forward speed) on an elevation map. Worlds are read-only,
so a domain instance can be shared by concurrent queries.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

from models.schemas import (
    GoalSet,
    KinematicCarParams,
    KinodynamicCarParams,
    PointRobotParams,
    State,
)
from functions.world_functions import ElevationMap, OccupancyGrid
from utils.exceptions import DomainFault
from utils.utils import wrap_angle

logger = logging.getLogger(__name__)


@dataclass(frozen=True, slots=True)
class Successor:
    """One child produced by applying a primitive.

    Attributes:
        state: The child state (the last integrated state when invalid).
        cost: Edge cost w(u, v).
        primitive: Index of the primitive that produced it.
        valid: False when the child collides, leaves the map or makes no progress.
    """

    state: State
    cost: float
    primitive: int
    valid: bool = True


def angle_difference(a: float, b: float) -> float:
    """Smallest absolute difference between two angles."""
    diff = abs(wrap_angle(a) - wrap_angle(b))
    return min(diff, 2.0 * math.pi - diff)


def goal_distance(state: Sequence[float], goal: GoalSet) -> float:
    """Euclidean distance from the state's position to the goal region."""
    distance = math.hypot(state[0] - goal.center[0], state[1] - goal.center[1])
    return max(0.0, distance - goal.radius)


def in_goal(state: Sequence[float], goal: GoalSet) -> bool:
    """Closed goal-set membership test.

    Args:
        state: The state to test.
        goal: The goal set.

    Returns:
        True if the position is within r_g (boundary included) and the
        optional heading and speed tolerances hold.
    """
    if math.hypot(state[0] - goal.center[0], state[1] - goal.center[1]) > goal.radius:
        return False
    if goal.heading_tolerance is not None:
        if len(state) < 3 or angle_difference(state[2], goal.center[2]) > goal.heading_tolerance:
            return False
    if goal.speed_tolerance is not None:
        if len(state) < 4 or abs(state[3] - goal.center[3]) > goal.speed_tolerance:
            return False
    return True


def footprint_offsets(length: float, width: float, spacing: float) -> list[tuple[float, float]]:
    """Body-frame sample points covering a rectangle centred on the vehicle.

    Samples are no farther apart than ``spacing`` along either axis.
    """
    nx = max(1, math.ceil(length / spacing))
    ny = max(1, math.ceil(width / spacing))
    return [
        (-length / 2.0 + length * i / nx, -width / 2.0 + width * j / ny)
        for i in range(nx + 1)
        for j in range(ny + 1)
    ]


def footprint_radius(footprint: Sequence[tuple[float, float]]) -> float:
    """Distance of the farthest footprint sample from the vehicle origin."""
    return max(math.hypot(bx, by) for bx, by in footprint)


def sample_count(travel: float, cell_size: float, minimum: int) -> int:
    """Samples needed so consecutive ones are at most half a cell apart over ``travel``."""
    return max(minimum, math.ceil(travel / (cell_size / 2.0)))


class Domain(ABC):
    """Successor function, heuristic, goal test and cost model of a state space.

    Attributes:
        epsilon: Minimum edge cost ε; every valid edge costs at least this.
        dimension: Length of a state vector.
        angular_dims: State dimensions that are angles.
        max_depth: Optional depth limit of the implicit tree.
    """

    epsilon: float
    dimension: int
    angular_dims: tuple[int, ...] = ()
    max_depth: Optional[int] = None

    @property
    @abstractmethod
    def primitive_count(self) -> int:
        """Number of primitives, the branching factor b."""

    @abstractmethod
    def apply(self, state: State, primitive: int) -> Successor:
        """Applies one primitive to a state."""

    @abstractmethod
    def is_valid(self, state: State) -> bool:
        """Whether a state lies inside the map and is collision free."""

    @abstractmethod
    def heuristic(self, state: State, goal: GoalSet) -> float:
        """Admissible and consistent lower bound on the cost to the goal."""

    def in_goal(self, state: State, goal: GoalSet) -> bool:
        return in_goal(state, goal)

    def successors(self, state: State, depth: int = 0) -> list[Successor]:
        """All children of a state in primitive order, invalid ones included.

        Args:
            state: Parent state.
            depth: Depth of the parent in the tree.

        Returns:
            One entry per primitive, or none past the depth limit.

        Raises:
            DomainFault: If the parent state itself is outside the map.
        """
        if self.max_depth is not None and depth >= self.max_depth:
            return []
        if not self.in_bounds(state):
            raise DomainFault(f"Cannot expand state {state}: it lies outside the map")
        return [self.apply(state, primitive) for primitive in range(self.primitive_count)]

    def children(self, state: State, depth: int = 0) -> list[tuple[State, float]]:
        """Valid children as ``(state, edge cost)`` pairs."""
        return [(s.state, s.cost) for s in self.successors(state, depth) if s.valid]

    @abstractmethod
    def in_bounds(self, state: State) -> bool:
        """Whether the state's position lies on the map."""

    def replay(self, start: State, primitives: Sequence[int]) -> list[State]:
        """Re-simulates a primitive sequence from a start state."""
        states = [start]
        for primitive in primitives:
            states.append(self.apply(states[-1], primitive).state)
        return states


class PointRobotDomain(Domain):
    """R² point robot with 8-connected moves on an occupancy grid.

    Moves are E, NE, N, NW, W, SW, S, SE in that order; axis moves have
    length δ and diagonal moves √2·δ, which is also their cost. A move is
    rejected if any sample along the segment, spaced at most half an
    occupancy cell, is occupied or off the map.
    """

    dimension = 2
    NEIGHBOURS = ((1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1))

    def __init__(self, world: OccupancyGrid, params: Optional[PointRobotParams] = None):
        self.world = world
        self.params = params or PointRobotParams()
        self.epsilon = self.params.epsilon
        self.max_depth = self.params.max_depth
        moves = list(range(len(self.NEIGHBOURS)))
        if self.params.direction_subset is not None:
            moves = [m for m in self.params.direction_subset if 0 <= m < len(self.NEIGHBOURS)]
            if not moves:
                raise ValueError("direction_subset selects no moves")
        step = self.params.step
        self._moves = [
            (self.NEIGHBOURS[m][0] * step, self.NEIGHBOURS[m][1] * step, math.hypot(*self.NEIGHBOURS[m]) * step)
            for m in moves
        ]
        if min(m[2] for m in self._moves) < self.epsilon:
            raise ValueError("Step length is below the edge-cost floor epsilon")
        longest = max(m[2] for m in self._moves)
        self._samples = sample_count(longest, world.cell_size, 1)

    @property
    def primitive_count(self) -> int:
        return len(self._moves)

    def in_bounds(self, state: State) -> bool:
        return self.world.in_bounds(state[0], state[1])

    def is_valid(self, state: State) -> bool:
        return self.world.is_free(state[0], state[1])

    def apply(self, state: State, primitive: int) -> Successor:
        dx, dy, cost = self._moves[primitive]
        x, y = state[0], state[1]
        child = (x + dx, y + dy)
        valid = all(
            self.world.is_free(x + dx * k / self._samples, y + dy * k / self._samples)
            for k in range(1, self._samples + 1)
        )
        return Successor(state=child, cost=cost, primitive=primitive, valid=valid)

    def heuristic(self, state: State, goal: GoalSet) -> float:
        return goal_distance(state, goal)


class KinematicCarDomain(Domain):
    """Kinematic bicycle car driving constant-curvature arcs forward.

    Steering angles are {−δ_max, −δ_max/2, 0, δ_max/2, δ_max}; each arc has
    length s and curvature κ = tan(δ)/L. Arcs are integrated in closed form
    at sample points close enough that no footprint point moves more than
    half an occupancy cell between two of them (at least ``substeps``), and
    the footprint rectangle is checked against the occupancy grid at each.
    """

    dimension = 3
    angular_dims = (2,)

    def __init__(self, world: OccupancyGrid, params: Optional[KinematicCarParams] = None):
        self.world = world
        self.params = params or KinematicCarParams()
        self.epsilon = self.params.epsilon
        self.max_depth = self.params.max_depth
        p = self.params
        self.steering = [-p.max_steer, -p.max_steer / 2.0, 0.0, p.max_steer / 2.0, p.max_steer]
        self.curvatures = [math.tan(delta) / p.wheelbase for delta in self.steering]
        self.costs = [
            p.arc_length * (1.0 + p.curvature_penalty * abs(delta) / p.max_steer)
            for delta in self.steering
        ]
        if min(self.costs) < self.epsilon:
            raise ValueError("Arc cost is below the edge-cost floor epsilon")
        self.footprint = footprint_offsets(p.footprint_length, p.footprint_width, world.cell_size / 2.0)
        reach = footprint_radius(self.footprint)
        self._samples = [
            sample_count(p.arc_length * (1.0 + abs(curvature) * reach), world.cell_size, p.substeps)
            for curvature in self.curvatures
        ]

    @property
    def primitive_count(self) -> int:
        return len(self.steering)

    def in_bounds(self, state: State) -> bool:
        return self.world.in_bounds(state[0], state[1])

    def footprint_free(self, x: float, y: float, theta: float) -> bool:
        c, s = math.cos(theta), math.sin(theta)
        return all(self.world.is_free(x + c * bx - s * by, y + s * bx + c * by) for bx, by in self.footprint)

    def is_valid(self, state: State) -> bool:
        return self.footprint_free(state[0], state[1], state[2])

    @staticmethod
    def arc(x: float, y: float, theta: float, curvature: float, length: float) -> State:
        """Closed-form end pose of a constant-curvature arc."""
        if abs(curvature) < 1e-12:
            return (x + length * math.cos(theta), y + length * math.sin(theta), wrap_angle(theta))
        turn = curvature * length
        dx = math.sin(turn) / curvature
        dy = (1.0 - math.cos(turn)) / curvature
        c, s = math.cos(theta), math.sin(theta)
        return (x + c * dx - s * dy, y + s * dx + c * dy, wrap_angle(theta + turn))

    def apply(self, state: State, primitive: int) -> Successor:
        x, y, theta = state[0], state[1], state[2]
        curvature = self.curvatures[primitive]
        samples = self._samples[primitive]
        valid = True
        pose = state
        for k in range(1, samples + 1):
            pose = self.arc(x, y, theta, curvature, self.params.arc_length * k / samples)
            if not self.footprint_free(*pose):
                valid = False
                break
        return Successor(state=pose, cost=self.costs[primitive], primitive=primitive, valid=valid)

    def heuristic(self, state: State, goal: GoalSet) -> float:
        return goal_distance(state, goal)


class KinodynamicCarDomain(Domain):
    """No-side-slip car with speed as a state, driving over an elevation map.

    Primitives are the cross product of five steering angles with the
    accelerations {−a, 0, +a}, applied for ``duration`` seconds with
    forward-Euler substeps, at least ``substeps`` of them and enough that no
    footprint point moves more than half an elevation cell per substep.
    Speed is clamped to ``[v_min, v_max]``.
    Displacement uses the speed at the start of each substep, so faster
    parents reach farther children. Edge cost is time, scaled up by the
    mean terrain roughness under the primitive.
    """

    dimension = 4
    angular_dims = (2,)

    def __init__(self, world: ElevationMap, params: Optional[KinodynamicCarParams] = None):
        self.world = world
        self.params = params or KinodynamicCarParams()
        self.epsilon = self.params.epsilon
        self.max_depth = self.params.max_depth
        p = self.params
        steering = [-p.max_steer, -p.max_steer / 2.0, 0.0, p.max_steer / 2.0, p.max_steer]
        accelerations = [-p.acceleration, 0.0, p.acceleration]
        self.controls = [(delta, accel) for delta in steering for accel in accelerations]
        self.footprint = footprint_offsets(p.footprint_length, p.footprint_width, world.cell_size / 2.0)
        self._turn_reach = footprint_radius(self.footprint) * math.tan(p.max_steer) / p.wheelbase
        self.mask = world.obstacle_mask(p.max_slope, p.max_step)
        self.roughness = world.roughness(p.max_slope)

    @property
    def primitive_count(self) -> int:
        return len(self.controls)

    def in_bounds(self, state: State) -> bool:
        return self.world.in_bounds(state[0], state[1])

    def footprint_free(self, x: float, y: float, theta: float) -> bool:
        c, s = math.cos(theta), math.sin(theta)
        for bx, by in self.footprint:
            px, py = x + c * bx - s * by, y + s * bx + c * by
            if not self.world.in_bounds(px, py) or self.mask[self.world.index(px, py)]:
                return False
        return True

    def is_valid(self, state: State) -> bool:
        return self.footprint_free(state[0], state[1], state[2]) and (
            self.params.v_min <= state[3] <= self.params.v_max
        )

    def apply(self, state: State, primitive: int) -> Successor:
        p = self.params
        delta, accel = self.controls[primitive]
        x, y, theta, v = state
        top_speed = min(p.v_max, max(v, v + accel * p.duration))
        substeps = sample_count(top_speed * p.duration * (1.0 + self._turn_reach), self.world.cell_size, p.substeps)
        dt = p.duration / substeps
        x0, y0 = x, y
        valid = True
        roughness = 0.0
        for _ in range(substeps):
            x += v * math.cos(theta) * dt
            y += v * math.sin(theta) * dt
            theta += v * math.tan(delta) / p.wheelbase * dt
            v = min(p.v_max, max(p.v_min, v + accel * dt))
            if not self.footprint_free(x, y, theta):
                valid = False
                break
            roughness += float(self.roughness[self.world.index(x, y)])
        child = (x, y, wrap_angle(theta), v)
        if valid and math.hypot(x - x0, y - y0) < p.min_progress:
            valid = False
        cost = p.duration * (1.0 + p.roughness_weight * roughness / substeps)
        return Successor(state=child, cost=cost, primitive=primitive, valid=valid)

    def heuristic(self, state: State, goal: GoalSet) -> float:
        return goal_distance(state, goal) / self.params.v_max
