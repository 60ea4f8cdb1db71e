"""Resolution schedules, grid discretization and dominance tables.

A schedule is an ordered list of cell-size vectors, coarsest first. The
dominance table keeps, for every level, the vertex with the lowest
cost-to-come seen in each discretized cell.
"""

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from utils.utils import wrap_angle

CellKey = tuple[int, ...]


@dataclass(slots=True)
class ResolutionSchedule:
    """Ordered cell sizes R_0 … R_N with the current and next level.

    Attributes:
        levels: One cell-size tuple per level, coarsest first.
        angular_dims: State dimensions that are angles and get wrapped
            into ``[0, 2π)`` before discretization.
        current_level: The level l the forward search runs at.
        next_level: The level l' chosen by SHIFT for the next iteration.
    """

    levels: list[tuple[float, ...]]
    angular_dims: tuple[int, ...] = ()
    current_level: int = 0
    next_level: int = 0

    def __post_init__(self) -> None:
        if not self.levels:
            raise ValueError("A resolution schedule needs at least one level")
        width = len(self.levels[0])
        for index, cells in enumerate(self.levels):
            if len(cells) != width:
                raise ValueError(f"Level {index} has {len(cells)} dimensions, expected {width}")
            if any(not (c > 0.0 and math.isfinite(c)) for c in cells):
                raise ValueError(f"Level {index} has a non-positive cell size: {cells}")
            if index and any(c >= p for c, p in zip(cells, self.levels[index - 1])):
                raise ValueError(f"Level {index} is not strictly finer than level {index - 1}")

    @classmethod
    def doubling(
        cls,
        base_cell: Sequence[float],
        levels: int,
        scale: float = 2.0,
        angular_dims: Sequence[int] = (),
    ) -> "ResolutionSchedule":
        """Builds a schedule that divides every cell size by ``scale`` per level.

        Args:
            base_cell: Cell sizes of the coarsest level R_0.
            levels: Number of levels, N + 1.
            scale: Refinement factor between consecutive levels, > 1.

        Returns:
            The schedule with ``levels`` entries.
        """
        if levels < 1:
            raise ValueError("levels must be at least 1")
        if scale <= 1.0:
            raise ValueError("scale must be greater than 1")
        cells = [tuple(float(c) / scale**i for c in base_cell) for i in range(levels)]
        return cls(levels=cells, angular_dims=tuple(angular_dims))

    @property
    def finest(self) -> int:
        """Index N of the finest level."""
        return len(self.levels) - 1

    def cell(self, level: int) -> tuple[float, ...]:
        return self.levels[level]

    def clamp(self, level: int) -> int:
        """Saturates a level index into ``[0, N]``."""
        return max(0, min(level, self.finest))


def discretize(
    state: Sequence[float],
    cells: Sequence[float],
    angular_dims: Sequence[int] = (),
) -> CellKey:
    """Maps a continuous state to its integer grid cell.

    Args:
        state: The state vector.
        cells: Cell size per dimension, all strictly positive.
        angular_dims: Dimensions wrapped into ``[0, 2π)`` first.

    Returns:
        ``floor(state_i / cell_i)`` per dimension.
    """
    key = []
    for dim, (value, size) in enumerate(zip(state, cells)):
        if dim in angular_dims:
            value = wrap_angle(value)
        key.append(math.floor(value / size))
    return tuple(key)


@dataclass(slots=True)
class DominanceResult:
    """Outcome of a dominance check.

    Attributes:
        became_dominant: Whether the vertex now owns its cell.
        displaced: Id of the previous owner if one was evicted.
    """

    became_dominant: bool
    displaced: Optional[int] = None


@dataclass(slots=True)
class DominanceTable:
    """Per-level map from cell key to the id of the dominant vertex.

    Entries are ids, not vertices; ``lookup_g`` resolves an id to its
    cost-to-come and returns ``None`` for vertices that no longer exist,
    which makes their cells count as empty.
    """

    schedule: ResolutionSchedule
    tables: list[dict[CellKey, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.tables:
            self.tables = [{} for _ in self.schedule.levels]

    def key(self, state: Sequence[float], level: int) -> CellKey:
        return discretize(state, self.schedule.levels[level], self.schedule.angular_dims)

    def dominant(self, level: int, key: CellKey) -> Optional[int]:
        return self.tables[level].get(key)

    def clear(self) -> None:
        for table in self.tables:
            table.clear()

    def try_dominate(
        self,
        vertex_id: int,
        g: float,
        state: Sequence[float],
        level: int,
        lookup_g: Callable[[int], Optional[float]],
    ) -> DominanceResult:
        """Claims the vertex's cell at ``level`` if it strictly improves on g.

        Args:
            vertex_id: Id of the candidate vertex.
            g: Its cost-to-come.
            state: Its state.
            level: Resolution level to check at.
            lookup_g: Resolves an occupant id to its g, or None if removed.

        Returns:
            Whether the candidate became dominant, and whom it displaced.
        """
        table = self.tables[level]
        key = self.key(state, level)
        occupant = table.get(key)
        if occupant is not None:
            occupant_g = lookup_g(occupant)
            if occupant_g is None:
                occupant = None
            elif not g < occupant_g:
                return DominanceResult(became_dominant=False)
        table[key] = vertex_id
        return DominanceResult(became_dominant=True, displaced=occupant)

    def owns(self, vertex_id: int, state: Sequence[float], level: int) -> bool:
        """Whether ``vertex_id`` is the recorded occupant of its cell at ``level``."""
        return self.tables[level].get(self.key(state, level)) == vertex_id

    def lowest_owned_level(self, vertex_id: int, state: Sequence[float]) -> Optional[int]:
        """Smallest level index at which the vertex owns its cell (its DomLevel)."""
        for level in range(len(self.tables)):
            if self.owns(vertex_id, state, level):
                return level
        return None

    def snapshot(self) -> list[dict[CellKey, int]]:
        """Copies the tables, mostly for idempotence checks."""
        return [dict(table) for table in self.tables]


DEFAULT_BASE_CELLS: dict[str, tuple[float, ...]] = {
    "r2": (1.0, 1.0),
    "se2": (2.0, 2.0, math.pi / 4.0),
    "kinodynamic": (2.0, 2.0, math.pi / 4.0, 1.0),
}
DEFAULT_ANGULAR_DIMS: dict[str, tuple[int, ...]] = {"r2": (), "se2": (2,), "kinodynamic": (2,)}


def default_schedule(
    domain_id: str,
    levels: int,
    scale: float = 2.0,
    base_cell: Optional[Sequence[float]] = None,
) -> ResolutionSchedule:
    """Doubling schedule for a domain id, from its default coarsest cell unless given."""
    if domain_id not in DEFAULT_BASE_CELLS:
        raise ValueError(f"Unknown domain {domain_id!r}")
    cells = tuple(base_cell) if base_cell is not None else DEFAULT_BASE_CELLS[domain_id]
    if len(cells) != len(DEFAULT_BASE_CELLS[domain_id]):
        raise ValueError(f"Domain {domain_id} needs {len(DEFAULT_BASE_CELLS[domain_id])} cell sizes, got {len(cells)}")
    return ResolutionSchedule.doubling(cells, levels, scale, DEFAULT_ANGULAR_DIMS[domain_id])
