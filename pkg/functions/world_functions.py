"""Map representations and their file formats.

Occupancy grids are stored as text (``OCC v1``) so goldens stay diffable;
elevation maps as a text header followed by little-endian float32 heights
(``ELEV v1``). Row ``r`` of either map covers ``y ∈ [r·c, (r+1)·c)`` and
column ``k`` covers ``x ∈ [k·c, (k+1)·c)``. Query sets are CSV files.
"""

import csv
import io
import logging
import math
from pathlib import Path
from typing import Union

import numpy as np

from models.schemas import GoalSet, Query
from utils.exceptions import MapParseError
from utils.utils import digest_bytes, format_float

logger = logging.getLogger(__name__)

OCC_MAGIC = b"OCC v1"
ELEV_MAGIC = b"ELEV v1"
QUERY_COLUMNS = ["qid", "x_s", "y_s", "θ_s", "v_s", "x_g", "y_g", "r_g"]


def _check_cell_size(cell_size: float) -> float:
    cell_size = float(cell_size)
    if not (cell_size > 0.0 and math.isfinite(cell_size)):
        raise ValueError(f"Cell size must be positive and finite, got {cell_size}")
    return cell_size


class OccupancyGrid:
    """Boolean occupancy over a rectangle of square cells.

    Attributes:
        occupancy: Read-only ``(height, width)`` boolean array, True = occupied.
        width: Number of columns.
        height: Number of rows.
        cell_size: Cell edge length in metres.
    """

    def __init__(self, occupancy: np.ndarray, cell_size: float):
        grid = np.array(occupancy, dtype=bool)
        if grid.ndim != 2 or grid.shape[0] == 0 or grid.shape[1] == 0:
            raise ValueError(f"Occupancy must be a non-empty 2-D array, got shape {grid.shape}")
        grid.setflags(write=False)
        self.occupancy = grid
        self.height, self.width = grid.shape
        self.cell_size = _check_cell_size(cell_size)
        self._cells = grid.astype(np.uint8).tobytes()

    @property
    def extent(self) -> tuple[float, float]:
        """Map size ``(width, height)`` in metres."""
        return self.width * self.cell_size, self.height * self.cell_size

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width * self.cell_size and 0.0 <= y < self.height * self.cell_size

    def index(self, x: float, y: float) -> tuple[int, int]:
        """Row and column of the cell containing ``(x, y)``."""
        return int(y // self.cell_size), int(x // self.cell_size)

    def is_free(self, x: float, y: float) -> bool:
        """True if ``(x, y)`` is on the map and its cell is unoccupied."""
        if not self.in_bounds(x, y):
            return False
        row, col = int(y // self.cell_size), int(x // self.cell_size)
        return not self._cells[row * self.width + col]

    def to_bytes(self) -> bytes:
        header = f"OCC v1\n{self.width} {self.height} {format_float(self.cell_size)}\n".encode("ascii")
        rows = [
            "".join("#" if cell else "." for cell in row).encode("ascii") + b"\n"
            for row in self.occupancy
        ]
        return header + b"".join(rows)

    def digest(self) -> str:
        return digest_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "OccupancyGrid":
        """Parses the ``OCC v1`` format.

        Raises:
            MapParseError: On a bad header, a bad cell character, a row of
                the wrong length, truncation or trailing bytes.
        """
        width, height, cell_size, offset = _parse_header(data, OCC_MAGIC)
        grid = np.zeros((height, width), dtype=bool)
        for row in range(height):
            end = data.find(b"\n", offset)
            if end < 0:
                raise MapParseError(f"Truncated occupancy data in row {row}", offset)
            line = data[offset:end]
            if len(line) != width:
                raise MapParseError(
                    f"Row {row} has {len(line)} cells, expected {width}", offset + min(len(line), width)
                )
            for col, char in enumerate(line):
                if char == ord("#"):
                    grid[row, col] = True
                elif char != ord("."):
                    raise MapParseError(f"Unexpected cell character {chr(char)!r}", offset + col)
            offset = end + 1
        if offset != len(data):
            raise MapParseError("Trailing data after the last row", offset)
        return cls(grid, cell_size)


class ElevationMap:
    """Terrain heights over a rectangle of square cells.

    Attributes:
        heights: Read-only ``(height, width)`` float32 array of heights in metres.
        width: Number of columns.
        height: Number of rows.
        cell_size: Cell edge length in metres.
    """

    def __init__(self, heights: np.ndarray, cell_size: float):
        grid = np.array(heights, dtype="<f4")
        if grid.ndim != 2 or grid.shape[0] == 0 or grid.shape[1] == 0:
            raise ValueError(f"Heights must be a non-empty 2-D array, got shape {grid.shape}")
        if not np.all(np.isfinite(grid)):
            raise ValueError("Heights must be finite")
        grid.setflags(write=False)
        self.heights = grid
        self.height, self.width = grid.shape
        self.cell_size = _check_cell_size(cell_size)

    @property
    def extent(self) -> tuple[float, float]:
        return self.width * self.cell_size, self.height * self.cell_size

    def in_bounds(self, x: float, y: float) -> bool:
        return 0.0 <= x < self.width * self.cell_size and 0.0 <= y < self.height * self.cell_size

    def index(self, x: float, y: float) -> tuple[int, int]:
        return int(y // self.cell_size), int(x // self.cell_size)

    def slope(self) -> np.ndarray:
        """Gradient magnitude (rise over run) per cell."""
        heights = self.heights.astype(np.float64)
        if min(heights.shape) < 2:
            return np.zeros_like(heights)
        dy, dx = np.gradient(heights, self.cell_size)
        return np.hypot(dx, dy)

    def step(self) -> np.ndarray:
        """Largest absolute height jump to a 4-neighbour per cell."""
        heights = self.heights.astype(np.float64)
        jumps = np.zeros_like(heights)
        dx = np.abs(np.diff(heights, axis=1))
        dy = np.abs(np.diff(heights, axis=0))
        jumps[:, :-1] = np.maximum(jumps[:, :-1], dx)
        jumps[:, 1:] = np.maximum(jumps[:, 1:], dx)
        jumps[:-1, :] = np.maximum(jumps[:-1, :], dy)
        jumps[1:, :] = np.maximum(jumps[1:, :], dy)
        return jumps

    def obstacle_mask(self, max_slope: float, max_step: float) -> np.ndarray:
        """Cells too steep or with too large a height jump to drive over."""
        mask = (self.slope() > max_slope) | (self.step() > max_step)
        mask.setflags(write=False)
        return mask

    def roughness(self, max_slope: float) -> np.ndarray:
        """Per-cell roughness in ``[0, 1]``: slope relative to the slope limit."""
        rough = np.clip(self.slope() / max_slope, 0.0, 1.0)
        rough.setflags(write=False)
        return rough

    def to_bytes(self) -> bytes:
        header = f"ELEV v1\n{self.width} {self.height} {format_float(self.cell_size)}\n".encode("ascii")
        return header + self.heights.astype("<f4").tobytes(order="C")

    def digest(self) -> str:
        return digest_bytes(self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> "ElevationMap":
        """Parses the ``ELEV v1`` format.

        Raises:
            MapParseError: On a bad header, a payload of the wrong size or a
                non-finite height.
        """
        width, height, cell_size, offset = _parse_header(data, ELEV_MAGIC)
        expected = width * height * 4
        payload = data[offset:]
        if len(payload) < expected:
            raise MapParseError(
                f"Truncated elevation data: {len(payload)} of {expected} bytes", len(data)
            )
        if len(payload) > expected:
            raise MapParseError("Trailing data after the elevation grid", offset + expected)
        heights = np.frombuffer(payload, dtype="<f4").reshape(height, width)
        bad = np.flatnonzero(~np.isfinite(heights))
        if bad.size:
            raise MapParseError("Non-finite height", offset + int(bad[0]) * 4)
        return cls(heights, cell_size)


World = Union[OccupancyGrid, ElevationMap]


def _parse_header(data: bytes, magic: bytes) -> tuple[int, int, float, int]:
    """Parses ``<magic>\\n<width> <height> <cellsize>\\n``.

    Returns:
        Width, height, cell size and the offset of the first payload byte.
    """
    first = data.find(b"\n")
    if first < 0 or data[:first] != magic:
        raise MapParseError(f"Missing {magic.decode()} header", 0)
    second = data.find(b"\n", first + 1)
    if second < 0:
        raise MapParseError("Truncated header", len(data))
    fields = data[first + 1:second].split(b" ")
    if len(fields) != 3:
        raise MapParseError("Header needs '<width> <height> <cellsize>'", first + 1)
    try:
        width, height = int(fields[0]), int(fields[1])
        cell_size = float(fields[2])
    except ValueError:
        raise MapParseError("Malformed dimensions in header", first + 1) from None
    if width <= 0 or height <= 0:
        raise MapParseError("Map dimensions must be positive", first + 1)
    if not (cell_size > 0.0 and math.isfinite(cell_size)):
        raise MapParseError("Cell size must be positive and finite", first + 1)
    return width, height, cell_size, second + 1


def parse_map(data: bytes) -> World:
    """Parses either map format, dispatching on the magic line."""
    if data.startswith(OCC_MAGIC + b"\n"):
        return OccupancyGrid.from_bytes(data)
    if data.startswith(ELEV_MAGIC + b"\n"):
        return ElevationMap.from_bytes(data)
    raise MapParseError("Unknown map format", 0)


def load_map(path: Union[str, Path]) -> World:
    """Reads a map file in either format."""
    return parse_map(Path(path).read_bytes())


def save_map(world: World, path: Union[str, Path]) -> None:
    """Writes a map file; ``load_map`` gives back an identical map."""
    Path(path).write_bytes(world.to_bytes())


def queries_to_csv(queries: list[Query]) -> str:
    """Serializes queries; fields a lower-dimensional domain lacks stay blank."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(QUERY_COLUMNS)
    for query in queries:
        start = list(query.start) + [None] * (4 - len(query.start))
        writer.writerow(
            [
                query.qid,
                *["" if value is None else format_float(value) for value in start],
                format_float(query.goal.center[0]),
                format_float(query.goal.center[1]),
                format_float(query.goal.radius),
            ]
        )
    return buffer.getvalue()


def queries_from_csv(text: str, dimension: int) -> list[Query]:
    """Parses a query CSV for a domain with ``dimension`` state entries.

    Raises:
        MapParseError: On a wrong header, a missing start field or a bad number.
    """
    lines = text.splitlines(keepends=True)
    offsets = [0]
    for line in lines:
        offsets.append(offsets[-1] + len(line.encode("utf-8")))
    rows = list(csv.reader(lines))
    if not rows or rows[0] != QUERY_COLUMNS:
        raise MapParseError(f"Query header must be {','.join(QUERY_COLUMNS)}", 0)
    queries = []
    for number, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != len(QUERY_COLUMNS):
            raise MapParseError(f"Query row has {len(row)} fields", offsets[number])
        try:
            start = tuple(float(v) for v in row[1:1 + dimension])
            goal = GoalSet(center=(float(row[5]), float(row[6])), radius=float(row[7]))
        except ValueError as e:
            raise MapParseError(f"Bad query field: {e}", offsets[number]) from None
        queries.append(Query(qid=row[0], start=start, goal=goal))
    return queries
