"""SVG rendering of a run on its world.

Draws obstacles, the recorded vertex categories, the goal region, the best
path and a bar marking the expansion count of every emitted path. The
output only depends on the world and the record, so identical inputs give
byte-identical files.
"""

import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined
from pydantic import ValidationError

from config.settings import settings
from functions.world_functions import ElevationMap, OccupancyGrid, World
from models.schemas import KinodynamicCarParams, RunRecord, SearchSnapshot
from utils.exceptions import RenderError

logger = logging.getLogger(__name__)

TEMPLATE_NAME = "search_tree.svg.j2"
BAR_HEIGHT = 24

# drawn back to front
LAYER_STYLES = [
    ("removed", "#d3d3d3", "1"),
    ("pruned", "#e6e6e6", "1"),
    ("invalid", "#d62728", "0.8"),
    ("inactive", "#1f77b4", "0.35"),
    ("active", "#999999", "1"),
    ("expanded", "#555555", "1"),
]


def _fmt(value: float) -> str:
    return f"{value:.3f}"


def _row_runs(mask: np.ndarray) -> list[tuple[int, int, int]]:
    """``(row, first column, run length)`` of every horizontal run of True cells."""
    runs = []
    for row in range(mask.shape[0]):
        line = mask[row]
        col = 0
        while col < line.size:
            if line[col]:
                start = col
                while col < line.size and line[col]:
                    col += 1
                runs.append((row, start, col - start))
            else:
                col += 1
    return runs


class RenderService:
    """Renders run records as SVG through a Jinja2 template.

    Attributes:
        scale: Pixels per metre.
    """

    def __init__(self, templates_dir: Optional[Path] = None, scale: Optional[float] = None):
        self.scale = scale or settings.render_scale
        self.env = Environment(
            loader=FileSystemLoader(str(templates_dir or settings.templates_dir)),
            autoescape=True,
            undefined=StrictUndefined,
            keep_trailing_newline=True,
        )

    def _point(self, x: float, y: float, map_height: float) -> dict[str, str]:
        return {"x": _fmt(x * self.scale), "y": _fmt((map_height - y) * self.scale)}

    def _cells(self, mask: np.ndarray, cell: float, fill: Optional[str] = None) -> list[dict[str, str]]:
        rows = mask.shape[0]
        size = cell * self.scale
        cells = []
        for row, col, length in _row_runs(mask):
            entry = {
                "x": _fmt(col * size),
                "y": _fmt((rows - row - 1) * size),
                "w": _fmt(length * size),
                "h": _fmt(size),
            }
            if fill is not None:
                entry["fill"] = fill
            cells.append(entry)
        return cells

    def _terrain(self, world: ElevationMap) -> list[dict[str, str]]:
        heights = world.heights.astype(np.float64)
        span = float(heights.max() - heights.min())
        levels = np.zeros_like(heights, dtype=int) if span == 0 else np.floor(
            (heights - heights.min()) / span * 7.999
        ).astype(int)
        cells = []
        for level in range(8):
            shade = 255 - level * 16
            cells.extend(self._cells(levels == level, world.cell_size, f"#{shade:02x}{shade:02x}{shade:02x}"))
        return cells

    @staticmethod
    def _obstacle_params(record: RunRecord) -> KinodynamicCarParams:
        try:
            return KinodynamicCarParams.model_validate(record.domain_params or {})
        except ValidationError as e:
            raise RenderError(f"Record {record.qid}/{record.rule} has invalid domain parameters: {e}") from e

    def render(self, world: World, record: RunRecord, obstacle_params: Optional[KinodynamicCarParams] = None) -> str:
        """Renders one record.

        Args:
            world: The map the record was produced on.
            record: The run record; its snapshot and path are optional.
            obstacle_params: Slope/step limits used to draw elevation
                obstacles; by default those of the record's domain parameters.

        Returns:
            The SVG document.

        Raises:
            RenderError: If the record was produced on a different world or
                carries invalid domain parameters.
        """
        digest = world.digest()
        if record.world_digest is not None and record.world_digest != digest:
            raise RenderError(
                f"Record {record.qid}/{record.rule} belongs to world {record.world_digest[:12]}, not {digest[:12]}"
            )
        map_w, map_h = world.extent
        snapshot = record.snapshot or SearchSnapshot()
        if isinstance(world, OccupancyGrid):
            terrain = []
            obstacles = self._cells(world.occupancy, world.cell_size)
            obstacle_fill = "#000000"
        else:
            params = obstacle_params or self._obstacle_params(record)
            terrain = self._terrain(world)
            obstacles = self._cells(world.obstacle_mask(params.max_slope, params.max_step), world.cell_size)
            obstacle_fill = "#7b3294"
        layers = [
            {
                "name": name,
                "fill": fill,
                "opacity": opacity,
                "points": [self._point(x, y, map_h) for x, y in getattr(snapshot, name)],
            }
            for name, fill, opacity in LAYER_STYLES
        ]
        goal = None
        if record.goal is not None:
            goal = {
                **self._point(record.goal.center[0], record.goal.center[1], map_h),
                "r": _fmt(record.goal.radius * self.scale),
            }
        start = self._point(record.start[0], record.start[1], map_h) if record.start is not None else None
        path = None
        if record.path is not None:
            points = [self._point(s[0], s[1], map_h) for s in record.path.states]
            path = " ".join(f"{p['x']},{p['y']}" for p in points)
        width, height = map_w * self.scale, map_h * self.scale
        total = max(record.total_expansions, 1)
        bar = {
            "y": _fmt(height),
            "h": _fmt(BAR_HEIGHT),
            "text_y": _fmt(height + BAR_HEIGHT - 7),
            "marks": [{"x": _fmt(e.expansions / total * width)} for e in record.emitted],
            "label": (
                f"{record.rule} {record.status}: {record.total_expansions} expansions, {len(record.emitted)} paths"
            ),
        }
        counts = snapshot.counts()
        counts["path_states"] = len(record.path.states) if record.path is not None else 0
        template = self.env.get_template(TEMPLATE_NAME)
        return template.render(
            width=_fmt(width),
            height=_fmt(height + BAR_HEIGHT),
            map_width=_fmt(width),
            map_height=_fmt(height),
            title=f"{record.qid} {record.rule}",
            counts_json=json.dumps(counts, sort_keys=True),
            terrain=terrain,
            obstacles=obstacles,
            obstacle_fill=obstacle_fill,
            layers=layers,
            radius=max(1.0, self.scale * 0.05),
            goal=goal,
            start=start,
            path=path,
            bar=bar,
        )

    def render_to_file(
        self,
        world: World,
        record: RunRecord,
        out: Path,
        obstacle_params: Optional[KinodynamicCarParams] = None,
    ) -> Path:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(self.render(world, record, obstacle_params), encoding="utf-8")
        logger.info(f"Rendered {record.qid}/{record.rule} to {out}")
        return out
