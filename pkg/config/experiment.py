"""Experiment configuration files.

An experiment is described by a TOML file::

    domain = "r2"
    rules = ["H0", "Hinf", "iha"]
    budget = 100000
    query_count = 100
    seed = 0
    out = "results/sb"

    [world]
    generator = "sb"

    [world.params]
    gap_min = 0.3

    [schedule]
    levels = 4
    scale = 2.0

    [domain_params]
    step = 0.25

``[world] generator = "file"`` reads ``map`` and ``queries`` paths instead
of generating worlds.
"""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Literal, Optional, Union

from pydantic import BaseModel, Field, ValidationError, model_validator

from config.settings import settings
from functions.rule_functions import is_known
from models.schemas import DomainId
from utils.exceptions import ConfigError

GENERATOR_DOMAINS = {"sb": "r2", "mb": "r2", "urban": "se2", "offroad": "kinodynamic"}


class WorldConfig(BaseModel):
    """Where queries come from.

    Attributes:
        generator: Generator id, or ``"file"`` to read ``map`` and ``queries``.
        map: Map file path for ``"file"``.
        queries: Query CSV path for ``"file"``.
        params: Generator parameter overrides.
    """

    generator: Literal["sb", "mb", "urban", "offroad", "file"] = "sb"
    map: Optional[Path] = None
    queries: Optional[Path] = None
    params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _file_needs_paths(self) -> "WorldConfig":
        if self.generator == "file" and (self.map is None or self.queries is None):
            raise ValueError("generator 'file' needs both 'map' and 'queries'")
        return self


class ScheduleConfig(BaseModel):
    """Resolution schedule: ``levels`` cells, each ``scale`` times finer."""

    levels: int = Field(default=4, ge=1)
    scale: float = Field(default=2.0, gt=1.0)
    base_cell: Optional[list[float]] = None


class ExperimentConfig(BaseModel):
    """A benchmark sweep.

    Attributes:
        domain: State space id.
        rules: Rule or planner ids to compare.
        budget: Expansion budget per run.
        query_count: Number of worlds generated (one seed each).
        seed: Root seed; world seeds are derived from it.
        jobs: Worker processes.
        out: Output directory.
        record_snapshots: Keep paths and vertex snapshots in the records.
        world: Query source.
        schedule: Resolution schedule.
        domain_params: Domain parameter overrides.
    """

    domain: DomainId = "r2"
    rules: list[str] = Field(default_factory=lambda: ["H0", "Hinf"])
    budget: int = Field(default_factory=lambda: settings.default_budget, gt=0)
    query_count: int = Field(default=10, ge=1)
    seed: int = 0
    jobs: int = Field(default_factory=lambda: settings.default_jobs, ge=1)
    out: Path = Path("results")
    record_snapshots: bool = False
    world: WorldConfig = Field(default_factory=WorldConfig)
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    domain_params: dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _consistent(self) -> "ExperimentConfig":
        if not self.rules:
            raise ValueError("rules must not be empty")
        unknown = [rule for rule in self.rules if not is_known(rule)]
        if unknown:
            raise ValueError(f"Unknown rules: {', '.join(unknown)}")
        if len(set(self.rules)) != len(self.rules):
            raise ValueError("rules must not repeat")
        expected = GENERATOR_DOMAINS.get(self.world.generator)
        if expected is not None and expected != self.domain:
            raise ValueError(f"Generator {self.world.generator} builds worlds for domain {expected}, not {self.domain}")
        return self

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """Returns a validated copy with the non-None overrides applied.

        Raises:
            ConfigError: If the result is invalid.
        """
        updates = {key: value for key, value in overrides.items() if value is not None}
        try:
            return ExperimentConfig.model_validate({**self.model_dump(), **updates})
        except ValidationError as e:
            raise ConfigError(str(e)) from e


def load_experiment(path: Union[str, Path]) -> ExperimentConfig:
    """Reads and validates an experiment TOML file.

    Relative ``map``/``queries`` paths are resolved against the file's folder.

    Raises:
        ConfigError: If the file is unreadable, not TOML, or fails validation.
    """
    path = Path(path)
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"Cannot read config {path}: {e}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config {path} is not valid TOML: {e}") from e
    world = data.get("world")
    if isinstance(world, dict):
        for key in ("map", "queries"):
            if isinstance(world.get(key), str) and not Path(world[key]).is_absolute():
                world[key] = str(path.parent / world[key])
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {path}: {e}") from e
