"""Configuration settings for the planners and the benchmark harness.

Values come from the environment (prefix ``IGHASTAR_``) or a ``.env`` file.
Per-experiment parameters live in TOML files, see ``config.experiment``.
"""

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Pydantic BaseSettings class for process-wide configuration.

    Attributes:
        log_level: Root logging level used by the entry points.
        default_jobs: Worker processes used by ``bench`` when no flag is given.
        default_budget: Expansion budget used when a config omits one.
        bootstrap_resamples: Resamples drawn for the summary confidence intervals.
        cost_tolerance: Slack applied by Bound so float rounding along a path
            never removes the ancestor of a retained vertex.
        debug_checks: Assert heuristic consistency on every generated edge.
        templates_dir: Directory holding the Jinja2 SVG template.
        render_scale: Pixels per metre in rendered SVGs.
    """

    log_level: str = "INFO"
    default_jobs: int = 1
    default_budget: int = 100_000
    bootstrap_resamples: int = 10_000
    cost_tolerance: float = 1e-9
    debug_checks: bool = False
    templates_dir: Path = Path(__file__).resolve().parent.parent / "templates"
    render_scale: float = 20.0

    model_config = SettingsConfigDict(
        env_prefix="IGHASTAR_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )


settings = Settings()
