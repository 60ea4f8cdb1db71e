"""Exceptions raised by the planners, worlds and benchmark harness.

The CLI maps these onto exit codes and the HTTP routes onto status codes,
so every failure a caller can act on has its own type.
"""

from typing import Optional


class PlannerError(Exception):
    """Base class for every error raised by this package."""


class DomainFault(PlannerError):
    """A domain could not evaluate a state (e.g. expansion outside the map)."""


class RuleContractViolation(PlannerError):
    """A rule left the active set empty while expandable vertices remained."""


class InvariantViolation(PlannerError):
    """An internal search invariant was broken."""


class ConfigError(PlannerError):
    """An experiment config or a settings value failed validation."""


class WorldGenerationError(PlannerError):
    """Generator parameters are infeasible or resampling gave up."""


class RenderError(PlannerError):
    """A run record does not belong to the world it is rendered on."""


class MapParseError(PlannerError):
    """A map or query file is malformed.

    Attributes:
        offset: Byte offset into the file at which parsing failed.
    """

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte {offset})"
        super().__init__(message)
