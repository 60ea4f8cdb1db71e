"""SHIFT/ACTIVATE strategies for ``ighastar``.

A rule decides, before every pop, which level the next iteration runs at
and whether the current forward search should stop early (SHIFT), and at
the start of every iteration which vertices of Q_v may be expanded
(ACTIVATE).
"""

import logging
import math
import re
from abc import ABC, abstractmethod
from typing import Optional

from functions.search_functions import SearchState

logger = logging.getLogger(__name__)

PLANNER_IDS = ("ha", "iha")


class Rule(ABC):
    """A SHIFT method plus an ACTIVATE method, with private state.

    Attributes:
        name: Identifier used in benchmark records.
    """

    name: str

    def reset(self) -> None:
        """Clears per-query state; called once before a query starts."""

    @abstractmethod
    def shift(self, state: SearchState) -> bool:
        """Sets ``state.next_level`` and returns True to break the forward search."""

    def activate(self, state: SearchState) -> None:
        """Marks a vertex active exactly when it owns its cell at the current level."""
        for vertex in state.open.values():
            vertex.active = state.is_expandable(vertex) and state.owns_cell(vertex)
        state.rebuild_queue()

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.name!r})"


class MonotoneRule(Rule):
    """Always refines: l' = min(l + 1, N), never breaks."""

    def __init__(self, name: str = "Hinf"):
        self.name = name

    def shift(self, state: SearchState) -> bool:
        state.next_level = state.level + 1
        return False


class HysteresisRule(Rule):
    """Drops back to a coarser level after enough evidence of coarse dominance.

    Each time the active head owns its cell at a level coarser than the
    current one, the counter H grows; once it exceeds the threshold the
    search breaks and resumes at that coarser level. H persists across
    iterations and is only reset when it triggers. A trigger that fires
    before the iteration has expanded anything stays pending, and the break
    is repeated until ``ighastar`` can honour it.

    Attributes:
        threshold: H̄, may be ``math.inf``.
        counter: H.
        pending: Target level of a triggered break not yet honoured.
    """

    def __init__(self, threshold: float, name: str = ""):
        if threshold < 0:
            raise ValueError("Hysteresis threshold must be non-negative")
        self.threshold = threshold
        self.counter = 0
        self.pending: Optional[int] = None
        self.name = name or _hysteresis_name(threshold)

    def reset(self) -> None:
        self.counter = 0
        self.pending = None

    def shift(self, state: SearchState) -> bool:
        if self.pending is not None and self.pending >= state.level:
            self.pending = None
        if self.pending is None:
            head = state.peek_active()
            if head is not None and head.dom_level is not None and head.dom_level < state.level:
                self.counter += 1
                if self.counter > self.threshold:
                    self.counter = 0
                    self.pending = head.dom_level
        if self.pending is not None:
            state.next_level = self.pending
            if state.iteration_expansions > 0:
                self.pending = None
            return True
        state.next_level = state.level + 1
        return False

class RestartRule(Rule):
    """Rebuilds iHA* inside ``ighastar``.

    SHIFT always moves one level finer and never breaks; ACTIVATE throws
    away everything and restarts from the root, until the finest level has
    been searched, after which it empties Q_v.
    """

    def __init__(self, name: str = "iha-rule"):
        self.name = name
        self.exhausted = False
        self._started = False

    def reset(self) -> None:
        self.exhausted = False
        self._started = False

    def shift(self, state: SearchState) -> bool:
        if state.level >= state.schedule.finest:
            self.exhausted = True
        state.next_level = state.level + 1
        return False

    def activate(self, state: SearchState) -> None:
        if not self._started:
            self._started = True
            return
        if self.exhausted:
            state.clear_open()
            return
        state.reset(state.start)


def _hysteresis_name(threshold: float) -> str:
    return "Hinf" if math.isinf(threshold) else f"H{int(threshold)}"


_HYSTERESIS = re.compile(r"^H(inf|\d+)$")


def parse_rule(name: str) -> Rule:
    """Builds a rule from its identifier.

    Accepted: ``H<n>`` and ``Hinf`` (hysteresis), ``dsr`` (``H0``),
    ``dr`` (monotone) and ``iha-rule`` (restart).

    Raises:
        ValueError: For an unknown identifier.
    """
    if name == "dr":
        return MonotoneRule(name)
    if name == "dsr":
        return HysteresisRule(0, name)
    if name == "iha-rule":
        return RestartRule(name)
    match = _HYSTERESIS.match(name)
    if match is None:
        raise ValueError(f"Unknown rule {name!r}")
    if match.group(1) == "inf":
        return MonotoneRule(name)
    return HysteresisRule(int(match.group(1)), name)


def is_known(name: str) -> bool:
    """Whether ``name`` is a rule or one of the planner ids ``ha``/``iha``."""
    if name in PLANNER_IDS:
        return True
    try:
        parse_rule(name)
    except ValueError:
        return False
    return True


KNOWN_RULES = ["H0", "H10", "H50", "H250", "H1250", "Hinf", "dsr", "dr", "iha-rule", "ha", "iha"]
