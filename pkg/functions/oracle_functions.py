"""Exhaustive enumeration of small motion-primitive trees.

Used as ground truth for the planners on instances small enough to walk
the whole tree: a depth-limited domain and a small branching factor.
"""

import math

from functions.domain_functions import Domain
from models.schemas import GoalSet, State


def full_tree_optimum(domain: Domain, start: State, goal: GoalSet) -> float:
    """Lowest cost of any root-to-goal path in the depth-limited tree.

    A path ends at its first goal vertex. Subtrees whose cost-to-come is
    already no better than the best path found are skipped, which keeps the
    result exact since edge costs are positive.

    Raises:
        ValueError: If the domain has no depth limit.
    """
    if domain.max_depth is None:
        raise ValueError("Exhaustive enumeration needs a depth-limited domain")
    best = math.inf
    stack = [(start, 0.0, 0)]
    while stack:
        state, g, depth = stack.pop()
        if g >= best:
            continue
        if domain.in_goal(state, goal):
            best = g
            continue
        for child, cost in domain.children(state, depth):
            stack.append((child, g + cost, depth + 1))
    return best


def count_vertices_below(domain: Domain, start: State, limit: float) -> int:
    """Number of full-tree vertices, the root included, with ``g < limit``.

    Goal vertices are descended through like any other vertex.
    """
    if not limit > 0.0:
        return 0
    if math.isinf(limit) and domain.max_depth is None:
        raise ValueError("Counting an unbounded tree needs a finite limit or a depth limit")
    count = 0
    stack = [(start, 0.0, 0)]
    while stack:
        state, g, depth = stack.pop()
        count += 1
        for child, cost in domain.children(state, depth):
            if g + cost < limit:
                stack.append((child, g + cost, depth + 1))
    return count
