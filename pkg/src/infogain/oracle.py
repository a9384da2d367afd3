"""Ground-truth oracles: exhaustive optimum and submodularity auditing.

Both work directly off the public measure, so they are independent of the
greedy engine's incremental bookkeeping — that is the point: the engine is
judged against these, never against itself.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from ._validation import check_budget
from .errors import ValidationError
from .graph import LabelGraph
from .measure import InfoFunction, propagate, raw_info
from .pool import DataPoint, Pool
from .selection import _resolve_points

logger = logging.getLogger(__name__)

MAX_BRUTE_FORCE_SUBSETS = 1_000_000


@dataclass(slots=True)
class BruteForceResult:
    """Exhaustive optimum over all fixed-size subsets."""

    indices: tuple[int, ...]
    ids: tuple[str, ...]
    value: float
    n_subsets: int


@dataclass(slots=True)
class SubmodularityResult:
    """Outcome of a randomized diminishing-returns audit.

    ``worst_margin`` is the smallest observed value of
    ``gain(small_set, e) - gain(large_set, e)``; negative beyond the
    tolerance means a violation.  A violation makes ``passed`` false — it
    does not raise, so sweeps can report it.
    """

    passed: bool
    worst_margin: float
    n_trials: int
    tolerance: float
    worst_case: dict | None = None


def _propagated_contributions(
    points: list[DataPoint], graph: LabelGraph
) -> np.ndarray:
    """(n, K) matrix of per-point propagated information vectors."""
    out = np.empty((len(points), graph.n_labels), dtype=np.float64)
    for i, point in enumerate(points):
        out[i] = propagate(graph, raw_info(point, graph.n_labels))
    return out


def brute_force_optimum(
    pool: Pool | Iterable[DataPoint],
    graph: LabelGraph,
    fn: InfoFunction,
    budget: int,
    *,
    max_subsets: int = MAX_BRUTE_FORCE_SUBSETS,
) -> BruteForceResult:
    """Enumerate every size-``budget`` subset and return the best.

    Refuses instances with more than ``max_subsets`` subsets.  Ties on the
    objective resolve to the lexicographically smallest sorted id tuple, so
    the result is unique and reproducible.
    """
    points = _resolve_points(pool)
    budget = check_budget(budget, len(points))
    n_subsets = math.comb(len(points), budget)
    if n_subsets > max_subsets:
        raise ValidationError(
            f"{n_subsets} subsets exceed the exhaustive-search guard ({max_subsets}); "
            "this oracle is for desk-scale instances"
        )
    contributions = _propagated_contributions(points, graph)
    best_value = -np.inf
    best_ids: tuple[str, ...] | None = None
    best_indices: tuple[int, ...] | None = None
    for subset in combinations(range(len(points)), budget):
        value = float(np.sum(fn.value(contributions[list(subset)].sum(axis=0))))
        if value > best_value:
            replace = True
        elif value == best_value:
            replace = tuple(sorted(points[i].id for i in subset)) < best_ids
        else:
            replace = False
        if replace:
            best_value = value
            best_indices = subset
            best_ids = tuple(sorted(points[i].id for i in subset))
    return BruteForceResult(
        indices=best_indices, ids=best_ids, value=best_value, n_subsets=n_subsets
    )


def check_submodularity(
    pool: Pool | Iterable[DataPoint],
    graph: LabelGraph,
    fn: InfoFunction,
    *,
    trials: int = 500,
    seed: int = 0,
    tolerance: float = 1e-9,
) -> SubmodularityResult:
    """Randomized audit of diminishing returns.

    Each trial draws nested subsets ``small ⊆ large`` and a point ``e``
    outside ``large``, then checks that adding ``e`` to the smaller set
    gains at least as much as adding it to the larger one.
    """
    points = _resolve_points(pool)
    n = len(points)
    if n < 2:
        raise ValidationError("submodularity audit needs at least 2 points")
    if n > 50:
        raise ValidationError(
            f"submodularity audit is meant for pools of at most 50 points, got {n}"
        )
    contributions = _propagated_contributions(points, graph)
    rng = np.random.default_rng(seed)
    worst_margin = np.inf
    worst_case: dict | None = None

    for trial in range(trials):
        e = int(rng.integers(n))
        large = rng.random(n) < rng.random()
        large[e] = False
        small = large & (rng.random(n) < rng.random())
        extra = contributions[e]

        sum_small = contributions[small].sum(axis=0)
        sum_large = contributions[large].sum(axis=0)
        gain_small = float(np.sum(fn.value(sum_small + extra)) - np.sum(fn.value(sum_small)))
        gain_large = float(np.sum(fn.value(sum_large + extra)) - np.sum(fn.value(sum_large)))
        margin = gain_small - gain_large
        if margin < worst_margin:
            worst_margin = margin
            worst_case = {
                "trial": trial,
                "point": points[e].id,
                "small_size": int(small.sum()),
                "large_size": int(large.sum()),
                "gain_small": gain_small,
                "gain_large": gain_large,
            }
    passed = bool(worst_margin >= -tolerance)
    if not passed:
        logger.warning(
            "submodularity violated: margin %.3e below -%g (%s)",
            worst_margin,
            tolerance,
            worst_case,
        )
    return SubmodularityResult(
        passed=passed,
        worst_margin=float(worst_margin),
        n_trials=trials,
        tolerance=tolerance,
        worst_case=worst_case,
    )
