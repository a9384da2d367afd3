"""Reference selectors used for comparisons.

These deliberately stay minimal: a seeded uniform-random pick, a static
quality ranking, and a quality/diversity facility-location greedy over
dense point embeddings.  All three expose the same fit/transform surface
as the graph selector so they can be swapped into comparisons.
"""

from __future__ import annotations

import heapq
import logging
import time
from typing import Iterable

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_budget, check_matrix, _check_finite_number
from .errors import ValidationError
from .pool import DataPoint, Pool
from .selection import _resolve_points

logger = logging.getLogger(__name__)


class _PoolSelector(BaseEstimator):
    """Shared fitted-attribute plumbing for the baseline selectors."""

    def _finalize(self, points: list[DataPoint], indices: list[int], started: float):
        self.selected_indices_ = indices
        self.selected_ids_ = [points[i].id for i in indices]
        self.selected_points_ = [points[i] for i in indices]
        self.wall_time_s_ = time.perf_counter() - started
        return self

    def transform(self, pool: Pool | Iterable[DataPoint]) -> list[DataPoint]:
        if not hasattr(self, "selected_ids_"):
            raise ValidationError(f"this {type(self).__name__} is not fitted yet")
        by_id = {p.id: p for p in _resolve_points(pool)}
        return [by_id[i] for i in self.selected_ids_ if i in by_id]

    def fit_transform(self, pool, **fit_params):
        return self.fit(pool, **fit_params).transform(pool)


class RandomSelector(_PoolSelector):
    """Uniform selection without replacement; seeded and reproducible."""

    def __init__(self, budget: int | None = None, seed: int = 42):
        self.budget = budget
        self.seed = seed

    def fit(self, pool: Pool | Iterable[DataPoint]):
        started = time.perf_counter()
        points = _resolve_points(pool)
        budget = check_budget(self.budget, len(points))
        rng = np.random.default_rng(self.seed)
        indices = rng.choice(len(points), size=budget, replace=False)
        return self._finalize(points, [int(i) for i in indices], started)


class TopQualitySelector(_PoolSelector):
    """Static top-N by quality (ties broken by smaller pool index)."""

    def __init__(self, budget: int | None = None):
        self.budget = budget

    def fit(self, pool: Pool | Iterable[DataPoint]):
        started = time.perf_counter()
        points = _resolve_points(pool)
        budget = check_budget(self.budget, len(points))
        qualities = np.fromiter((p.quality for p in points), dtype=np.float64, count=len(points))
        order = np.argsort(-qualities, kind="stable")
        return self._finalize(points, [int(i) for i in order[:budget]], started)


class FacilityLocationSelector(_PoolSelector):
    """Greedy quality/diversity selection over dense point embeddings.

    Maximizes ``qw * sum(quality of selected) + (1 - qw) * sum_j max(0,
    max_i cos(x_i, x_j))`` with lazy greedy.  Every candidate evaluation
    needs similarities against the whole pool, so the run is quadratic in
    pool size overall — the price of pairwise diversity scoring, and the
    contrast the label-graph selector is measured against.

    Stale heap entries are refreshed through a single matrix product per
    block, with the block growing geometrically up to ``refresh_batch``
    while the heap top stays stale — one cheap refresh when scores are
    nearly current, full-width products when the whole heap has gone stale.
    Batching changes how fast evaluations run, never which indices win,
    because refreshed scores are exact either way.

    Embeddings can be passed at construction or to ``fit``; rows must align
    with the pool's points.
    """

    def __init__(
        self,
        budget: int | None = None,
        embeddings: np.ndarray | None = None,
        quality_weight: float = 0.5,
        block_rows: int = 512,
        refresh_batch: int = 512,
    ):
        self.budget = budget
        self.embeddings = embeddings
        self.quality_weight = quality_weight
        self.block_rows = block_rows
        self.refresh_batch = refresh_batch

    def fit(self, pool: Pool | Iterable[DataPoint], embeddings: np.ndarray | None = None):
        started = time.perf_counter()
        points = _resolve_points(pool)
        n = len(points)
        budget = check_budget(self.budget, n)
        qw = _check_finite_number("quality_weight", self.quality_weight)
        if not 0.0 <= qw <= 1.0:
            raise ValidationError(f"quality_weight must lie in [0, 1], got {qw}")
        raw = embeddings if embeddings is not None else self.embeddings
        if raw is None:
            raise ValidationError("FacilityLocationSelector needs point embeddings")
        matrix = check_matrix("point embeddings", raw, n_rows=n)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        if np.any(norms == 0.0):
            raise ValidationError("point embeddings contain an all-zero row")
        unit = matrix / norms
        qualities = np.fromiter((p.quality for p in points), dtype=np.float64, count=n)

        covered = np.zeros(n, dtype=np.float64)
        diversity_weight = 1.0 - qw

        # Initial coverage gains in row blocks (the only full pairwise pass).
        # One reusable buffer keeps the resident footprint at a single block.
        block = max(1, int(self.block_rows))
        initial = np.empty(n, dtype=np.float64)
        buf = np.empty((min(block, n), n), dtype=np.float64)
        for s in range(0, n, block):
            e = min(s + block, n)
            sims = np.matmul(unit[s:e], unit.T, out=buf[: e - s])
            np.maximum(sims, 0.0, out=sims)
            initial[s:e] = sims.sum(axis=1)
        del buf
        scores = qw * qualities + diversity_weight * initial
        n_evaluations = n

        heap = [(-float(scores[i]), -float(qualities[i]), i, 0) for i in range(n)]
        heapq.heapify(heap)
        indices: list[int] = []
        gains: list[float] = []
        refresh = max(1, int(self.refresh_batch))
        cadence = max(1, min(2000, budget // 10))
        row_cache: dict[int, np.ndarray] = {}
        for t in range(budget):
            width = 1
            while heap[0][3] != t:
                # Refresh a block of stale entries with one matrix product;
                # each gets its exact current gain and goes back on the heap.
                stale = []
                while heap and heap[0][3] != t and len(stale) < width:
                    stale.append(heapq.heappop(heap))
                width = min(width * 8, refresh)
                rows = np.fromiter((entry[2] for entry in stale), dtype=np.intp,
                                   count=len(stale))
                # Drop the previous block before allocating the next one so at
                # most two row blocks (similarities + margins) are ever live.
                row_cache = {}
                sims = unit[rows] @ unit.T
                margin = sims - covered
                np.maximum(margin, 0.0, out=margin)
                fresh = qw * qualities[rows] + diversity_weight * margin.sum(axis=1)
                del margin
                n_evaluations += len(stale)
                row_cache = {int(i): sims[r] for r, i in enumerate(rows)}
                for r, (_, neg_quality, i, _) in enumerate(stale):
                    heapq.heappush(heap, (-float(fresh[r]), neg_quality, i, t))
            neg_score, _, chosen, _ = heapq.heappop(heap)
            gain = -neg_score
            chosen_sims = row_cache.get(chosen)
            if chosen_sims is None:
                chosen_sims = unit @ unit[chosen]
            np.maximum(covered, chosen_sims, out=covered)
            indices.append(chosen)
            gains.append(gain)
            if len(indices) % cadence == 0:
                logger.info(
                    "facility location: %d/%d picks, %d evaluations, %.1fs",
                    len(indices), budget, n_evaluations,
                    time.perf_counter() - started,
                )

        self.gains_ = gains
        self.n_evaluations_ = n_evaluations
        self.objective_ = qw * float(qualities[indices].sum()) + diversity_weight * float(
            covered.sum()
        )
        logger.info(
            "facility location selected %d/%d (%d evaluations, %.2fs)",
            budget,
            n,
            n_evaluations,
            time.perf_counter() - started,
        )
        return self._finalize(points, indices, started)
