"""Side-by-side evaluation of selection methods on one pool.

Every method is scored with the same graph-aware information measure,
regardless of what objective it optimized internally, so the numbers in a
report are directly comparable.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ._validation import check_budget
from .graph import LabelGraph
from .measure import InfoFunction, accumulate_raw, dataset_information, default_info_function
from .pool import DataPoint


@dataclass(slots=True)
class MethodResult:
    """One row of a comparison: how a single method's pick measures up."""

    name: str
    objective: float
    distinct_labels: int
    coverage: float
    mean_quality: float
    wall_time_s: float


@dataclass(slots=True)
class ComparisonReport:
    rows: list[MethodResult]
    budget: int
    n_pool: int
    n_labels: int

    def to_text(self) -> str:
        header = f"{'method':<18} {'objective':>14} {'labels':>7} {'coverage':>9} {'quality':>8} {'time_s':>8}"
        lines = [
            f"comparison over {self.n_pool} points, budget {self.budget}, {self.n_labels} labels",
            header,
            "-" * len(header),
        ]
        for r in self.rows:
            lines.append(
                f"{r.name:<18} {r.objective:>14.6f} {r.distinct_labels:>7d} "
                f"{r.coverage:>9.4f} {r.mean_quality:>8.4f} {r.wall_time_s:>8.3f}"
            )
        return "\n".join(lines)

    def write_csv(self, path: str) -> None:
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle)
            writer.writerow(
                ["method", "objective", "distinct_labels", "coverage", "mean_quality", "wall_time_s"]
            )
            for r in self.rows:
                writer.writerow(
                    [r.name, repr(r.objective), r.distinct_labels,
                     repr(r.coverage), repr(r.mean_quality), repr(r.wall_time_s)]
                )


def score_subset(
    points: Sequence[DataPoint],
    graph: LabelGraph,
    fn: InfoFunction | None = None,
) -> MethodResult:
    """Measure a chosen subset; the ``name`` and timing fields are left generic."""
    fn = fn or default_info_function()
    k = graph.n_labels
    objective = dataset_information(points, graph, fn)
    touched = np.zeros(k, dtype=bool)
    if points:
        accumulated = accumulate_raw(points, k)
        touched = accumulated > 0
    qualities = [p.quality for p in points]
    return MethodResult(
        name="subset",
        objective=objective,
        distinct_labels=int(touched.sum()),
        coverage=float(touched.sum()) / k,
        mean_quality=float(np.mean(qualities)) if qualities else 0.0,
        wall_time_s=0.0,
    )


def compare_methods(
    pool_points: Sequence[DataPoint],
    graph: LabelGraph,
    budget: int,
    methods: Mapping[str, object],
    fn: InfoFunction | None = None,
) -> ComparisonReport:
    """Fit each estimator in ``methods`` and score its selection uniformly.

    Each value must expose the estimator protocol used across this package:
    ``fit(points)`` followed by ``selected_indices_``.  Estimators are fitted
    here, so pass fresh instances.
    """
    check_budget(budget, len(pool_points))
    fn = fn or default_info_function()
    rows = []
    for name, estimator in methods.items():
        start = time.perf_counter()
        estimator.fit(list(pool_points))
        elapsed = time.perf_counter() - start
        chosen = [pool_points[i] for i in estimator.selected_indices_]
        row = score_subset(chosen, graph, fn)
        row.name = name
        row.wall_time_s = elapsed
        rows.append(row)
    return ComparisonReport(
        rows=rows, budget=budget, n_pool=len(pool_points), n_labels=graph.n_labels
    )
