"""Parameter sweeps and a single-process performance suite.

The sweeps rebuild only what a parameter actually changes: the spread
weight reuses one similarity graph, the threshold sweep rebuilds it.  The
perf suite generates a large synthetic pool, times graph construction,
greedy selection, and a pairwise-coverage baseline on the same pool, and
reports peak RSS; its output is stable ``key=value`` lines so scripts can
parse it.

The baseline leg runs a deliberately small pick count (``fl_budget``).
Facility-location greedy is incremental — the first k picks of a longer
run are exactly the first k picks of a shorter one — so its wall time only
grows with budget, and the reported ratio is a floor for the same-budget
ratio.  Even the first few picks cost minutes at 100K points (one full
pairwise pass plus near-full heap regrinds while the coverage field is
still rising everywhere); the full budget is a multi-hour computation.
That asymmetry is the point the report makes.
"""

from __future__ import annotations

import logging
import resource
import time
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .baselines import FacilityLocationSelector
from .graph import LabelGraph, build_graph, with_propagation
from .measure import InfoFunction, default_info_function
from .pool import DataPoint, LabelEmbeddings
from .selection import lazy_select
from .synthetic import SyntheticPoolSpec, generate_pool

logger = logging.getLogger(__name__)

ALPHA_GRID = (0.0, 0.6, 0.8, 1.0, 1.2, 2.0)
THRESHOLD_GRID = (0.80, 0.82, 0.84, 0.86, 0.88, 0.90, 0.92, 0.94)


@dataclass(slots=True)
class SweepRow:
    """One grid point of a sweep and what the selection did there."""

    parameter: str
    value: float
    n_edges: int
    density: float
    mean_self_retention: float
    objective: float
    coverage: float
    wall_time_s: float


def _rows_text(rows: Sequence[SweepRow]) -> str:
    header = (
        f"{'param':<10} {'value':>6} {'edges':>8} {'density':>9} "
        f"{'self_ret':>9} {'objective':>14} {'coverage':>9} {'time_s':>7}"
    )
    out = [header, "-" * len(header)]
    for r in rows:
        out.append(
            f"{r.parameter:<10} {r.value:>6.2f} {r.n_edges:>8d} {r.density:>9.5f} "
            f"{r.mean_self_retention:>9.5f} {r.objective:>14.6f} {r.coverage:>9.4f} "
            f"{r.wall_time_s:>7.3f}"
        )
    return "\n".join(out)


def render_sweep(rows: Sequence[SweepRow]) -> str:
    return _rows_text(rows)


def _mean_self_retention(graph: LabelGraph) -> float:
    """Average diagonal retention over labels that have at least one edge.

    Isolated labels retain everything by construction; averaging over them
    would wash out the signal the sweep is looking at.
    """
    active = graph.degree_weights() > 0
    retention = graph.self_retention()
    if not active.any():
        return 1.0
    return float(retention[active].mean())


def _measure(
    graph: LabelGraph,
    points: Sequence[DataPoint],
    budget: int,
    fn: InfoFunction,
) -> tuple[float, float, float]:
    start = time.perf_counter()
    result = lazy_select(points, graph, budget, info_fn=fn)
    elapsed = time.perf_counter() - start
    return result.report.objective, result.report.coverage, elapsed


def sweep_alpha(
    points: Sequence[DataPoint],
    embeddings: LabelEmbeddings,
    labels: Sequence[str],
    budget: int,
    *,
    threshold: float = 0.9,
    alphas: Sequence[float] = ALPHA_GRID,
    fn: InfoFunction | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Vary the spread weight on a fixed similarity graph."""
    fn = fn or default_info_function()
    base = build_graph(embeddings, labels, threshold, threads=threads)
    rows = []
    for alpha in alphas:
        graph = with_propagation(base, alpha)
        objective, coverage, elapsed = _measure(graph, points, budget, fn)
        rows.append(
            SweepRow(
                parameter="alpha",
                value=float(alpha),
                n_edges=graph.n_edges,
                density=graph.density,
                mean_self_retention=_mean_self_retention(graph),
                objective=objective,
                coverage=coverage,
                wall_time_s=elapsed,
            )
        )
        logger.info("alpha=%.2f objective=%.6f (%.3fs)", alpha, objective, elapsed)
    return rows


def sweep_threshold(
    points: Sequence[DataPoint],
    embeddings: LabelEmbeddings,
    labels: Sequence[str],
    budget: int,
    *,
    alpha: float = 1.0,
    thresholds: Sequence[float] = THRESHOLD_GRID,
    fn: InfoFunction | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Vary the similarity threshold, rebuilding the graph each time."""
    fn = fn or default_info_function()
    rows = []
    for threshold in thresholds:
        graph = with_propagation(
            build_graph(embeddings, labels, threshold, threads=threads), alpha
        )
        objective, coverage, elapsed = _measure(graph, points, budget, fn)
        rows.append(
            SweepRow(
                parameter="threshold",
                value=float(threshold),
                n_edges=graph.n_edges,
                density=graph.density,
                mean_self_retention=_mean_self_retention(graph),
                objective=objective,
                coverage=coverage,
                wall_time_s=elapsed,
            )
        )
        logger.info(
            "threshold=%.2f edges=%d objective=%.6f (%.3fs)",
            threshold, graph.n_edges, objective, elapsed,
        )
    return rows


@dataclass(slots=True)
class PerfReport:
    """Wall-clock and memory figures from one large-scale run."""

    n_points: int
    n_labels: int
    budget: int
    graph_edges: int
    graph_density: float
    generate_s: float
    build_s: float
    select_s: float
    select_evaluations: int
    objective: float
    coverage: float
    fl_budget: int
    fl_s: float
    fl_evaluations: int
    fl_over_select: float
    peak_rss_mb: float

    def to_text(self) -> str:
        pairs = [
            ("n_points", self.n_points),
            ("n_labels", self.n_labels),
            ("budget", self.budget),
            ("graph_edges", self.graph_edges),
            ("graph_density", f"{self.graph_density:.6f}"),
            ("generate_s", f"{self.generate_s:.3f}"),
            ("build_s", f"{self.build_s:.3f}"),
            ("select_s", f"{self.select_s:.3f}"),
            ("select_evaluations", self.select_evaluations),
            ("objective", f"{self.objective:.6f}"),
            ("coverage", f"{self.coverage:.6f}"),
            ("fl_budget", self.fl_budget),
            ("fl_s", f"{self.fl_s:.3f}"),
            ("fl_evaluations", self.fl_evaluations),
            ("fl_over_select", f"{self.fl_over_select:.3f}"),
            ("peak_rss_mb", f"{self.peak_rss_mb:.1f}"),
        ]
        return "\n".join(f"{key}={value}" for key, value in pairs)


def _peak_rss_mb() -> float:
    # ru_maxrss is in kilobytes on Linux.
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def perf_run(
    *,
    n_points: int = 100_000,
    n_labels: int = 1_000,
    budget: int = 10_000,
    threshold: float = 0.9,
    alpha: float = 1.0,
    seed: int = 42,
    quality_weight: float = 0.5,
    fl_budget: int = 10,
    skip_fl: bool = False,
) -> PerfReport:
    """Time selection at scale against a pairwise-coverage baseline.

    ``fl_budget`` caps the baseline's pick count; see the module docstring
    for why the resulting ratio is a floor rather than an estimate.
    """
    spec = SyntheticPoolSpec(n_points=n_points, n_labels=n_labels, seed=seed)
    start = time.perf_counter()
    data = generate_pool(spec)
    generate_s = time.perf_counter() - start
    logger.info("generated %d points in %.1fs", n_points, generate_s)

    start = time.perf_counter()
    graph = with_propagation(
        build_graph(data.embeddings, data.pool.vocab, threshold), alpha
    )
    build_s = time.perf_counter() - start
    logger.info("graph: %d edges, density %.5f, built in %.1fs",
                graph.n_edges, graph.density, build_s)

    start = time.perf_counter()
    result = lazy_select(data.pool, graph, budget)
    select_s = time.perf_counter() - start
    logger.info("selected %d/%d in %.1fs (%d evaluations)",
                budget, n_points, select_s, result.report.n_evaluations)

    fl_s = 0.0
    fl_evaluations = 0
    fl_picks = min(max(1, fl_budget), budget)
    if not skip_fl:
        if data.point_vectors is None:
            raise AssertionError("perf spec always generates point vectors")
        fl = FacilityLocationSelector(
            budget=fl_picks, embeddings=data.point_vectors, quality_weight=quality_weight
        )
        start = time.perf_counter()
        fl.fit(data.pool.points)
        fl_s = time.perf_counter() - start
        fl_evaluations = fl.n_evaluations_
        logger.info("facility-location baseline: %d picks in %.1fs (%d evaluations)",
                    fl_picks, fl_s, fl_evaluations)

    return PerfReport(
        n_points=n_points,
        n_labels=n_labels,
        budget=budget,
        graph_edges=graph.n_edges,
        graph_density=graph.density,
        generate_s=generate_s,
        build_s=build_s,
        select_s=select_s,
        select_evaluations=result.report.n_evaluations,
        objective=result.report.objective,
        coverage=result.report.coverage,
        fl_budget=fl_picks,
        fl_s=fl_s,
        fl_evaluations=fl_evaluations,
        fl_over_select=(fl_s / select_s) if (not skip_fl and select_s > 0) else 0.0,
        peak_rss_mb=_peak_rss_mb(),
    )
