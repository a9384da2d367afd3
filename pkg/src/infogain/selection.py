"""Greedy information-maximizing subset selection.

The engine picks, at every iteration, the candidate with the best marginal
contribution to the dataset measure, under one of two gain definitions:

``exact``
    the true increase of the measure if the candidate were added, summed
    over the candidate's propagated support — submodular, monotone, and the
    basis of the approximation guarantee;
``gradient``
    the first-order estimate ``g . e(d)``, where ``g`` is the gradient of
    the measure at the current accumulated state.  Because the score
    functions are concave this never underestimates the exact gain, and it
    is much cheaper: one sparse matrix-vector product per iteration plus an
    O(#labels-of-d) dot per candidate.

The gradient direction: with the propagated state ``z = At @ sum(e_i)``
(``A`` row-stochastic, ``At`` its transpose), the derivative of the measure
with respect to the raw per-label mass is ``A @ phi'(z)`` — that is
``orientation="adjoint"``, the default.  ``orientation="forward"`` instead
applies the forward transition to the slope vector (``At @ phi'(z)``),
which is *not* the calculus derivative on graphs with uneven degrees; it
exists as a documented comparison variant.

Both the full scan (:func:`select`) and the priority-queue variant
(:func:`lazy_select`) produce byte-identical selections: gains can only
shrink as the state grows, so a popped candidate whose recomputed score
still beats the best cached score is the true argmax.  Ties are broken by
highest quality, then smallest pool index.  Scoring goes through shared
kernels so the two drivers agree bit-for-bit.

Gradient scores evaluate the slope at ``max(z, epsilon)``; the power score
has an infinite derivative at zero, and the floor (default 1e-12) keeps
empty labels extremely attractive without producing infinities.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field
from itertools import chain
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_budget, check_choice, check_epsilon
from .errors import InternalInvariantError, ValidationError
from .graph import LabelGraph
from .measure import InfoFunction, default_info_function
from .pool import DataPoint, Pool

logger = logging.getLogger(__name__)

GAIN_MODES = ("gradient", "exact")
ORIENTATIONS = ("adjoint", "forward")
DEFAULT_EPSILON = 1e-12


@dataclass(slots=True)
class SelectionState:
    """Mutable state of a selection run.

    ``accumulated`` is the propagated information mass per label of
    everything selected so far; it is always recomputable from scratch as
    ``propagate(graph, sum of raw_info over selected)``.
    """

    accumulated: np.ndarray
    selected: list[int]
    selected_ids: list[str]
    remaining: np.ndarray
    iteration: int = 0

    @classmethod
    def empty(cls, pool_size: int, n_labels: int) -> "SelectionState":
        return cls(
            accumulated=np.zeros(n_labels, dtype=np.float64),
            selected=[],
            selected_ids=[],
            remaining=np.ones(pool_size, dtype=bool),
            iteration=0,
        )


@dataclass(slots=True)
class SelectionReport:
    """Everything a selection run reports: objective, trace, coverage, timing."""

    objective: float
    budget: int
    pool_size: int
    n_labels: int
    gain_mode: str
    lazy: bool
    orientation: str
    info_fn: str
    epsilon: float
    selected_ids: list[str]
    gains: list[float]
    distinct_labels: int
    pool_distinct_labels: int
    coverage: float
    mean_quality: float
    min_quality: float
    max_quality: float
    label_histogram: list[tuple[str, int]]
    n_evaluations: int
    wall_time_s: float
    config: dict = field(default_factory=dict)

    def to_text(self) -> str:
        """Structured text rendering (the report file format)."""
        lines = [
            "[selection]",
            f"objective = {self.objective!r}",
            f"budget = {self.budget}",
            f"pool_size = {self.pool_size}",
            f"n_labels = {self.n_labels}",
            f"gain_mode = {self.gain_mode}",
            f"lazy = {self.lazy}",
            f"orientation = {self.orientation}",
            f"info_fn = {self.info_fn}",
            f"epsilon = {self.epsilon!r}",
            f"distinct_labels = {self.distinct_labels}",
            f"pool_distinct_labels = {self.pool_distinct_labels}",
            f"coverage = {self.coverage:.6f}",
            f"mean_quality = {self.mean_quality:.6f}",
            f"min_quality = {self.min_quality:.6f}",
            f"max_quality = {self.max_quality:.6f}",
            f"n_evaluations = {self.n_evaluations}",
            "",
            "[config]",
        ]
        for key in sorted(self.config):
            lines.append(f"{key} = {self.config[key]}")
        lines += ["", "[gains]"]
        lines += [
            f"{i + 1} {pid} {gain!r}"
            for i, (pid, gain) in enumerate(zip(self.selected_ids, self.gains))
        ]
        lines += ["", "[label_histogram]"]
        lines += [f"{count} {label}" for label, count in self.label_histogram]
        lines += ["", "[timing]", f"wall_time_s = {self.wall_time_s:.3f}"]
        return "\n".join(lines) + "\n"


@dataclass(slots=True)
class SelectionResult:
    """Output of :func:`select` / :func:`lazy_select`."""

    indices: list[int]
    ids: list[str]
    points: list[DataPoint]
    state: SelectionState
    report: SelectionReport


class _Candidates:
    """Flattened candidate arrays shared by all scoring kernels."""

    __slots__ = ("points", "ids", "qualities", "flat_labels", "offsets", "n")

    def __init__(self, points: Sequence[DataPoint], n_labels: int):
        self.points = list(points)
        self.n = len(self.points)
        if self.n == 0:
            raise ValidationError("cannot select from an empty pool")
        self.ids = [p.id for p in self.points]
        self.qualities = np.fromiter(
            (p.quality for p in self.points), dtype=np.float64, count=self.n
        )
        counts = np.fromiter(
            (len(p.labels) for p in self.points), dtype=np.intp, count=self.n
        )
        if counts.min() == 0:
            bad = self.points[int(np.argmin(counts))]
            raise ValidationError(f"record {bad.id!r} has no labels")
        total = int(counts.sum())
        self.flat_labels = np.fromiter(
            chain.from_iterable(p.labels for p in self.points), dtype=np.intp, count=total
        )
        if self.flat_labels.size and (
            self.flat_labels.min() < 0 or self.flat_labels.max() >= n_labels
        ):
            raise ValidationError(
                f"a record references a label index outside [0, {n_labels}); "
                "was the pool aligned to this graph?"
            )
        self.offsets = np.zeros(self.n + 1, dtype=np.intp)
        np.cumsum(counts, out=self.offsets[1:])


# ---------------------------------------------------------------------------
# Scoring kernels (shared by the eager and lazy drivers and the public API)
# ---------------------------------------------------------------------------


def _gradient_vector(
    graph: LabelGraph,
    accumulated: np.ndarray,
    fn: InfoFunction,
    epsilon: float,
    orientation: str,
) -> np.ndarray:
    slope = np.asarray(fn.derivative(np.maximum(accumulated, epsilon)), dtype=np.float64)
    outer = graph.transition if orientation == "adjoint" else graph.transition_adjoint
    return outer @ slope


def _gradient_scores_all(grad: np.ndarray, cand: _Candidates) -> np.ndarray:
    segments = np.add.reduceat(grad[cand.flat_labels], cand.offsets[:-1])
    return cand.qualities * segments


def _gradient_score_one(grad: np.ndarray, cand: _Candidates, i: int) -> float:
    seg = grad[cand.flat_labels[cand.offsets[i] : cand.offsets[i + 1]]]
    return float(cand.qualities[i] * np.add.reduceat(seg, [0])[0])


def _point_delta(graph: LabelGraph, labels: Sequence[int], quality: float) -> np.ndarray:
    """Propagated contribution of one point (dense, length K)."""
    rows = graph.transition[list(labels), :]
    return quality * np.asarray(rows.sum(axis=0)).ravel()


def _exact_gain_arrays(
    accumulated: np.ndarray, idx: np.ndarray, vals: np.ndarray, fn: InfoFunction
) -> float:
    if idx.size == 0:
        return 0.0
    before = accumulated[idx]
    return float(np.sum(fn.value(before + vals) - fn.value(before)))


def _argmax_with_ties(scores: np.ndarray, qualities: np.ndarray) -> int:
    """Argmax with the deterministic tie-break (quality desc, index asc)."""
    best = scores.max()
    ties = np.flatnonzero(scores == best)
    if ties.size > 1:
        best_quality = qualities[ties].max()
        ties = ties[qualities[ties] == best_quality]
    return int(ties[0])


# ---------------------------------------------------------------------------
# Public gain contract
# ---------------------------------------------------------------------------


def exact_gain(
    state: SelectionState, point: DataPoint, graph: LabelGraph, fn: InfoFunction
) -> float:
    """True measure increase if ``point`` were added to the current state."""
    _require_transition(graph)
    delta = _point_delta(graph, point.labels, point.quality)
    idx = np.flatnonzero(delta)
    return _exact_gain_arrays(state.accumulated, idx, delta[idx], fn)


def gradient_gain(
    state: SelectionState,
    point: DataPoint,
    graph: LabelGraph,
    fn: InfoFunction,
    *,
    epsilon: float = DEFAULT_EPSILON,
    orientation: str = "adjoint",
) -> float:
    """First-order gain estimate ``g . e(point)`` at the current state.

    With the default orientation, ``g[p] = sum_q a[p][q] * phi'(max(z[q],
    epsilon))`` — the true derivative of the measure with respect to the
    raw mass on label ``p``.  For concave score functions this dominates
    :func:`exact_gain` (first-order overestimate), with equality under the
    linear score.
    """
    _require_transition(graph)
    check_choice("orientation", orientation, ORIENTATIONS)
    epsilon = check_epsilon(epsilon)
    grad = _gradient_vector(graph, state.accumulated, fn, epsilon, orientation)
    labels = np.asarray(point.labels, dtype=np.intp)
    if labels.size == 0:
        return 0.0
    return float(point.quality * np.add.reduceat(grad[labels], [0])[0])


def _require_transition(graph: LabelGraph) -> None:
    if graph.transition is None:
        raise ValidationError(
            "graph has no propagation matrix; build it with an alpha first"
        )


# ---------------------------------------------------------------------------
# Selection drivers
# ---------------------------------------------------------------------------


def _resolve_points(pool: Pool | Iterable[DataPoint]) -> list[DataPoint]:
    if isinstance(pool, Pool):
        return pool.points
    return list(pool)


def _run_selection(
    points: list[DataPoint],
    graph: LabelGraph,
    budget: int,
    fn: InfoFunction,
    gain_mode: str,
    orientation: str,
    epsilon: float,
    lazy: bool,
    config_echo: dict | None,
) -> SelectionResult:
    start = time.perf_counter()
    cand = _Candidates(points, graph.n_labels)
    budget = check_budget(budget, cand.n)
    state = SelectionState.empty(cand.n, graph.n_labels)
    accumulated = state.accumulated
    gains: list[float] = []
    n_evaluations = 0

    exact_cache: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def exact_support(i: int) -> tuple[np.ndarray, np.ndarray]:
        cached = exact_cache.get(i)
        if cached is None:
            delta = _point_delta(graph, cand.points[i].labels, float(cand.qualities[i]))
            idx = np.flatnonzero(delta)
            cached = (idx, delta[idx])
            exact_cache[i] = cached
        return cached

    def exact_score(i: int) -> float:
        idx, vals = exact_support(i)
        return _exact_gain_arrays(accumulated, idx, vals, fn)

    grad: np.ndarray | None = None

    def refresh_gradient() -> None:
        nonlocal grad
        grad = _gradient_vector(graph, accumulated, fn, epsilon, orientation)

    def commit(i: int, gain_value: float) -> None:
        nonlocal n_evaluations
        delta = _point_delta(graph, cand.points[i].labels, float(cand.qualities[i]))
        np.add(accumulated, delta, out=accumulated)
        state.remaining[i] = False
        state.selected.append(i)
        state.selected_ids.append(cand.ids[i])
        state.iteration += 1
        gains.append(gain_value)

    if not lazy:
        for t in range(budget):
            if gain_mode == "gradient":
                refresh_gradient()
                scores = _gradient_scores_all(grad, cand)
                n_evaluations += int(state.remaining.sum())
                scores[~state.remaining] = -np.inf
                best = _argmax_with_ties(scores, cand.qualities)
                best_gain = float(scores[best])
            else:
                best = -1
                best_key: tuple[float, float] | None = None
                for i in np.flatnonzero(state.remaining):
                    i = int(i)
                    key = (exact_score(i), float(cand.qualities[i]))
                    n_evaluations += 1
                    if best_key is None or key > best_key:
                        best, best_key = i, key
                best_gain = best_key[0]
            commit(best, best_gain)
    else:
        # Priority queue of (-score, -quality, index, stamp); an entry's
        # score was computed at iteration `stamp` and can only have shrunk
        # since, so a fresh recomputation that still tops the queue wins.
        if gain_mode == "gradient":
            refresh_gradient()
            initial = _gradient_scores_all(grad, cand)
        else:
            initial = np.array([exact_score(i) for i in range(cand.n)])
        n_evaluations += cand.n
        heap: list[tuple[float, float, int, int]] = [
            (-float(initial[i]), -float(cand.qualities[i]), i, 0) for i in range(cand.n)
        ]
        heapq.heapify(heap)
        for t in range(budget):
            if gain_mode == "gradient" and t > 0:
                refresh_gradient()
            while True:
                neg_score, neg_quality, i, stamp = heapq.heappop(heap)
                if stamp == t:
                    commit(i, -neg_score)
                    break
                if gain_mode == "gradient":
                    score = _gradient_score_one(grad, cand, i)
                else:
                    score = exact_score(i)
                n_evaluations += 1
                entry = (-score, neg_quality, i, t)
                if not heap or entry <= heap[0]:
                    commit(i, score)
                    break
                heapq.heappush(heap, entry)

    if len(state.selected) != budget:
        raise InternalInvariantError(
            f"selected {len(state.selected)} of {budget} requested points"
        )

    objective = float(np.sum(fn.value(accumulated)))
    selected_points = [cand.points[i] for i in state.selected]
    selected_label_set = sorted({l for p in selected_points for l in p.labels})
    pool_distinct = len(set(cand.flat_labels.tolist()))
    histogram_counts: dict[int, int] = {}
    for p in selected_points:
        for l in p.labels:
            histogram_counts[l] = histogram_counts.get(l, 0) + 1
    histogram = sorted(
        ((graph.labels[l], c) for l, c in histogram_counts.items()),
        key=lambda item: (-item[1], item[0]),
    )
    quality_sel = cand.qualities[state.selected]
    report = SelectionReport(
        objective=objective,
        budget=budget,
        pool_size=cand.n,
        n_labels=graph.n_labels,
        gain_mode=gain_mode,
        lazy=lazy,
        orientation=orientation,
        info_fn=fn.spec(),
        epsilon=epsilon,
        selected_ids=list(state.selected_ids),
        gains=gains,
        distinct_labels=len(selected_label_set),
        pool_distinct_labels=pool_distinct,
        coverage=len(selected_label_set) / max(1, pool_distinct),
        mean_quality=float(quality_sel.mean()),
        min_quality=float(quality_sel.min()),
        max_quality=float(quality_sel.max()),
        label_histogram=histogram,
        n_evaluations=n_evaluations,
        wall_time_s=time.perf_counter() - start,
        config=dict(config_echo or {}),
    )
    logger.info(
        "selected %d/%d points: objective %.6f, coverage %.3f, %d evaluations, %.2fs",
        budget,
        cand.n,
        objective,
        report.coverage,
        n_evaluations,
        report.wall_time_s,
    )
    return SelectionResult(
        indices=list(state.selected),
        ids=list(state.selected_ids),
        points=selected_points,
        state=state,
        report=report,
    )


def _prepare(
    graph: LabelGraph,
    info_fn: InfoFunction | None,
    gain: str,
    orientation: str,
    epsilon: float,
) -> tuple[InfoFunction, str, str, float]:
    _require_transition(graph)
    fn = info_fn if info_fn is not None else default_info_function()
    if not isinstance(fn, InfoFunction):
        raise ValidationError(f"info_fn must be an InfoFunction, got {fn!r}")
    check_choice("gain", gain, GAIN_MODES)
    check_choice("orientation", orientation, ORIENTATIONS)
    return fn, gain, orientation, check_epsilon(epsilon)


def select(
    pool: Pool | Iterable[DataPoint],
    graph: LabelGraph,
    budget: int,
    *,
    info_fn: InfoFunction | None = None,
    gain: str = "gradient",
    orientation: str = "adjoint",
    epsilon: float = DEFAULT_EPSILON,
    config_echo: dict | None = None,
) -> SelectionResult:
    """Greedy selection by full candidate scan (one scan per iteration)."""
    fn, gain, orientation, epsilon = _prepare(graph, info_fn, gain, orientation, epsilon)
    return _run_selection(
        _resolve_points(pool), graph, budget, fn, gain, orientation, epsilon,
        lazy=False, config_echo=config_echo,
    )


def lazy_select(
    pool: Pool | Iterable[DataPoint],
    graph: LabelGraph,
    budget: int,
    *,
    info_fn: InfoFunction | None = None,
    gain: str = "gradient",
    orientation: str = "adjoint",
    epsilon: float = DEFAULT_EPSILON,
    config_echo: dict | None = None,
) -> SelectionResult:
    """Greedy selection with stale-score re-evaluation (identical output).

    Gains only shrink as the accumulated state grows, so cached scores are
    upper bounds; the queue top is re-evaluated until its fresh score still
    beats the best cached competitor.  Under the linear score the gains are
    static and each selection needs at most one re-evaluation.
    """
    fn, gain, orientation, epsilon = _prepare(graph, info_fn, gain, orientation, epsilon)
    return _run_selection(
        _resolve_points(pool), graph, budget, fn, gain, orientation, epsilon,
        lazy=True, config_echo=config_echo,
    )


# ---------------------------------------------------------------------------
# Estimator API
# ---------------------------------------------------------------------------


class InfoGainSelector(BaseEstimator):
    """Greedy maximum-information selector with a fit/transform interface.

    Parameters mirror :func:`select`; ``fit`` runs the selection and
    ``transform`` filters any compatible record collection down to the
    selected ids, in selection order.

    >>> selector = InfoGainSelector(budget=100, graph=graph).fit(pool)
    >>> chosen = selector.transform(pool)          # doctest: +SKIP

    Fitted attributes: ``selected_ids_``, ``selected_indices_``,
    ``gains_``, ``objective_``, ``report_``, ``state_``,
    ``n_evaluations_``.
    """

    def __init__(
        self,
        budget: int | None = None,
        graph: LabelGraph | None = None,
        info_fn: InfoFunction | None = None,
        gain: str = "gradient",
        lazy: bool = True,
        orientation: str = "adjoint",
        epsilon: float = DEFAULT_EPSILON,
    ):
        self.budget = budget
        self.graph = graph
        self.info_fn = info_fn
        self.gain = gain
        self.lazy = lazy
        self.orientation = orientation
        self.epsilon = epsilon

    def fit(self, pool: Pool | Iterable[DataPoint], graph: LabelGraph | None = None):
        """Run the selection on ``pool``; returns self."""
        graph_ = graph if graph is not None else self.graph
        if graph_ is None:
            raise ValidationError("InfoGainSelector needs a graph (constructor or fit)")
        if self.budget is None:
            raise ValidationError("InfoGainSelector needs a budget")
        driver = lazy_select if self.lazy else select
        result = driver(
            pool,
            graph_,
            self.budget,
            info_fn=self.info_fn,
            gain=self.gain,
            orientation=self.orientation,
            epsilon=self.epsilon,
        )
        self.graph_ = graph_
        self.result_ = result
        self.selected_ids_ = result.ids
        self.selected_indices_ = result.indices
        self.gains_ = result.report.gains
        self.objective_ = result.report.objective
        self.report_ = result.report
        self.state_ = result.state
        self.n_evaluations_ = result.report.n_evaluations
        return self

    def transform(self, pool: Pool | Iterable[DataPoint]) -> list[DataPoint]:
        """Filter ``pool`` down to the selected ids, in selection order."""
        if not hasattr(self, "selected_ids_"):
            raise ValidationError("this InfoGainSelector is not fitted yet")
        by_id = {p.id: p for p in _resolve_points(pool)}
        return [by_id[i] for i in self.selected_ids_ if i in by_id]

    def fit_transform(
        self, pool: Pool | Iterable[DataPoint], graph: LabelGraph | None = None
    ) -> list[DataPoint]:
        return self.fit(pool, graph=graph).transform(pool)
