"""Dataset information measure.

A pool is scored over a label graph in three steps:

1. each selected point contributes its quality to every label it carries
   (:func:`raw_info`),
2. the per-label totals are redistributed along weighted graph edges
   (:func:`propagate`), and
3. a concave, increasing score function is applied per label and summed
   (:func:`dataset_information`).

Concavity of the score function is what makes repeated mass on one label
saturate, so a greedy selector is pushed toward under-covered labels.  The
measure is monotone and submodular in the selected set for every concave
increasing function with value 0 at 0, which is what licenses the greedy
approximation guarantee.

Information vectors are plain float64 arrays of length K (the number of
labels).  Propagation distributes each source label's mass along its row of
the graph's transition matrix, so total mass is conserved.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Iterable

import numpy as np

from ._validation import _check_finite_number
from .errors import ValidationError

if TYPE_CHECKING:  # pragma: no cover - typing only
    from .graph import LabelGraph
    from .pool import DataPoint

__all__ = [
    "InfoFunction",
    "PowerInfo",
    "SaturatingExpInfo",
    "LinearInfo",
    "info_function",
    "default_info_function",
    "raw_info",
    "accumulate_raw",
    "propagate",
    "dataset_information",
]


class InfoFunction(ABC):
    """Concave increasing score applied to per-label information mass.

    Implementations must satisfy ``value(0) == 0``, be strictly increasing,
    and be concave on ``x >= 0``; the submodularity of the dataset measure
    (and therefore the greedy guarantee) depends on it.  ``value`` and
    ``derivative`` are vectorized over numpy arrays.
    """

    name: str = "abstract"

    @abstractmethod
    def value(self, x):
        """Score at ``x`` (scalar or array, elementwise). Requires ``x >= 0``."""

    @abstractmethod
    def derivative(self, x):
        """First derivative at ``x`` (scalar or array, elementwise)."""

    def params(self) -> dict:
        """Parameters as a plain dict (echoed into reports)."""
        return {}

    def spec(self) -> str:
        """Compact ``name`` or ``name:param`` form used by the CLI."""
        params = self.params()
        if not params:
            return self.name
        (value,) = params.values()
        return f"{self.name}:{value:g}"

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"

    def __eq__(self, other) -> bool:
        return type(self) is type(other) and self.params() == other.params()

    def __hash__(self) -> int:
        return hash((type(self).__name__, tuple(sorted(self.params().items()))))

    @staticmethod
    def _as_nonnegative(x, what: str):
        arr = np.asarray(x, dtype=np.float64)
        if arr.size and float(arr.min()) < 0.0:
            raise ValidationError(f"{what} requires x >= 0, got min {float(arr.min())}")
        return arr

    @staticmethod
    def _like(x, arr: np.ndarray):
        # Mirror numpy ufunc behaviour: scalar in, scalar out.
        if np.isscalar(x) or getattr(x, "ndim", 1) == 0:
            return float(arr)
        return arr


class PowerInfo(InfoFunction):
    """``x ** a`` with ``0 < a < 1``.

    The derivative ``a * x**(a-1)`` diverges at 0, which is intentional:
    an empty label is maximally attractive to the selector.  Callers that
    need a finite gradient at 0 floor the argument first (see the selection
    module's epsilon floor).
    """

    name = "power"

    def __init__(self, exponent: float = 0.8):
        exponent = _check_finite_number("exponent", exponent)
        if not 0.0 < exponent < 1.0:
            raise ValidationError(
                f"power exponent must lie in (0, 1) for concavity, got {exponent}"
            )
        self.exponent = exponent

    def value(self, x):
        arr = self._as_nonnegative(x, "power value")
        return self._like(x, np.power(arr, self.exponent))

    def derivative(self, x):
        arr = self._as_nonnegative(x, "power derivative")
        if arr.size and float(arr.min()) == 0.0:
            raise ValidationError(
                "power derivative is singular at x = 0; floor the argument first"
            )
        return self._like(x, self.exponent * np.power(arr, self.exponent - 1.0))

    def params(self) -> dict:
        return {"exponent": self.exponent}


class SaturatingExpInfo(InfoFunction):
    """``1 - exp(-a * x)`` with ``a > 0``; saturates at 1 per label."""

    name = "exp"

    def __init__(self, rate: float = 1.0):
        rate = _check_finite_number("rate", rate)
        if rate <= 0:
            raise ValidationError(f"exp rate must be > 0, got {rate}")
        self.rate = rate

    def value(self, x):
        arr = self._as_nonnegative(x, "exp value")
        return self._like(x, -np.expm1(-self.rate * arr))

    def derivative(self, x):
        arr = self._as_nonnegative(x, "exp derivative")
        return self._like(x, self.rate * np.exp(-self.rate * arr))

    def params(self) -> dict:
        return {"rate": self.rate}


class LinearInfo(InfoFunction):
    """Identity score: no saturation, so the measure is modular.

    Under this function the gain of a point never depends on what was
    already selected; greedy selection reduces to a static ranking.
    Useful as a control and for differential tests.
    """

    name = "linear"

    def value(self, x):
        arr = self._as_nonnegative(x, "linear value")
        return self._like(x, arr.copy())

    def derivative(self, x):
        arr = self._as_nonnegative(x, "linear derivative")
        return self._like(x, np.ones_like(arr))


_REGISTRY: dict[str, type[InfoFunction]] = {
    PowerInfo.name: PowerInfo,
    SaturatingExpInfo.name: SaturatingExpInfo,
    LinearInfo.name: LinearInfo,
}


def info_function(kind: str, param: float | None = None) -> InfoFunction:
    """Build a score function from its CLI name, e.g. ``power`` / ``exp:0.5``.

    ``kind`` may carry the parameter inline after a colon; an explicit
    ``param`` argument wins over the inline form.
    """
    if not isinstance(kind, str):
        raise ValidationError(f"score function kind must be a string, got {kind!r}")
    name, _, inline = kind.partition(":")
    name = name.strip().lower()
    if name not in _REGISTRY:
        raise ValidationError(
            f"unknown score function {name!r}; available: {sorted(_REGISTRY)}"
        )
    if param is None and inline:
        try:
            param = float(inline)
        except ValueError:
            raise ValidationError(f"bad score function parameter {inline!r}") from None
    cls = _REGISTRY[name]
    if param is None:
        return cls()
    if cls is LinearInfo:
        raise ValidationError("linear score function takes no parameter")
    return cls(param)


def default_info_function() -> InfoFunction:
    """The default measure: power score with exponent 0.8."""
    return PowerInfo(0.8)


def raw_info(point: "DataPoint", n_labels: int) -> np.ndarray:
    """Dense raw-information vector of one point: quality at each label."""
    vec = np.zeros(n_labels, dtype=np.float64)
    labels = np.asarray(point.labels, dtype=np.intp)
    if labels.size and (labels.min() < 0 or labels.max() >= n_labels):
        raise ValidationError(
            f"record {point.id!r} references label index outside [0, {n_labels})"
        )
    vec[labels] = point.quality
    return vec


def accumulate_raw(points: Iterable["DataPoint"], n_labels: int) -> np.ndarray:
    """Sum of raw-information vectors over ``points`` (dense, length K)."""
    total = np.zeros(n_labels, dtype=np.float64)
    for point in points:
        labels = np.asarray(point.labels, dtype=np.intp)
        if labels.size and (labels.min() < 0 or labels.max() >= n_labels):
            raise ValidationError(
                f"record {point.id!r} references label index outside [0, {n_labels})"
            )
        np.add.at(total, labels, point.quality)
    return total


def propagate(graph: "LabelGraph", vec: np.ndarray) -> np.ndarray:
    """Distribute per-label mass along graph edges.

    Entry ``q`` of the result is ``sum_p a[p, q] * vec[p]``: every source
    label spreads its mass according to its row of the transition matrix.
    Rows sum to one, so total mass is conserved exactly up to float error.
    """
    vec = np.asarray(vec, dtype=np.float64)
    if vec.shape != (graph.n_labels,):
        raise ValidationError(
            f"vector has shape {vec.shape}, expected ({graph.n_labels},)"
        )
    return graph.transition_adjoint @ vec


def dataset_information(
    points: Iterable["DataPoint"], graph: "LabelGraph", fn: InfoFunction
) -> float:
    """Total information of a selected set under ``fn`` over ``graph``."""
    total = accumulate_raw(points, graph.n_labels)
    spread = propagate(graph, total)
    return float(np.sum(fn.value(spread)))
