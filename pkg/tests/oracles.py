"""High-precision numeric oracles used by the test suite.

Float64 central differences break down where a function saturates: for
1 - e^{-x} at x beyond ~36 the two evaluations round to the same double
and the quotient is exactly zero, while the true derivative is tiny but
positive.  The worst case on the test grid is 1 - e^{-100}, whose
symmetric difference sits ~62 decimal digits below 1, so the oracle
evaluates in 120-digit arithmetic — enough headroom that the quotient
keeps well over 30 honest digits everywhere — and only then rounds to
float.
"""

from __future__ import annotations

from mpmath import mp

from infogain.measure import InfoFunction, LinearInfo, PowerInfo, SaturatingExpInfo


def _mp_value(fn: InfoFunction, x):
    """Evaluate ``fn`` in mpmath arithmetic at an mpf ``x``."""
    if isinstance(fn, PowerInfo):
        return mp.power(x, mp.mpf(fn.exponent))
    if isinstance(fn, SaturatingExpInfo):
        return 1 - mp.exp(-mp.mpf(fn.rate) * x)
    if isinstance(fn, LinearInfo):
        return x
    raise TypeError(f"no high-precision form for {type(fn).__name__}")


def central_difference_derivative(fn: InfoFunction, x: float, dps: int = 120) -> float:
    """Symmetric difference quotient of ``fn`` at ``x`` in ``dps``-digit math.

    ``x`` is converted binary-exactly, so the oracle differentiates at the
    same point the float implementation sees.
    """
    with mp.workdps(dps):
        xm = mp.mpf(x)
        h = xm * mp.mpf("1e-20")
        return float((_mp_value(fn, xm + h) - _mp_value(fn, xm - h)) / (2 * h))
