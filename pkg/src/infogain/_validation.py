"""Shared input-validation helpers used across the estimators and the API.

These are deliberately small and strict: every public entry point funnels
user input through one of these so error messages stay uniform and the
numeric code can assume clean data.
"""

from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .errors import ValidationError


def check_budget(budget: Any, pool_size: int) -> int:
    """Validate a selection budget against the pool it draws from."""
    if isinstance(budget, bool) or not isinstance(budget, (int, np.integer)):
        raise ValidationError(f"budget must be an integer, got {budget!r}")
    if budget < 1:
        raise ValidationError(f"budget must be >= 1, got {budget}")
    if budget > pool_size:
        raise ValidationError(
            f"budget {budget} exceeds pool size {pool_size}"
        )
    return int(budget)


def check_quality(quality: Any, point_id: str) -> float:
    """Validate one record's quality score; returns it as a float."""
    if isinstance(quality, bool) or not isinstance(quality, (int, float, np.floating, np.integer)):
        raise ValidationError(
            f"record {point_id!r}: quality must be a number, got {quality!r}"
        )
    value = float(quality)
    if not np.isfinite(value):
        raise ValidationError(f"record {point_id!r}: quality must be finite, got {value}")
    if value < 0:
        raise ValidationError(f"record {point_id!r}: quality must be >= 0, got {value}")
    return value


def check_threshold(threshold: Any) -> float:
    value = _check_finite_number("threshold", threshold)
    if not 0.0 < value <= 1.0:
        raise ValidationError(f"threshold must lie in (0, 1], got {value}")
    return value


def check_alpha(alpha: Any) -> float:
    value = _check_finite_number("alpha", alpha)
    if value < 0:
        raise ValidationError(f"alpha must be >= 0, got {value}")
    return value


def check_choice(name: str, value: Any, allowed: Sequence[str]) -> str:
    if value not in allowed:
        raise ValidationError(
            f"{name} must be one of {sorted(allowed)}, got {value!r}"
        )
    return value


def check_epsilon(epsilon: Any) -> float:
    value = _check_finite_number("epsilon", epsilon)
    if value <= 0:
        raise ValidationError(f"epsilon must be > 0, got {value}")
    return value


def check_matrix(name: str, array: Any, *, n_rows: int | None = None) -> np.ndarray:
    """Coerce to a 2-D float64 array with finite entries."""
    matrix = np.asarray(array, dtype=np.float64)
    if matrix.ndim != 2:
        raise ValidationError(f"{name} must be 2-dimensional, got shape {matrix.shape}")
    if n_rows is not None and matrix.shape[0] != n_rows:
        raise ValidationError(
            f"{name} has {matrix.shape[0]} rows, expected {n_rows}"
        )
    if not np.all(np.isfinite(matrix)):
        raise ValidationError(f"{name} contains non-finite values")
    return matrix


def _check_finite_number(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating, np.integer)):
        raise ValidationError(f"{name} must be a number, got {value!r}")
    out = float(value)
    if not np.isfinite(out):
        raise ValidationError(f"{name} must be finite, got {out}")
    return out
