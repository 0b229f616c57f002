"""Input-validation helpers shared by estimators and pipeline functions."""

from __future__ import annotations

import numpy as np

from .exceptions import (
    EmptyInputError,
    LengthMismatchError,
    ShapeMismatchError,
)


def check_array(x, *, ndim=None, min_rows=1, name="array") -> np.ndarray:
    """Coerce to a float64 ndarray and verify basic shape/finiteness."""
    arr = np.asarray(x, dtype=float)
    if ndim is not None and arr.ndim != ndim:
        raise ShapeMismatchError(f"{name}: expected {ndim}-d input, got {arr.ndim}-d")
    if arr.size == 0 or arr.shape[0] < min_rows:
        raise EmptyInputError(f"{name}: needs at least {min_rows} row(s)")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatchError(f"{name}: contains non-finite values")
    return arr


def check_X_y(X, y):
    """Validate a feature matrix and 1-d or 2-d target against each other."""
    X = check_array(X, ndim=2, name="X")
    y = np.asarray(y, dtype=float)
    if y.ndim not in (1, 2):
        raise ShapeMismatchError(f"y: expected 1-d or 2-d targets, got {y.ndim}-d")
    if y.shape[0] != X.shape[0]:
        raise LengthMismatchError(
            f"X and y disagree on sample count: {X.shape[0]} vs {y.shape[0]}"
        )
    if not np.all(np.isfinite(y)):
        raise ShapeMismatchError("y: contains non-finite values")
    return X, y


def check_is_fitted(estimator, attribute: str):
    if not hasattr(estimator, attribute):
        raise RuntimeError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )


def check_seed(seed) -> int:
    """Require an explicit integer seed (no implicit randomness anywhere)."""
    if not isinstance(seed, (int, np.integer)) or isinstance(seed, bool):
        raise ValueError(f"seed must be an integer, got {seed!r}")
    return int(seed)


def rng_from(seed: int, *stream) -> np.random.Generator:
    """Deterministic generator for a (seed, substream...) key.

    Identical keys always yield identical generators, so work items seeded
    this way may be computed serially or in parallel with the same result.
    """
    return np.random.default_rng([check_seed(seed), *map(int, stream)])
