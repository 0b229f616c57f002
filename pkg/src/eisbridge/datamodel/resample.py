"""Resampling of scattered (x, y) measurements onto uniform grids."""

from __future__ import annotations

import numpy as np

from ..exceptions import (
    GridOutOfRangeError,
    NonMonotonicXError,
    TooShortError,
)
from .types import CurveKind, TimeCurve, TIME_KINDS, VoltageCurve

_REL_TOL = 1e-9


def resample_curve(points, kind, start: float, step: float, count: int, *,
                   clamp: bool = False):
    """Linearly interpolate points onto a uniform grid.

    Parameters
    ----------
    points : array-like of shape (n, 2)
        Measured (x, y) pairs in any order. Exact duplicate pairs are
        collapsed; duplicate x with conflicting y is an error.
    kind : CurveKind
        Kind of the produced curve; selects voltage- or time-grid output.
    start, step, count
        Target grid definition.
    clamp : bool
        When true, grid points outside the measured x range take the nearest
        end value instead of raising.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise TooShortError("points must be an (n, 2) array of (x, y) pairs")
    if pts.shape[0] < 2:
        raise TooShortError("resampling needs at least two points")
    if not np.all(np.isfinite(pts)):
        raise NonMonotonicXError("points contain non-finite values")
    if count < 2:
        raise TooShortError("target grid needs at least two points")
    if step <= 0:
        raise NonMonotonicXError("step must be positive")

    pts = np.unique(pts, axis=0)  # sorts by x then y, drops exact duplicates
    x, y = pts[:, 0], pts[:, 1]
    if np.any(np.diff(x) <= 0):
        raise NonMonotonicXError("duplicate x with conflicting y values")

    xs = start + step * np.arange(count)
    span = max(x[-1] - x[0], abs(x[0]), 1.0)
    if not clamp and (xs[0] < x[0] - _REL_TOL * span or xs[-1] > x[-1] + _REL_TOL * span):
        raise GridOutOfRangeError(
            f"grid [{xs[0]}, {xs[-1]}] exceeds measured x range [{x[0]}, {x[-1]}]"
        )
    values = np.interp(xs, x, y)

    kind = CurveKind(kind)
    if kind in TIME_KINDS:
        return TimeCurve(kind=kind, t_start=start, t_step=step, values=values)
    return VoltageCurve(kind=kind, v_start=start, v_step=step, values=values)
