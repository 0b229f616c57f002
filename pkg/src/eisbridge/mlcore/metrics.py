"""Error metrics and correlation.

All three error metrics follow the conventional definitions on paired
samples (y true, y_hat predicted):

    MAE  = (1/n) * sum |y_i - yhat_i|
    MAPE = (100/n) * sum |(y_i - yhat_i) / y_i|      (percent)
    RMSE = sqrt((1/n) * sum (y_i - yhat_i)^2)
"""

from __future__ import annotations

import numpy as np

from ..exceptions import (
    ConstantInputError,
    EmptyInputError,
    LengthMismatchError,
    ZeroReferenceError,
)


def _paired(y_true, y_pred):
    yt = np.asarray(y_true, dtype=float).ravel()
    yp = np.asarray(y_pred, dtype=float).ravel()
    if yt.size == 0:
        raise EmptyInputError("metrics need at least one sample")
    if yt.size != yp.size:
        raise LengthMismatchError(
            f"length mismatch: {yt.size} true vs {yp.size} predicted"
        )
    return yt, yp


def mae(y_true, y_pred) -> float:
    yt, yp = _paired(y_true, y_pred)
    return float(np.mean(np.abs(yt - yp)))


def rmse(y_true, y_pred) -> float:
    yt, yp = _paired(y_true, y_pred)
    return float(np.sqrt(np.mean((yt - yp) ** 2)))


def mape(y_true, y_pred) -> float:
    """Mean absolute percentage error, in percent."""
    yt, yp = _paired(y_true, y_pred)
    if np.any(yt == 0.0):
        raise ZeroReferenceError("MAPE is undefined when a true value is zero")
    return float(100.0 * np.mean(np.abs((yt - yp) / yt)))


def pearson(x, y) -> float:
    """Pearson correlation coefficient of two equal-length vectors."""
    xv = np.asarray(x, dtype=float).ravel()
    yv = np.asarray(y, dtype=float).ravel()
    if xv.size != yv.size:
        raise LengthMismatchError(f"length mismatch: {xv.size} vs {yv.size}")
    if xv.size < 2:
        raise EmptyInputError("pearson needs at least two samples")
    dx = xv - xv.mean()
    dy = yv - yv.mean()
    sx = float(np.sqrt(np.sum(dx * dx)))
    sy = float(np.sqrt(np.sum(dy * dy)))
    if sx == 0.0 or sy == 0.0:
        raise ConstantInputError("pearson is undefined for a constant input")
    return float(np.dot(dx, dy) / (sx * sy))
