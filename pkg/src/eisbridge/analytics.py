"""Derived curves and distribution of relaxation times.

Differentiation uses first differences on the uniform grid: an n-point
input yields an (n-1)-point output whose grid starts one step after the
input grid. Wherever incremental capacity and differential voltage are both
defined they are exact reciprocals.

The DRT solver fits

    Z(w) ~ R_inf + sum_k gamma_k * dln(tau_k) / (1 + j*w*tau_k)

to the real and imaginary parts jointly, with Tikhonov smoothing on the
second difference of gamma. Nonnegativity is enforced by active-set
nonnegative least squares (Lawson-Hanson) on the stacked system, which
terminates in finitely many exactly-solved subproblems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datamodel.types import CurveKind, EisSpectrum, TimeCurve, VoltageCurve
from .exceptions import (
    EmptyGridError,
    GridOutOfRangeError,
    KindMismatchError,
    MissingImaginaryError,
    NonMonotonicGridError,
    SingularSystemError,
    TooShortError,
)

DV_MASK_EPS = 1e-9  # |dQ| below this marks the differential voltage undefined

_IC_KIND = {CurveKind.CHARGE_QV: CurveKind.CHARGE_IC, CurveKind.DISCHARGE_QV: CurveKind.DISCHARGE_IC}
_DV_KIND = {CurveKind.CHARGE_QV: CurveKind.CHARGE_DV, CurveKind.DISCHARGE_QV: CurveKind.DISCHARGE_DV}


def _smooth(values: np.ndarray, window: int) -> np.ndarray:
    if window <= 1:
        return values
    kernel = np.ones(int(window)) / int(window)
    return np.convolve(values, kernel, mode="same")


def _check_qv(curve: VoltageCurve, op: str) -> None:
    if curve.kind not in _IC_KIND:
        raise KindMismatchError(f"{op} needs a charge_qv or discharge_qv curve, got {curve.kind.value}")
    if curve.values.size < 2:
        raise TooShortError(f"{op} needs at least two points")


def ic_curve(curve: VoltageCurve, smooth: int = 1) -> VoltageCurve:
    """Incremental capacity dQ/dV of a capacity/voltage curve."""
    _check_qv(curve, "ic_curve")
    values = _smooth(np.diff(curve.values) / curve.v_step, smooth)
    return VoltageCurve(
        kind=_IC_KIND[curve.kind],
        v_start=curve.v_start + curve.v_step,
        v_step=curve.v_step,
        values=values,
    )


def dv_curve(curve: VoltageCurve, smooth: int = 1) -> VoltageCurve:
    """Differential voltage dV/dQ; flat capacity steps are masked as NaN."""
    _check_qv(curve, "dv_curve")
    dq = np.diff(curve.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.where(np.abs(dq) < DV_MASK_EPS, np.nan, curve.v_step / dq)
    return VoltageCurve(
        kind=_DV_KIND[curve.kind],
        v_start=curve.v_start + curve.v_step,
        v_step=curve.v_step,
        values=_smooth(values, smooth),
    )


def relaxation_derivative(curve: TimeCurve) -> TimeCurve:
    """Voltage slope dV/dt of a relaxation curve."""
    if curve.kind is not CurveKind.RELAXATION_VT:
        raise KindMismatchError(f"relaxation_derivative needs relaxation_vt, got {curve.kind.value}")
    if curve.values.size < 2:
        raise TooShortError("relaxation_derivative needs at least two points")
    return TimeCurve(
        kind=CurveKind.RELAXATION_DVDT,
        t_start=curve.t_start + curve.t_step,
        t_step=curve.t_step,
        values=np.diff(curve.values) / curve.t_step,
    )


@dataclass(frozen=True)
class DrtResult:
    tau_s: np.ndarray       # relaxation-time grid
    gamma: np.ndarray       # distribution, mOhm per ln(tau) unit
    r_inf: float            # fitted series resistance, mOhm
    residual_norm: float    # euclidean norm of the data residual
    lam: float
    iterations: int

    def polarization_mohm(self) -> float:
        """Total polarization resistance: integral of gamma over ln(tau)."""
        w = np.gradient(np.log(self.tau_s))
        return float(np.sum(self.gamma * w))


def make_tau_grid(grid, n_points: int = 60) -> np.ndarray:
    """Log-spaced relaxation times spanning the measured frequency window."""
    freqs = grid.frequencies
    lo = 1.0 / (2.0 * np.pi * freqs[-1])
    hi = 1.0 / (2.0 * np.pi * freqs[0])
    if n_points < 2:
        raise EmptyGridError("tau grid needs at least two points")
    return np.logspace(np.log10(lo), np.log10(hi), int(n_points))


def _nnls(C: np.ndarray, d: np.ndarray, max_iter: int = 200,
          tol: float = 1e-10):
    """Lawson-Hanson nonnegative least squares: min |Cx - d|, x >= 0.

    Active-set method; every subproblem is solved exactly, so it terminates
    after finitely many support changes. Ties in the entering variable go to
    the lowest index, keeping results fully deterministic.
    """
    n = C.shape[1]
    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    wscale = max(1.0, float(np.max(np.abs(C.T @ d)))) if d.size else 1.0
    iterations = 0
    for iterations in range(1, int(max_iter) + 1):
        w = C.T @ (d - C @ x)
        w_free = np.where(passive, -np.inf, w)
        j = int(np.argmax(w_free))
        if w_free[j] <= tol * wscale:
            iterations -= 1
            break
        passive[j] = True
        # inner loop: shrink the passive set until its exact LS solution
        # is feasible; each pass zeroes at least one variable
        for _ in range(n + 1):
            idx = np.flatnonzero(passive)
            z = np.linalg.lstsq(C[:, idx], d, rcond=None)[0]
            if np.all(z > 0.0):
                x[:] = 0.0
                x[idx] = z
                break
            at_bound = z <= 0.0
            ratios = x[idx][at_bound] / (x[idx][at_bound] - z[at_bound])
            alpha = float(np.min(ratios))
            x[idx] += alpha * (z - x[idx])
            drop = idx[x[idx] <= 1e-14]
            passive[drop] = False
            x[drop] = 0.0
    return x, iterations


def drt(spectrum: EisSpectrum, tau_grid=None, lam: float = 1e-3, *,
        max_iter: int = 200, tol: float = 1e-10) -> DrtResult:
    """Distribution of relaxation times of an impedance spectrum.

    Parameters
    ----------
    spectrum : EisSpectrum
        Must carry imaginary values.
    tau_grid : array-like, optional
        Strictly increasing relaxation times; must span at least
        [1/(2*pi*f_max), 1/(2*pi*f_min)]. Default: 60 log-spaced points
        over exactly that span.
    lam : float
        Tikhonov weight on the second difference of gamma.
    max_iter, tol : int, float
        Cap and relative dual-feasibility tolerance of the solver.
    """
    if spectrum.im_mohm is None:
        raise MissingImaginaryError("DRT needs the imaginary impedance part")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    freqs = spectrum.grid.frequencies
    tau = make_tau_grid(spectrum.grid) if tau_grid is None else np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size < 2:
        raise EmptyGridError("tau grid needs at least two points")
    if tau[0] <= 0 or np.any(np.diff(tau) <= 0):
        raise NonMonotonicGridError("tau grid must be positive and strictly increasing")
    lo = 1.0 / (2.0 * np.pi * freqs[-1])
    hi = 1.0 / (2.0 * np.pi * freqs[0])
    if tau[0] > lo * (1 + 1e-9) or tau[-1] < hi * (1 - 1e-9):
        raise GridOutOfRangeError(
            f"tau grid [{tau[0]:.3g}, {tau[-1]:.3g}] s must span [{lo:.3g}, {hi:.3g}] s"
        )

    w = 2.0 * np.pi * freqs
    wt = np.outer(w, tau)
    dlntau = np.gradient(np.log(tau))
    denom = 1.0 + wt * wt
    # unknowns x = [r_inf, gamma_0 .. gamma_{m-1}], all nonnegative
    m = tau.size
    a_re = np.hstack([np.ones((freqs.size, 1)), dlntau / denom])
    a_im = np.hstack([np.zeros((freqs.size, 1)), -dlntau * wt / denom])
    A = np.vstack([a_re, a_im])
    b = np.concatenate([spectrum.re_mohm, spectrum.im_mohm])

    L = np.zeros((max(m - 2, 0), m + 1))
    for i in range(m - 2):
        L[i, i + 1:i + 4] = (1.0, -2.0, 1.0)

    # Tikhonov rows fold into the least-squares system: the minimizer of
    # |Ax-b|^2 + lam*|Lx|^2 solves the stacked problem exactly
    C = np.vstack([A, np.sqrt(lam) * L]) if L.size else A
    d = np.concatenate([b, np.zeros(L.shape[0])])
    if not (np.all(np.isfinite(C)) and np.all(np.isfinite(d))):
        raise SingularSystemError("DRT system contains non-finite values")

    x, iterations = _nnls(C, d, max_iter=int(max_iter), tol=tol)

    residual = A @ x - b
    return DrtResult(
        tau_s=tau,
        gamma=x[1:],
        r_inf=float(x[0]),
        residual_norm=float(np.linalg.norm(residual)),
        lam=float(lam),
        iterations=iterations,
    )
