"""Diagnosis and prognosis from laboratory-format curves.

The feature pipeline: per checkup, laboratory curves (directly measured or
predicted from a field reading) are differenced against a reference checkup
of the same cell; per curve kind, the best two-point feature (BTPF) is the
absolute difference between two grid values whose training-set Pearson
correlation against the target is largest in magnitude. One feature per
kind feeds a regression forest predicting remaining capacity (diagnosis)
or remaining life (prognosis).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .analytics import dv_curve, ic_curve, relaxation_derivative
from .base import BaseEstimator
from .datamodel.types import CellHistory, CurveKind, EisSpectrum, RptRecord, TimeCurve, VoltageCurve
from .exceptions import (
    AllConstantError,
    ConstantInputError,
    DataValidationError,
    GridMismatchError,
    KindMismatchError,
    LengthMismatchError,
    MissingFieldError,
    MissingReferenceError,
    NoDataError,
    UnknownFormatError,
)
from .mlcore.forest import RandomForestRegressor
from .mlcore.serialize import canonical_params, forest_from_doc, forest_to_doc
from .validation import check_is_fitted

logger = logging.getLogger(__name__)

PHM_FORMAT = "phm-model"
PHM_VERSION = 1

# kinds usable as BTPF sources, in canonical order
FEATURE_KINDS = (
    CurveKind.RE_F,
    CurveKind.CHARGE_QV,
    CurveKind.CHARGE_IC,
    CurveKind.CHARGE_DV,
    CurveKind.DISCHARGE_QV,
    CurveKind.DISCHARGE_IC,
    CurveKind.DISCHARGE_DV,
    CurveKind.RELAXATION_VT,
)


@dataclass(frozen=True)
class CurveSeries:
    """A named curve as plain (x, values) arrays."""

    kind: CurveKind
    x: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if x.shape != v.shape or x.ndim != 1:
            raise LengthMismatchError(
                f"{CurveKind(self.kind).value}: x and values must be equal-length vectors"
            )
        x = x.copy()
        v = v.copy()
        x.flags.writeable = False
        v.flags.writeable = False
        object.__setattr__(self, "kind", CurveKind(self.kind))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "values", v)


Bundle = Dict[CurveKind, CurveSeries]


def curve_bundle(
    spectrum: Optional[EisSpectrum],
    charge_qv: Optional[VoltageCurve] = None,
    discharge_qv: Optional[VoltageCurve] = None,
    relaxation: Optional[TimeCurve] = None,
) -> Bundle:
    """Assemble the feature curves available from one set of lab data."""
    bundle: Bundle = {}
    if spectrum is not None:
        bundle[CurveKind.RE_F] = CurveSeries(
            kind=CurveKind.RE_F, x=spectrum.grid.frequencies, values=spectrum.re_mohm
        )
    for qv in (charge_qv, discharge_qv):
        if qv is None:
            continue
        bundle[qv.kind] = CurveSeries(kind=qv.kind, x=qv.voltages, values=qv.values)
        ic = ic_curve(qv)
        dv = dv_curve(qv)
        bundle[ic.kind] = CurveSeries(kind=ic.kind, x=ic.voltages, values=ic.values)
        bundle[dv.kind] = CurveSeries(kind=dv.kind, x=dv.voltages, values=dv.values)
    if relaxation is not None:
        bundle[CurveKind.RELAXATION_VT] = CurveSeries(
            kind=CurveKind.RELAXATION_VT, x=relaxation.times, values=relaxation.values
        )
    return bundle


def record_bundle(record: RptRecord, soc_l: float) -> Bundle:
    """Feature curves of one checkup's measured laboratory data."""
    spectrum = record.lab_spectrum_at(soc_l) if record.lab_spectra else None
    return curve_bundle(
        spectrum,
        charge_qv=record.charge_qv,
        discharge_qv=record.discharge_qv,
        relaxation=record.relaxation,
    )


def difference_bundle(bundle: Bundle, reference: Bundle,
                      kinds: Optional[Sequence[CurveKind]] = None) -> Bundle:
    """Per-kind difference curves (bundle minus reference)."""
    use = [CurveKind(k) for k in kinds] if kinds is not None else sorted(
        set(bundle) & set(reference), key=lambda k: k.value
    )
    out: Bundle = {}
    for kind in use:
        if kind not in bundle or kind not in reference:
            raise MissingReferenceError(f"curve kind {kind.value} absent from bundle or reference")
        cur, ref = bundle[kind], reference[kind]
        if cur.x.shape != ref.x.shape or not np.array_equal(cur.x, ref.x):
            raise GridMismatchError(f"{kind.value}: bundle and reference grids differ")
        out[kind] = CurveSeries(kind=kind, x=cur.x, values=cur.values - ref.values)
    return out


def difference_curves(history: CellHistory, reference_rpt: int = 0,
                      soc_l: float | None = None,
                      kinds: Optional[Sequence[CurveKind]] = None) -> Dict[int, Bundle]:
    """Difference bundles of every checkup against one reference checkup."""
    if soc_l is None and history.rpts[0].lab_spectra:
        soc_l = next(iter(history.rpts[0].lab_spectra))
    try:
        ref_record = history.rpt(reference_rpt)
    except MissingFieldError:
        raise MissingReferenceError(
            f"cell {history.cell_id} has no reference checkup {reference_rpt}"
        ) from None
    reference = record_bundle(ref_record, soc_l)
    out: Dict[int, Bundle] = {}
    for record in history.rpts:
        bundle = record_bundle(record, soc_l)
        out[record.rpt_index] = difference_bundle(bundle, reference, kinds)
    return out


# -- best two-point features ---------------------------------------------------


@dataclass(frozen=True)
class BtpfSpec:
    """Selected feature: |values[index_i] - values[index_j]| of one kind."""

    curve_kind: CurveKind
    index_i: int
    index_j: int
    training_correlation: float
    x_i: float
    x_j: float
    n_candidates: int

    def __post_init__(self):
        object.__setattr__(self, "curve_kind", CurveKind(self.curve_kind))
        if self.index_i == self.index_j:
            raise ValueError("BTPF indices must differ")


def select_btpf(values: np.ndarray, x: np.ndarray, kind: CurveKind,
                targets: np.ndarray) -> BtpfSpec:
    """Scan all index pairs of a difference-curve matrix for the BTPF.

    Parameters
    ----------
    values : (n_samples, m) array
        One difference curve per training sample. NaN marks masked points;
        any pair touching a NaN or yielding a constant feature is skipped.
    x : (m,) array
        Physical grid of the curve (V, Hz, or s), used for annotation.
    kind : CurveKind
    targets : (n_samples,) array
        Diagnosis or prognosis target per sample.

    Ties on |correlation| keep the smallest (i, j) lexicographically.
    """
    V = np.asarray(values, dtype=float)
    t = np.asarray(targets, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    if V.ndim != 2:
        raise LengthMismatchError("values must be a 2-d matrix")
    n, m = V.shape
    if t.size != n:
        raise LengthMismatchError(f"{n} curves vs {t.size} targets")
    if n < 2:
        raise NoDataError("BTPF selection needs at least two samples")
    if x.size != m:
        raise LengthMismatchError(f"grid has {x.size} points for {m}-point curves")
    if m < 2:
        raise NoDataError("BTPF selection needs at least two grid points")
    tc = t - t.mean()
    st = float(np.sqrt(np.sum(tc * tc)))
    if st == 0.0:
        raise ConstantInputError("targets are constant; correlation undefined")

    best_abs = -1.0
    best = None
    n_candidates = m * (m - 1) // 2
    for i in range(m - 1):
        D = np.abs(V[:, i + 1:] - V[:, [i]])  # (n, m-i-1)
        finite = np.all(np.isfinite(D), axis=0)
        dc = D - D.mean(axis=0)
        sd = np.sqrt(np.sum(dc * dc, axis=0))
        ok = finite & (sd > 0.0)
        if not np.any(ok):
            continue
        with np.errstate(invalid="ignore", divide="ignore"):
            r = (tc @ dc) / (st * sd)
        r[~ok] = np.nan
        j_rel = int(np.nanargmax(np.abs(r)))
        if abs(r[j_rel]) > best_abs:
            best_abs = abs(r[j_rel])
            best = (i, i + 1 + j_rel, float(r[j_rel]))
    if best is None:
        raise AllConstantError(f"{CurveKind(kind).value}: every candidate pair is constant or masked")
    i, j, corr = best
    return BtpfSpec(
        curve_kind=kind,
        index_i=i,
        index_j=j,
        training_correlation=corr,
        x_i=float(x[i]),
        x_j=float(x[j]),
        n_candidates=n_candidates,
    )


def extract_btpf(series: CurveSeries, spec: BtpfSpec) -> float:
    if series.kind is not spec.curve_kind:
        raise KindMismatchError(
            f"feature wants {spec.curve_kind.value}, curve is {series.kind.value}"
        )
    if max(spec.index_i, spec.index_j) >= series.values.size:
        raise LengthMismatchError(
            f"{series.kind.value}: feature indices {spec.index_i},{spec.index_j} "
            f"exceed curve length {series.values.size}"
        )
    value = abs(float(series.values[spec.index_i] - series.values[spec.index_j]))
    if not np.isfinite(value):
        raise DataValidationError(
            f"{series.kind.value}: masked value at selected feature points"
        )
    return value


# -- life targets ---------------------------------------------------------------


@dataclass(frozen=True)
class LifeTarget:
    """End of life and per-checkup remaining life for one cell."""

    cell_id: str
    unit: str
    threshold: float
    initial_capacity_ah: float
    crossed: bool
    eol_age: Optional[float]
    remaining: Optional[Mapping[int, float]]


def compute_life_target(history: CellHistory, threshold: float = 0.8,
                        unit: str = "days") -> LifeTarget:
    """Interpolated end of life at the capacity-threshold crossing.

    A cell whose capacity never reaches threshold * initial capacity within
    its history is returned with crossed=False (excluded from prognosis
    training rather than an error).
    """
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    ages = []
    for r in history.rpts:
        age = r.age(unit)
        if age is None:
            raise MissingFieldError(
                f"cell {history.cell_id} rpt {r.rpt_index}: no {unit} age marker"
            )
        ages.append(float(age))
    if any(b <= a for a, b in zip(ages, ages[1:])):
        raise MissingFieldError(f"cell {history.cell_id}: {unit} markers must increase")
    caps = [r.capacity_ah for r in history.rpts]
    cap0 = caps[0]
    limit = threshold * cap0

    eol = None
    for k, cap in enumerate(caps):
        if cap <= limit:
            if k == 0:
                eol = ages[0]
            else:
                frac = (caps[k - 1] - limit) / (caps[k - 1] - cap)
                eol = ages[k - 1] + frac * (ages[k] - ages[k - 1])
            break
    if eol is None:
        return LifeTarget(
            cell_id=history.cell_id, unit=unit, threshold=threshold,
            initial_capacity_ah=cap0, crossed=False, eol_age=None, remaining=None,
        )
    remaining = {
        r.rpt_index: max(eol - age, 0.0) for r, age in zip(history.rpts, ages)
    }
    return LifeTarget(
        cell_id=history.cell_id, unit=unit, threshold=threshold,
        initial_capacity_ah=cap0, crossed=True, eol_age=eol, remaining=remaining,
    )


# -- model ----------------------------------------------------------------------


class PhmModel(BaseEstimator):
    """Forest over one BTPF per curve kind.

    ``fit`` takes difference bundles (one per training sample) and targets;
    it selects the BTPF of every kind present in all bundles, then fits the
    forest on the feature matrix.
    """

    def __init__(self, task="diagnosis", kinds=None, n_estimators=100,
                 max_depth=None, min_samples_leaf=1, max_features=1.0,
                 subsample=1.0, bootstrap=True, random_state=0, n_jobs=1):
        self.task = task
        self.kinds = kinds
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.subsample = subsample
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _forest_params(self):
        params = self.get_params()
        params.pop("task")
        params.pop("kinds")
        return params

    def fit(self, bundles: Sequence[Bundle], targets):
        if self.task not in ("diagnosis", "prognosis"):
            raise ValueError(f"task must be diagnosis or prognosis, got {self.task!r}")
        targets = np.asarray(targets, dtype=float).ravel()
        if len(bundles) == 0:
            raise NoDataError("no training bundles")
        if targets.size != len(bundles):
            raise LengthMismatchError(f"{len(bundles)} bundles vs {targets.size} targets")

        if self.kinds is not None:
            kinds = [CurveKind(k) for k in self.kinds]
        else:
            common = set(bundles[0])
            for b in bundles[1:]:
                common &= set(b)
            kinds = [k for k in FEATURE_KINDS if k in common]
        if not kinds:
            raise NoDataError("no curve kind is present in every training bundle")

        specs = []
        for kind in kinds:
            x = bundles[0][kind].x
            rows = []
            for b in bundles:
                if kind not in b:
                    raise MissingReferenceError(f"a training bundle lacks {kind.value}")
                if not np.array_equal(b[kind].x, x):
                    raise GridMismatchError(f"{kind.value}: training bundles mix grids")
                rows.append(b[kind].values)
            specs.append(select_btpf(np.vstack(rows), x, kind, targets))
        self.btpf_specs_ = specs
        self.kinds_ = kinds

        X = np.array([
            [extract_btpf(b[s.curve_kind], s) for s in specs] for b in bundles
        ])
        self.forest_ = RandomForestRegressor(**self._forest_params()).fit(X, targets)
        return self

    def features(self, bundle: Bundle) -> np.ndarray:
        check_is_fitted(self, "btpf_specs_")
        feats = []
        for spec in self.btpf_specs_:
            if spec.curve_kind not in bundle:
                raise MissingReferenceError(f"bundle lacks {spec.curve_kind.value}")
            feats.append(extract_btpf(bundle[spec.curve_kind], spec))
        return np.asarray(feats, dtype=float)

    def predict(self, bundle: Bundle) -> float:
        return float(self.forest_.predict(self.features(bundle).reshape(1, -1))[0])

    def to_doc(self) -> dict:
        check_is_fitted(self, "btpf_specs_")
        params = canonical_params(self.get_params())
        params["kinds"] = [k.value for k in self.kinds_]
        return {
            "format": PHM_FORMAT,
            "version": PHM_VERSION,
            "params": params,
            "features": [
                {
                    "kind": s.curve_kind.value,
                    "index_i": s.index_i,
                    "index_j": s.index_j,
                    "training_correlation": s.training_correlation,
                    "x_i": s.x_i,
                    "x_j": s.x_j,
                    "n_candidates": s.n_candidates,
                }
                for s in self.btpf_specs_
            ],
            "model": forest_to_doc(self.forest_),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "PhmModel":
        if not isinstance(doc, dict) or doc.get("format") != PHM_FORMAT:
            raise UnknownFormatError(f"not a {PHM_FORMAT} document")
        if doc.get("version") != PHM_VERSION:
            raise UnknownFormatError(f"unsupported {PHM_FORMAT} version {doc.get('version')!r}")
        model = cls(**doc["params"])
        model.kinds_ = [CurveKind(k) for k in doc["params"]["kinds"]]
        model.btpf_specs_ = [
            BtpfSpec(
                curve_kind=CurveKind(f["kind"]),
                index_i=int(f["index_i"]),
                index_j=int(f["index_j"]),
                training_correlation=float(f["training_correlation"]),
                x_i=float(f["x_i"]),
                x_j=float(f["x_j"]),
                n_candidates=int(f["n_candidates"]),
            )
            for f in doc["features"]
        ]
        model.forest_ = forest_from_doc(doc["model"])
        return model


# -- training-set assembly --------------------------------------------------------


def diagnosis_training_set(histories: Sequence[CellHistory], soc_l: float,
                           reference_rpt: int = 0) -> Tuple[list, np.ndarray]:
    """One sample per checkup: difference bundle and remaining capacity."""
    bundles, targets = [], []
    for history in histories:
        diffs = difference_curves(history, reference_rpt=reference_rpt, soc_l=soc_l)
        for record in history.rpts:
            bundles.append(diffs[record.rpt_index])
            targets.append(record.capacity_ah)
    if not bundles:
        raise NoDataError("no diagnosis training samples")
    return bundles, np.asarray(targets)


def prognosis_training_set(histories: Sequence[CellHistory], soc_l: float,
                           early_rpt: int, reference_rpt: int = 0,
                           threshold: float = 0.8, unit: str = "days") -> Tuple[list, np.ndarray]:
    """One sample per cell: early-checkup difference bundle and remaining life."""
    bundles, targets = [], []
    skipped = 0
    for history in histories:
        life = compute_life_target(history, threshold=threshold, unit=unit)
        if not life.crossed:
            skipped += 1
            continue
        diffs = difference_curves(history, reference_rpt=reference_rpt, soc_l=soc_l)
        if early_rpt not in diffs:
            raise MissingReferenceError(
                f"cell {history.cell_id} has no checkup {early_rpt} for prognosis features"
            )
        bundles.append(diffs[early_rpt])
        targets.append(life.remaining[early_rpt])
    if skipped:
        logger.info("prognosis: excluded %d cell(s) that never cross end of life", skipped)
    if not bundles:
        raise NoDataError("no prognosis training samples (no cell crosses end of life)")
    return bundles, np.asarray(targets)
