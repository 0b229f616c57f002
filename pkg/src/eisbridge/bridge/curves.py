"""Prediction of laboratory curves from a reconstructed Re/f curve.

One forest per target kind maps the Re/f curve values to the target curve
values; every target kind carries its own uniform grid definition.
"""

from __future__ import annotations

from typing import Dict, Mapping, Sequence, Union

import numpy as np

from ..base import BaseEstimator
from ..datamodel.types import CurveKind, SOURCE_KINDS, TimeCurve, VoltageCurve
from ..exceptions import GridMismatchError, NoDataError, UnknownFormatError
from ..mlcore.forest import RandomForestRegressor
from ..mlcore.serialize import canonical_params, forest_from_doc, forest_to_doc
from ..validation import check_is_fitted, rng_from

CURVESET_FORMAT = "curve-predictor-set"
CURVESET_VERSION = 1

Curve = Union[VoltageCurve, TimeCurve]


def _grid_def(curve: Curve) -> tuple:
    if isinstance(curve, VoltageCurve):
        return (float(curve.v_start), float(curve.v_step), int(curve.values.size))
    return (float(curve.t_start), float(curve.t_step), int(curve.values.size))


class CurvePredictorSet(BaseEstimator):
    """Forests predicting charge/discharge/relaxation curves from Re/f values."""

    def __init__(self, n_estimators=100, max_depth=None, min_samples_leaf=1,
                 max_features=1.0, subsample=1.0, bootstrap=True,
                 random_state=0, n_jobs=1):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.subsample = subsample
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    def fit(self, X, targets: Mapping[CurveKind, Sequence[Curve]]):
        """X holds one Re/f value row per sample; targets map kind to curves."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[0] == 0:
            raise NoDataError("no Re/f curve samples to fit")
        if not targets:
            raise NoDataError("no target curve kinds to fit")
        params = self.get_params()
        base_seed = params.pop("random_state")
        self.models_: Dict[CurveKind, RandomForestRegressor] = {}
        self.grids_: Dict[CurveKind, tuple] = {}
        for pos, kind in enumerate(sorted(targets, key=lambda k: CurveKind(k).value)):
            kind = CurveKind(kind)
            if kind not in SOURCE_KINDS:
                raise ValueError(f"{kind.value} is derived; predict its source curve instead")
            curves = list(targets[kind])
            if len(curves) != X.shape[0]:
                raise GridMismatchError(
                    f"{kind.value}: {len(curves)} curves for {X.shape[0]} samples"
                )
            grid_def = _grid_def(curves[0])
            for c in curves[1:]:
                if _grid_def(c) != grid_def:
                    raise GridMismatchError(f"{kind.value}: curves use different grids")
            Y = np.vstack([c.values for c in curves])
            seed = int(rng_from(base_seed, pos).integers(2**31 - 1))
            self.models_[kind] = RandomForestRegressor(random_state=seed, **params).fit(X, Y)
            self.grids_[kind] = grid_def
        return self

    def predict_matrix(self, X) -> Dict[CurveKind, np.ndarray]:
        check_is_fitted(self, "models_")
        X = np.asarray(X, dtype=float)
        return {kind: model.predict(X) for kind, model in self.models_.items()}

    def predict(self, re_f_values) -> Dict[CurveKind, Curve]:
        """Predict every target curve for a single Re/f curve."""
        rows = self.predict_matrix(np.asarray(re_f_values, dtype=float).reshape(1, -1))
        out: Dict[CurveKind, Curve] = {}
        for kind, mat in rows.items():
            start, step, _ = self.grids_[kind]
            if kind is CurveKind.RELAXATION_VT:
                out[kind] = TimeCurve(kind=kind, t_start=start, t_step=step, values=mat[0])
            else:
                out[kind] = VoltageCurve(kind=kind, v_start=start, v_step=step, values=mat[0])
        return out

    def to_doc(self) -> dict:
        check_is_fitted(self, "models_")
        return {
            "format": CURVESET_FORMAT,
            "version": CURVESET_VERSION,
            "params": canonical_params(self.get_params()),
            "kinds": [
                {
                    "kind": kind.value,
                    "grid": list(self.grids_[kind]),
                    "model": forest_to_doc(self.models_[kind]),
                }
                for kind in sorted(self.models_, key=lambda k: k.value)
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "CurvePredictorSet":
        if not isinstance(doc, dict) or doc.get("format") != CURVESET_FORMAT:
            raise UnknownFormatError(f"not a {CURVESET_FORMAT} document")
        if doc.get("version") != CURVESET_VERSION:
            raise UnknownFormatError(f"unsupported {CURVESET_FORMAT} version {doc.get('version')!r}")
        est = cls(**doc["params"])
        est.models_ = {}
        est.grids_ = {}
        for entry in doc["kinds"]:
            kind = CurveKind(entry["kind"])
            est.models_[kind] = forest_from_doc(entry["model"])
            start, step, count = entry["grid"]
            est.grids_[kind] = (float(start), float(step), int(count))
        return est
