"""Laboratory Re/f curve reconstruction from two translated Re values."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..base import BaseEstimator
from ..datamodel.types import EisSpectrum, FrequencyGrid, Provenance
from ..exceptions import GridMismatchError, NoDataError, UnknownFormatError
from ..mlcore.forest import RandomForestRegressor
from ..mlcore.serialize import canonical_params, forest_from_doc, forest_to_doc
from ..validation import check_is_fitted

REFCURVE_FORMAT = "refcurve-model"
REFCURVE_VERSION = 1


class RefCurveModel(BaseEstimator):
    """Forest mapping (Re at f1, Re at f2) to the full laboratory Re/f curve."""

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

    def fit(self, X, curves: Sequence[EisSpectrum]):
        """X holds one (re1, re2) row per laboratory curve."""
        if len(curves) == 0:
            raise NoDataError("no laboratory curves to fit")
        grid = curves[0].grid
        for c in curves[1:]:
            if not np.array_equal(c.grid.frequencies, grid.frequencies):
                raise GridMismatchError("laboratory curves use different frequency grids")
        socs = {round(c.soc, 9) for c in curves}
        temps = {round(c.temp_c, 9) for c in curves}
        if len(socs) != 1 or len(temps) != 1:
            raise GridMismatchError("laboratory curves mix SOC or temperature conditions")
        Y = np.vstack([c.re_mohm for c in curves])
        self.grid_ = grid
        self.soc_l_ = float(curves[0].soc)
        self.t_l_c_ = float(curves[0].temp_c)
        self.forest_ = RandomForestRegressor(**self.get_params()).fit(np.asarray(X, dtype=float), Y)
        return self

    def predict_matrix(self, X) -> np.ndarray:
        check_is_fitted(self, "forest_")
        return self.forest_.predict(np.asarray(X, dtype=float))

    def predict(self, re1_mohm: float, re2_mohm: float) -> EisSpectrum:
        values = self.predict_matrix([[re1_mohm, re2_mohm]])[0]
        return EisSpectrum(
            grid=self.grid_,
            re_mohm=values,
            im_mohm=None,
            soc=self.soc_l_,
            temp_c=self.t_l_c_,
            provenance=Provenance.LAB,
        )

    def to_doc(self) -> dict:
        check_is_fitted(self, "forest_")
        return {
            "format": REFCURVE_FORMAT,
            "version": REFCURVE_VERSION,
            "params": canonical_params(self.get_params()),
            "grid_hz": self.grid_.frequencies.tolist(),
            "soc_l": self.soc_l_,
            "t_l_c": self.t_l_c_,
            "model": forest_to_doc(self.forest_),
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RefCurveModel":
        if not isinstance(doc, dict) or doc.get("format") != REFCURVE_FORMAT:
            raise UnknownFormatError(f"not a {REFCURVE_FORMAT} document")
        if doc.get("version") != REFCURVE_VERSION:
            raise UnknownFormatError(f"unsupported {REFCURVE_FORMAT} version {doc.get('version')!r}")
        model = cls(**doc["params"])
        model.grid_ = FrequencyGrid(np.asarray(doc["grid_hz"], dtype=float))
        model.soc_l_ = float(doc["soc_l"])
        model.t_l_c_ = float(doc["t_l_c"])
        model.forest_ = forest_from_doc(doc["model"])
        return model
