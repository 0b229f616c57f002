"""Field-to-laboratory impedance translation.

One bank serves one laboratory SOC target. It holds a grid of forest
models, one per (frequency role, field SOC bin, field Re bin) cell, each
mapping a field reading (Re, T, SOC) to the laboratory Re at the bank's
target SOC. Cells without training pairs stay absent; lookups falling into
an absent cell fall back to the nearest populated Re bin in the same SOC
row and are flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from ..base import BaseEstimator
from ..exceptions import NoDataError, NoModelAvailableError, UnknownFormatError
from ..mlcore.forest import RandomForestRegressor
from ..mlcore.serialize import canonical_params, forest_from_doc, forest_to_doc
from ..validation import check_is_fitted, rng_from
from .binning import ReBinning, SocBinning, assign_bins

ROLES = ("f1", "f2")

BANK_FORMAT = "translation-bank"
BANK_VERSION = 1


@dataclass(frozen=True)
class TranslationPair:
    """One training pair: a field reading and its laboratory target."""

    role: str          # "f1" or "f2"
    re_f_mohm: float
    soc_f: float
    t_f_c: float
    re_l_mohm: float

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")


class TranslationBank(BaseEstimator):
    """Interval-routed forests translating field Re readings to lab Re.

    Parameters
    ----------
    target_soc_l : float
        Laboratory SOC this bank translates to.
    re_binning_f1, re_binning_f2 : ReBinning
        Impedance intervals per frequency role.
    n_estimators, max_depth, min_samples_leaf, max_features, subsample,
    bootstrap : forest hyperparameters shared by every cell model.
    random_state : int
        Master seed; each cell derives its own seed from its coordinates.
    """

    def __init__(self, target_soc_l, re_binning_f1, re_binning_f2,
                 n_estimators=100, max_depth=None, min_samples_leaf=1,
                 max_features=1.0, subsample=1.0, bootstrap=True,
                 random_state=0, n_jobs=1):
        self.target_soc_l = target_soc_l
        self.re_binning_f1 = re_binning_f1
        self.re_binning_f2 = re_binning_f2
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.subsample = subsample
        self.bootstrap = bootstrap
        self.random_state = random_state
        self.n_jobs = n_jobs

    # -- helpers ------------------------------------------------------------

    def _re_binning(self, role: str) -> ReBinning:
        return self.re_binning_f1 if role == "f1" else self.re_binning_f2

    def _forest_params(self) -> dict:
        return dict(
            n_estimators=self.n_estimators,
            max_depth=self.max_depth,
            min_samples_leaf=self.min_samples_leaf,
            max_features=self.max_features,
            subsample=self.subsample,
            bootstrap=self.bootstrap,
            n_jobs=self.n_jobs,
        )

    # -- fitting ------------------------------------------------------------

    def fit(self, pairs: Sequence[TranslationPair]):
        soc_binning = SocBinning()
        buckets: Dict[Tuple[str, int, int], list] = {}
        for p in pairs:
            if p.role not in ROLES:
                raise ValueError(f"unknown role {p.role!r}")
            ass = assign_bins(p.soc_f, p.re_f_mohm, soc_binning, self._re_binning(p.role))
            buckets.setdefault((p.role, ass.soc_bin, ass.re_bin), []).append(p)
        if not buckets:
            raise NoDataError("no training pairs")

        self.soc_binning_ = soc_binning
        self.models_: Dict[Tuple[str, int, int], RandomForestRegressor] = {}
        self.counts_: Dict[Tuple[str, int, int], int] = {}
        for key in sorted(buckets):
            role, soc_bin, re_bin = key
            rows = buckets[key]
            X = np.array([[p.re_f_mohm, p.t_f_c, p.soc_f] for p in rows])
            y = np.array([p.re_l_mohm for p in rows])
            seed = int(
                rng_from(self.random_state, ROLES.index(role), soc_bin, re_bin)
                .integers(2**31 - 1)
            )
            model = RandomForestRegressor(random_state=seed, **self._forest_params())
            self.models_[key] = model.fit(X, y)
            self.counts_[key] = len(rows)
        return self

    # -- prediction ----------------------------------------------------------

    def predict(self, re_f_mohm: float, soc_f: float, t_f_c: float, role: str):
        """Translate one field reading; returns (re_l_mohm, flags)."""
        check_is_fitted(self, "models_")
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {role!r}")
        ass = assign_bins(soc_f, re_f_mohm, self.soc_binning_, self._re_binning(role))
        flags = {"out_of_range": ass.out_of_range, "fallback_re_bin": None}
        key = (role, ass.soc_bin, ass.re_bin)
        if key not in self.models_:
            populated = [
                rb for (r, sb, rb) in self.models_ if r == role and sb == ass.soc_bin
            ]
            if not populated:
                raise NoModelAvailableError(
                    f"no {role} model for SOC bin {ass.soc_bin} "
                    f"(field SOC {soc_f:.3f}); bank row is empty"
                )
            nearest = min(populated, key=lambda rb: (abs(rb - ass.re_bin), rb))
            flags["fallback_re_bin"] = nearest
            key = (role, ass.soc_bin, nearest)
        x = np.array([[re_f_mohm, t_f_c, soc_f]])
        return float(self.models_[key].predict(x)[0]), flags

    # -- serialization --------------------------------------------------------

    def to_doc(self) -> dict:
        check_is_fitted(self, "models_")
        params = canonical_params(self.get_params())
        params["re_binning_f1"] = list(self.re_binning_f1.edges)
        params["re_binning_f2"] = list(self.re_binning_f2.edges)
        return {
            "format": BANK_FORMAT,
            "version": BANK_VERSION,
            "params": params,
            "cells": [
                {
                    "role": role,
                    "soc_bin": soc_bin,
                    "re_bin": re_bin,
                    "n_samples": self.counts_[(role, soc_bin, re_bin)],
                    "model": forest_to_doc(self.models_[(role, soc_bin, re_bin)]),
                }
                for (role, soc_bin, re_bin) in sorted(self.models_)
            ],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "TranslationBank":
        if not isinstance(doc, dict) or doc.get("format") != BANK_FORMAT:
            raise UnknownFormatError(f"not a {BANK_FORMAT} document")
        if doc.get("version") != BANK_VERSION:
            raise UnknownFormatError(f"unsupported {BANK_FORMAT} version {doc.get('version')!r}")
        params = dict(doc["params"])
        params["re_binning_f1"] = ReBinning(edges=tuple(params["re_binning_f1"]))
        params["re_binning_f2"] = ReBinning(edges=tuple(params["re_binning_f2"]))
        bank = cls(**params)
        bank.soc_binning_ = SocBinning()
        bank.models_ = {}
        bank.counts_ = {}
        for cell in doc["cells"]:
            key = (cell["role"], int(cell["soc_bin"]), int(cell["re_bin"]))
            bank.models_[key] = forest_from_doc(cell["model"])
            bank.counts_[key] = int(cell["n_samples"])
        return bank
