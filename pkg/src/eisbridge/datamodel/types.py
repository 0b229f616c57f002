"""Domain types for impedance spectra, curves, and checkup records.

All types are immutable after construction: arrays are copied and marked
read-only, and every invariant (positive grids, matching lengths, ordered
checkups) is validated in ``__post_init__``.

Units: frequency Hz, resistance mOhm, capacity Ah, voltage V, time s,
temperature degC, SOC as a fraction in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Optional, Tuple

import numpy as np

from ..exceptions import (
    DuplicateRptError,
    MissingFieldError,
    NonMonotonicGridError,
    TooShortError,
)


class Provenance(str, Enum):
    FIELD = "field"
    LAB = "lab"


class CurveKind(str, Enum):
    RE_F = "re_f"
    CHARGE_QV = "charge_qv"
    CHARGE_IC = "charge_ic"
    CHARGE_DV = "charge_dv"
    DISCHARGE_QV = "discharge_qv"
    DISCHARGE_IC = "discharge_ic"
    DISCHARGE_DV = "discharge_dv"
    RELAXATION_VT = "relaxation_vt"
    RELAXATION_DVDT = "relaxation_dvdt"


# kinds that are measured directly; the rest are derived by differentiation
SOURCE_KINDS = (CurveKind.CHARGE_QV, CurveKind.DISCHARGE_QV, CurveKind.RELAXATION_VT)
VOLTAGE_KINDS = (
    CurveKind.CHARGE_QV,
    CurveKind.CHARGE_IC,
    CurveKind.CHARGE_DV,
    CurveKind.DISCHARGE_QV,
    CurveKind.DISCHARGE_IC,
    CurveKind.DISCHARGE_DV,
)
TIME_KINDS = (CurveKind.RELAXATION_VT, CurveKind.RELAXATION_DVDT)


def _freeze(values, name: str, *, min_len=1, allow_nan=False) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise MissingFieldError(f"{name} must be one-dimensional")
    if arr.size < min_len:
        raise TooShortError(f"{name} needs at least {min_len} value(s), got {arr.size}")
    if allow_nan:
        if np.any(np.isinf(arr)):
            raise MissingFieldError(f"{name} contains infinite values")
    elif not np.all(np.isfinite(arr)):
        raise MissingFieldError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FrequencyGrid:
    """Strictly increasing, positive measurement frequencies in Hz."""

    frequencies: np.ndarray

    def __post_init__(self):
        freqs = _freeze(self.frequencies, "frequencies", min_len=2)
        if freqs[0] <= 0.0:
            raise NonMonotonicGridError("frequencies must be positive")
        if np.any(np.diff(freqs) <= 0.0):
            raise NonMonotonicGridError("frequencies must be strictly increasing")
        object.__setattr__(self, "frequencies", freqs)

    def __len__(self):
        return self.frequencies.size

    def nearest_index(self, f_hz: float) -> int:
        return int(np.argmin(np.abs(self.frequencies - float(f_hz))))


@dataclass(frozen=True)
class EisSpectrum:
    """Real (and optionally imaginary) impedance against a frequency grid."""

    grid: FrequencyGrid
    re_mohm: np.ndarray
    im_mohm: Optional[np.ndarray]
    soc: float
    temp_c: float
    provenance: Provenance

    def __post_init__(self):
        re = _freeze(self.re_mohm, "re_mohm")
        if re.size != len(self.grid):
            raise MissingFieldError(
                f"re_mohm has {re.size} values for a {len(self.grid)}-point grid"
            )
        object.__setattr__(self, "re_mohm", re)
        if self.im_mohm is not None:
            im = _freeze(self.im_mohm, "im_mohm")
            if im.size != len(self.grid):
                raise MissingFieldError(
                    f"im_mohm has {im.size} values for a {len(self.grid)}-point grid"
                )
            object.__setattr__(self, "im_mohm", im)
        if not 0.0 <= float(self.soc) <= 1.0:
            raise MissingFieldError(f"soc must lie in [0, 1], got {self.soc}")
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def re_at(self, f_hz: float) -> float:
        return float(self.re_mohm[self.grid.nearest_index(f_hz)])


@dataclass(frozen=True)
class VoltageCurve:
    """Values sampled on a uniform voltage grid (Q/V, IC, or DV curve)."""

    kind: CurveKind
    v_start: float
    v_step: float
    values: np.ndarray

    def __post_init__(self):
        kind = CurveKind(self.kind)
        if kind not in VOLTAGE_KINDS:
            raise MissingFieldError(f"{kind.value} is not a voltage-grid curve kind")
        object.__setattr__(self, "kind", kind)
        if not float(self.v_step) > 0.0:
            raise NonMonotonicGridError("v_step must be positive")
        derived = kind not in SOURCE_KINDS
        object.__setattr__(
            self,
            "values",
            _freeze(self.values, "values", min_len=2, allow_nan=derived),
        )

    @property
    def voltages(self) -> np.ndarray:
        return self.v_start + self.v_step * np.arange(self.values.size)


@dataclass(frozen=True)
class TimeCurve:
    """Values sampled on a uniform time grid (relaxation voltage or slope)."""

    kind: CurveKind
    t_start: float
    t_step: float
    values: np.ndarray

    def __post_init__(self):
        kind = CurveKind(self.kind)
        if kind not in TIME_KINDS:
            raise MissingFieldError(f"{kind.value} is not a time-grid curve kind")
        object.__setattr__(self, "kind", kind)
        if not float(self.t_step) > 0.0:
            raise NonMonotonicGridError("t_step must be positive")
        if float(self.t_start) < 0.0:
            raise NonMonotonicGridError("t_start must be >= 0")
        derived = kind not in SOURCE_KINDS
        object.__setattr__(
            self,
            "values",
            _freeze(self.values, "values", min_len=2, allow_nan=derived),
        )

    @property
    def times(self) -> np.ndarray:
        return self.t_start + self.t_step * np.arange(self.values.size)


@dataclass(frozen=True)
class RptRecord:
    """One reference performance test: spectra, curves, capacity, age."""

    cell_id: str
    rpt_index: int
    capacity_ah: float
    lab_spectra: Mapping[float, EisSpectrum] = field(default_factory=dict)
    field_spectra: Tuple[EisSpectrum, ...] = ()
    charge_qv: Optional[VoltageCurve] = None
    discharge_qv: Optional[VoltageCurve] = None
    relaxation: Optional[TimeCurve] = None
    age_days: Optional[float] = None
    age_cycles: Optional[float] = None

    def __post_init__(self):
        if int(self.rpt_index) < 0:
            raise MissingFieldError(f"rpt_index must be >= 0, got {self.rpt_index}")
        if not float(self.capacity_ah) > 0.0:
            raise MissingFieldError(f"capacity_ah must be positive, got {self.capacity_ah}")
        for soc, spec in self.lab_spectra.items():
            if spec.provenance is not Provenance.LAB:
                raise MissingFieldError(f"lab_spectra[{soc}] has provenance {spec.provenance.value}")
        for spec in self.field_spectra:
            if spec.provenance is not Provenance.FIELD:
                raise MissingFieldError("field_spectra entries must have provenance 'field'")
        if self.charge_qv is not None and self.charge_qv.kind is not CurveKind.CHARGE_QV:
            raise MissingFieldError("charge_qv must hold a charge_qv curve")
        if self.discharge_qv is not None and self.discharge_qv.kind is not CurveKind.DISCHARGE_QV:
            raise MissingFieldError("discharge_qv must hold a discharge_qv curve")
        if self.relaxation is not None and self.relaxation.kind is not CurveKind.RELAXATION_VT:
            raise MissingFieldError("relaxation must hold a relaxation_vt curve")
        ordered = dict(sorted(self.lab_spectra.items()))
        object.__setattr__(self, "lab_spectra", MappingProxyType(ordered))
        object.__setattr__(self, "field_spectra", tuple(self.field_spectra))

    def lab_spectrum_at(self, soc: float, tol: float = 1e-6) -> EisSpectrum:
        for key, spec in self.lab_spectra.items():
            if math.isclose(key, soc, abs_tol=tol):
                return spec
        raise MissingFieldError(
            f"cell {self.cell_id} rpt {self.rpt_index}: no lab spectrum at SOC {soc}"
        )

    def age(self, unit: str) -> Optional[float]:
        if unit == "days":
            return self.age_days
        if unit == "cycles":
            return self.age_cycles
        raise ValueError(f"unknown age unit {unit!r}")


@dataclass(frozen=True)
class CellHistory:
    """All checkups of one cell, ordered by strictly increasing rpt_index."""

    cell_id: str
    rpts: Tuple[RptRecord, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        rpts = tuple(self.rpts)
        if not rpts:
            raise MissingFieldError(f"cell {self.cell_id}: history has no checkups")
        indices = [r.rpt_index for r in rpts]
        if len(set(indices)) != len(indices):
            raise DuplicateRptError(f"cell {self.cell_id}: duplicate rpt_index in {indices}")
        if sorted(indices) != indices:
            rpts = tuple(sorted(rpts, key=lambda r: r.rpt_index))
        for r in rpts:
            if r.cell_id != self.cell_id:
                raise MissingFieldError(
                    f"history {self.cell_id} contains a record for cell {r.cell_id}"
                )
        object.__setattr__(self, "rpts", rpts)
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    def rpt(self, index: int) -> RptRecord:
        for r in self.rpts:
            if r.rpt_index == index:
                return r
        raise MissingFieldError(f"cell {self.cell_id}: no rpt with index {index}")


@dataclass(frozen=True)
class DatasetSplit:
    train: Tuple[CellHistory, ...]
    test: Tuple[CellHistory, ...]

    def __post_init__(self):
        object.__setattr__(self, "train", tuple(self.train))
        object.__setattr__(self, "test", tuple(self.test))
        train_ids = {c.cell_id for c in self.train}
        test_ids = {c.cell_id for c in self.test}
        overlap = train_ids & test_ids
        if overlap:
            raise DuplicateRptError(f"cells in both split halves: {sorted(overlap)}")
