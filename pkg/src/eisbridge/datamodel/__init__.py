from .types import (
    Provenance,
    CurveKind,
    FrequencyGrid,
    EisSpectrum,
    VoltageCurve,
    TimeCurve,
    RptRecord,
    CellHistory,
    DatasetSplit,
    SOURCE_KINDS,
    VOLTAGE_KINDS,
    TIME_KINDS,
)
from .io import load_cells, save_cells, SCHEMA_VERSION
from .split import split_by_policy
from .resample import resample_curve
from .synth import SynthConfig, synth_generate

__all__ = [
    "Provenance",
    "CurveKind",
    "FrequencyGrid",
    "EisSpectrum",
    "VoltageCurve",
    "TimeCurve",
    "RptRecord",
    "CellHistory",
    "DatasetSplit",
    "SOURCE_KINDS",
    "VOLTAGE_KINDS",
    "TIME_KINDS",
    "load_cells",
    "save_cells",
    "SCHEMA_VERSION",
    "split_by_policy",
    "resample_curve",
    "SynthConfig",
    "synth_generate",
]
