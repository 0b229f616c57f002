"""Bridge field battery impedance readings to laboratory-format data.

The package turns sparse field impedance readings into laboratory-format
quantities (full Re/f curves, charge and discharge capacity curves,
relaxation curves) and uses them for battery diagnosis (remaining capacity)
and prognosis (remaining life):

1. select preset measurement frequencies from laboratory Re/f curves,
2. translate field Re readings at those frequencies to laboratory Re,
3. reconstruct the full laboratory Re/f curve,
4. predict laboratory charge/discharge/relaxation curves from it,
5. extract difference-curve features for diagnosis and prognosis.
"""

from .exceptions import EisBridgeError
from .base import BaseEstimator, clone
from .datamodel import (
    CellHistory,
    CurveKind,
    DatasetSplit,
    EisSpectrum,
    FrequencyGrid,
    Provenance,
    RptRecord,
    SynthConfig,
    TimeCurve,
    VoltageCurve,
    load_cells,
    resample_curve,
    save_cells,
    split_by_policy,
    synth_generate,
)
from .mlcore import (
    GridSearchCV,
    KMeans,
    RandomForestRegressor,
    kmeans,
    mae,
    mape,
    pearson,
    rmse,
)
from .analytics import DrtResult, drt, dv_curve, ic_curve, make_tau_grid, relaxation_derivative
from .bridge import (
    CurvePredictorSet,
    FrequencyBands,
    PresetFrequencies,
    RefCurveModel,
    ReBinning,
    SocBinning,
    TranslationBank,
    TranslationPair,
    assign_bins,
    select_preset_frequencies,
)
from .phm import (
    BtpfSpec,
    CurveSeries,
    LifeTarget,
    PhmModel,
    compute_life_target,
    curve_bundle,
    difference_bundle,
    difference_curves,
    extract_btpf,
    record_bundle,
    select_btpf,
)
from .pipeline import (
    FieldReading,
    PipelineConfig,
    build_translation_pairs,
    config_from_dict,
    load_config,
    run_diagnose,
    run_evaluate,
    run_prognose,
    run_select_freqs,
    run_synth_gen,
    run_train,
)

__version__ = "0.1.0"

__all__ = [
    "EisBridgeError",
    "BaseEstimator",
    "clone",
    "CellHistory",
    "CurveKind",
    "DatasetSplit",
    "EisSpectrum",
    "FrequencyGrid",
    "Provenance",
    "RptRecord",
    "SynthConfig",
    "TimeCurve",
    "VoltageCurve",
    "load_cells",
    "resample_curve",
    "save_cells",
    "split_by_policy",
    "synth_generate",
    "GridSearchCV",
    "KMeans",
    "RandomForestRegressor",
    "kmeans",
    "mae",
    "mape",
    "pearson",
    "rmse",
    "DrtResult",
    "drt",
    "dv_curve",
    "ic_curve",
    "make_tau_grid",
    "relaxation_derivative",
    "CurvePredictorSet",
    "FrequencyBands",
    "PresetFrequencies",
    "RefCurveModel",
    "ReBinning",
    "SocBinning",
    "TranslationBank",
    "TranslationPair",
    "assign_bins",
    "select_preset_frequencies",
    "BtpfSpec",
    "CurveSeries",
    "LifeTarget",
    "PhmModel",
    "compute_life_target",
    "curve_bundle",
    "difference_bundle",
    "difference_curves",
    "extract_btpf",
    "record_bundle",
    "select_btpf",
    "FieldReading",
    "PipelineConfig",
    "build_translation_pairs",
    "config_from_dict",
    "load_config",
    "run_diagnose",
    "run_evaluate",
    "run_prognose",
    "run_select_freqs",
    "run_synth_gen",
    "run_train",
]
