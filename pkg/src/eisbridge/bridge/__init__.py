from .presets import FrequencyBands, PresetFrequencies, select_preset_frequencies
from .binning import SocBinning, ReBinning, BinAssignment, assign_bins
from .translation import TranslationPair, TranslationBank
from .refcurve import RefCurveModel
from .curves import CurvePredictorSet

__all__ = [
    "FrequencyBands",
    "PresetFrequencies",
    "select_preset_frequencies",
    "SocBinning",
    "ReBinning",
    "BinAssignment",
    "assign_bins",
    "TranslationPair",
    "TranslationBank",
    "RefCurveModel",
    "CurvePredictorSet",
]
