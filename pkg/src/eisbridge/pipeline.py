"""Configuration-driven training, evaluation, and deployment flows.

A pipeline run is described by one JSON config file. Training proceeds in
stages, each writing a JSON artifact into the output directory:

  preset       preset_freqs.json
  translation  translation_bank_socNNN.json   (one per target lab SOC)
  refcurve     refcurve_socNNN.json
  curves       curve_predictors_socNNN.json
  phm          phm_diagnosis.json, phm_prognosis.json

Later stages load the artifacts of earlier ones, so stages can be run
one at a time or all at once. Evaluation replays the full chain on the
train or test half of the dataset and reports error metrics per step and
per lab data kind.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .analytics import drt, dv_curve, ic_curve, make_tau_grid, relaxation_derivative
from .bridge.binning import RE_BIN_PRESETS, ReBinning, SocBinning
from .bridge.curves import CurvePredictorSet
from .bridge.presets import FrequencyBands, PresetFrequencies, select_preset_frequencies
from .bridge.refcurve import RefCurveModel
from .bridge.translation import TranslationBank, TranslationPair
from .datamodel.io import SCHEMA_VERSION, load_cells, save_cells
from .datamodel.split import split_by_policy
from .datamodel.synth import SynthConfig, synth_generate
from .datamodel.types import (
    CellHistory,
    CurveKind,
    DatasetSplit,
    EisSpectrum,
    Provenance,
    RptRecord,
    SOURCE_KINDS,
)
from .exceptions import (
    ConfigError,
    InvalidConfigError,
    MissingFieldError,
    MissingPrerequisiteError,
    NoDataError,
    UnknownFormatError,
    ZeroReferenceError,
)
from .mlcore.forest import RandomForestRegressor
from .mlcore.grid_search import DEFAULT_FOREST_GRID, GridSearchCV
from .mlcore.metrics import mae, mape, rmse
from .mlcore.serialize import load_model, save_model
from .phm import (
    FEATURE_KINDS,
    PhmModel,
    compute_life_target,
    curve_bundle,
    diagnosis_training_set,
    difference_bundle,
    difference_curves,
    prognosis_training_set,
    record_bundle,
)
from .validation import check_seed

logger = logging.getLogger(__name__)

__all__ = [
    "PipelineConfig",
    "FieldReading",
    "ArtifactPaths",
    "STAGES",
    "load_config",
    "config_from_dict",
    "load_split",
    "build_translation_pairs",
    "preset_to_doc",
    "preset_from_doc",
    "run_synth_gen",
    "run_select_freqs",
    "run_train",
    "run_evaluate",
    "run_diagnose",
    "run_prognose",
]

STAGES = ("preset", "translation", "refcurve", "curves", "phm")

PRESET_DOC_FORMAT = "preset-frequencies"

_FOREST_PARAM_KEYS = (
    "n_estimators", "max_depth", "min_samples_leaf",
    "max_features", "subsample", "bootstrap",
)

_DEFAULT_FOREST = {
    "n_estimators": 100,
    "max_depth": None,
    "min_samples_leaf": 1,
    "max_features": 1.0,
    "subsample": 1.0,
    "bootstrap": True,
}

_FAMILIES = ("translation", "refcurve", "curves", "phm")

_PAIR_POLICIES = ("all", "matched_soc")

_TARGET_KIND_NAMES = tuple(k.value for k in SOURCE_KINDS)

# named bundles of defaults for the two dataset layouts the method was
# designed around; any field can still be overridden per config
CONFIG_PRESETS = {
    "dataset1": {
        "soc_l_targets": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9],
        "phm_soc_l": 0.9,
        "re_bins": {"mode": "preset", "name": "dataset1"},
        "pair_policy": "matched_soc",
        "split": {"policy": "first_n_train", "n": 2},
        "prognosis": {"early_rpt": 2, "unit": "days"},
        "curve_targets": ["charge_qv", "discharge_qv"],
        "drt": {"enabled": True},
    },
    "dataset2": {
        "soc_l_targets": [0.9],
        "phm_soc_l": 0.9,
        "re_bins": {"mode": "preset", "name": "dataset2"},
        "pair_policy": "all",
        "split": {"policy": "odd_even"},
        "prognosis": {"early_rpt": 1, "unit": "cycles"},
        "curve_targets": ["charge_qv", "discharge_qv", "relaxation_vt"],
        "drt": {"enabled": True},
    },
}

_BASE_CONFIG = {
    "dataset": {"schema_version": SCHEMA_VERSION},
    "bands": {"medium": [1.0, 100.0], "high": [100.0, 1000.0]},
    "soc_l_targets": [0.9],
    "phm_soc_l": None,
    "re_bins": {"mode": "auto", "n_bins": 6},
    "pair_policy": "all",
    "split": {"policy": "odd_even", "n": None},
    "hyperparams": {},
    "prognosis": {"early_rpt": 1, "unit": "days"},
    "reference_rpt": 0,
    "life_threshold": 0.8,
    "curve_targets": ["charge_qv", "discharge_qv"],
    "drt": {"enabled": False, "n_tau": 60, "lambda": 1e-3},
    "synth": None,
}

_TOP_KEYS = frozenset(_BASE_CONFIG) | {"preset", "out_dir", "seed"}


# -- configuration ------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    """Resolved pipeline settings (see load_config for the JSON form)."""

    dataset_path: str
    out_dir: str
    seed: int
    schema_version: str = SCHEMA_VERSION
    bands: FrequencyBands = field(default_factory=FrequencyBands)
    soc_l_targets: Tuple[float, ...] = (0.9,)
    phm_soc_l: float = 0.9
    re_bins: Mapping = field(default_factory=lambda: {"mode": "auto", "n_bins": 6})
    pair_policy: str = "all"
    split_policy: str = "odd_even"
    split_n: Optional[int] = None
    hyper: Mapping[str, dict] = field(default_factory=dict)
    early_rpt: int = 1
    life_unit: str = "days"
    reference_rpt: int = 0
    life_threshold: float = 0.8
    curve_targets: Tuple[CurveKind, ...] = (CurveKind.CHARGE_QV, CurveKind.DISCHARGE_QV)
    drt_enabled: bool = False
    drt_n_tau: int = 60
    drt_lambda: float = 1e-3
    synth: Optional[SynthConfig] = None
    threads: int = 1


@dataclass(frozen=True)
class FieldReading:
    """One on-board impedance reading at the two preset frequencies."""

    re1_f_mohm: float
    re2_f_mohm: float
    soc: float
    temp_c: float

    def __post_init__(self):
        if not 0.0 <= float(self.soc) <= 1.0:
            raise MissingFieldError(f"reading soc must lie in [0, 1], got {self.soc}")
        for name in ("re1_f_mohm", "re2_f_mohm"):
            if not float(getattr(self, name)) > 0.0:
                raise MissingFieldError(f"{name} must be positive")


def _merge(base: dict, override: Mapping) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, Mapping) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _expect_keys(section: Mapping, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise InvalidConfigError(f"unknown key(s) in {where}: {', '.join(unknown)}")


def _as_float_pair(value, where: str) -> Tuple[float, float]:
    if not isinstance(value, (list, tuple)) or len(value) != 2:
        raise InvalidConfigError(f"{where} must be a [low, high] pair")
    return float(value[0]), float(value[1])


def _check_hyper(raw: Mapping) -> Dict[str, dict]:
    if not isinstance(raw, Mapping):
        raise InvalidConfigError("hyperparams must be an object")
    _expect_keys(raw, _FAMILIES, "hyperparams")
    out: Dict[str, dict] = {}
    for family, conf in raw.items():
        if not isinstance(conf, Mapping):
            raise InvalidConfigError(f"hyperparams.{family} must be an object")
        _expect_keys(conf, _FOREST_PARAM_KEYS + ("search",), f"hyperparams.{family}")
        conf = dict(conf)
        search = conf.get("search")
        if search is not None:
            if not isinstance(search, Mapping):
                raise InvalidConfigError(f"hyperparams.{family}.search must be an object")
            _expect_keys(search, ("grid", "folds", "scoring"), f"hyperparams.{family}.search")
            conf["search"] = dict(search)
        out[family] = conf
    return out


def config_from_dict(raw: Mapping, base_dir=".", threads: int = 1) -> PipelineConfig:
    """Build a PipelineConfig from parsed JSON, applying preset defaults."""
    if not isinstance(raw, Mapping):
        raise InvalidConfigError("config must be a JSON object")
    _expect_keys(raw, _TOP_KEYS, "config")

    merged = dict(_BASE_CONFIG)
    preset = raw.get("preset")
    if preset is not None:
        if preset not in CONFIG_PRESETS:
            raise InvalidConfigError(
                f"unknown preset {preset!r}; expected one of {sorted(CONFIG_PRESETS)}"
            )
        merged = _merge(merged, CONFIG_PRESETS[preset])
        # mode-switching sections replace wholesale: stale keys from the
        # base defaults would otherwise survive the merge and fail validation
        for key in ("re_bins", "synth"):
            if key in CONFIG_PRESETS[preset]:
                merged[key] = dict(CONFIG_PRESETS[preset][key])
    merged = _merge(merged, {k: v for k, v in raw.items() if k != "preset"})
    for key in ("re_bins", "synth"):
        if key in raw and raw[key] is not None:
            merged[key] = dict(raw[key])

    for key in ("out_dir", "seed"):
        if key not in merged:
            raise InvalidConfigError(f"config is missing required key {key!r}")
    dataset = merged["dataset"]
    if not isinstance(dataset, Mapping) or "path" not in dataset:
        raise InvalidConfigError("config is missing dataset.path")
    _expect_keys(dataset, ("path", "schema_version"), "dataset")

    base = Path(base_dir)

    def _resolve(p) -> str:
        p = Path(str(p)).expanduser()
        return str(p if p.is_absolute() else base / p)

    try:
        seed = check_seed(merged["seed"])
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from None

    bands_raw = merged["bands"]
    _expect_keys(bands_raw, ("medium", "high"), "bands")
    try:
        bands = FrequencyBands(
            medium=_as_float_pair(bands_raw["medium"], "bands.medium"),
            high=_as_float_pair(bands_raw["high"], "bands.high"),
        )
    except ValueError as exc:
        raise InvalidConfigError(str(exc)) from None

    socs = merged["soc_l_targets"]
    if not isinstance(socs, (list, tuple)) or not socs:
        raise InvalidConfigError("soc_l_targets must be a non-empty list")
    soc_l_targets = tuple(float(s) for s in socs)
    if len(set(soc_l_targets)) != len(soc_l_targets):
        raise InvalidConfigError("soc_l_targets contains duplicates")

    phm_soc = merged["phm_soc_l"]
    phm_soc_l = soc_l_targets[-1] if phm_soc is None else float(phm_soc)
    if not any(math.isclose(phm_soc_l, s, abs_tol=1e-9) for s in soc_l_targets):
        raise InvalidConfigError(
            f"phm_soc_l={phm_soc_l} is not one of soc_l_targets {list(soc_l_targets)}"
        )

    re_bins = dict(merged["re_bins"])
    mode = re_bins.get("mode")
    if mode == "preset":
        _expect_keys(re_bins, ("mode", "name"), "re_bins")
        if re_bins.get("name") not in RE_BIN_PRESETS:
            raise InvalidConfigError(
                f"re_bins.name must be one of {sorted(RE_BIN_PRESETS)}"
            )
    elif mode == "auto":
        _expect_keys(re_bins, ("mode", "n_bins"), "re_bins")
        if int(re_bins.get("n_bins", 0)) < 1:
            raise InvalidConfigError("re_bins.n_bins must be a positive integer")
    elif mode == "explicit":
        _expect_keys(re_bins, ("mode", "f1", "f2"), "re_bins")
        for role in ("f1", "f2"):
            edges = re_bins.get(role)
            if not isinstance(edges, (list, tuple)) or len(edges) < 2:
                raise InvalidConfigError(f"re_bins.{role} must list at least two edges")
    else:
        raise InvalidConfigError("re_bins.mode must be 'preset', 'auto', or 'explicit'")

    if merged["pair_policy"] not in _PAIR_POLICIES:
        raise InvalidConfigError(f"pair_policy must be one of {list(_PAIR_POLICIES)}")

    split = merged["split"]
    _expect_keys(split, ("policy", "n"), "split")
    split_policy = split.get("policy")
    if split_policy not in ("first_n_train", "odd_even"):
        raise InvalidConfigError("split.policy must be 'first_n_train' or 'odd_even'")
    split_n = split.get("n")
    if split_policy == "first_n_train":
        if split_n is None or int(split_n) < 1:
            raise InvalidConfigError("split.n must be a positive integer for first_n_train")
        split_n = int(split_n)
    else:
        split_n = None

    hyper = _check_hyper(merged["hyperparams"])

    prog = merged["prognosis"]
    _expect_keys(prog, ("early_rpt", "unit"), "prognosis")
    early_rpt = int(prog.get("early_rpt", 1))
    if early_rpt < 0:
        raise InvalidConfigError("prognosis.early_rpt must be >= 0")
    life_unit = prog.get("unit", "days")
    if life_unit not in ("days", "cycles"):
        raise InvalidConfigError("prognosis.unit must be 'days' or 'cycles'")

    threshold = float(merged["life_threshold"])
    if not 0.0 < threshold < 1.0:
        raise InvalidConfigError("life_threshold must lie in (0, 1)")

    targets_raw = merged["curve_targets"]
    if not isinstance(targets_raw, (list, tuple)) or not targets_raw:
        raise InvalidConfigError("curve_targets must be a non-empty list")
    curve_targets = []
    for name in targets_raw:
        if name not in _TARGET_KIND_NAMES:
            raise InvalidConfigError(
                f"curve_targets entries must be among {list(_TARGET_KIND_NAMES)}, got {name!r}"
            )
        curve_targets.append(CurveKind(name))

    drt_conf = merged["drt"]
    _expect_keys(drt_conf, ("enabled", "n_tau", "lambda"), "drt")
    drt_n_tau = int(drt_conf.get("n_tau", 60))
    drt_lambda = float(drt_conf.get("lambda", 1e-3))
    if drt_n_tau < 2:
        raise InvalidConfigError("drt.n_tau must be at least 2")
    if drt_lambda <= 0:
        raise InvalidConfigError("drt.lambda must be positive")

    synth = merged["synth"]
    if synth is not None:
        synth = SynthConfig.from_dict(synth)

    return PipelineConfig(
        dataset_path=_resolve(dataset["path"]),
        out_dir=_resolve(merged["out_dir"]),
        seed=seed,
        schema_version=str(dataset.get("schema_version", SCHEMA_VERSION)),
        bands=bands,
        soc_l_targets=soc_l_targets,
        phm_soc_l=phm_soc_l,
        re_bins=re_bins,
        pair_policy=merged["pair_policy"],
        split_policy=split_policy,
        split_n=split_n,
        hyper=hyper,
        early_rpt=early_rpt,
        life_unit=life_unit,
        reference_rpt=int(merged["reference_rpt"]),
        life_threshold=threshold,
        curve_targets=tuple(curve_targets),
        drt_enabled=bool(drt_conf.get("enabled", False)),
        drt_n_tau=drt_n_tau,
        drt_lambda=drt_lambda,
        synth=synth,
        threads=int(threads),
    )


def load_config(path, threads: int = 1) -> PipelineConfig:
    """Read a JSON config file; relative paths resolve against its directory."""
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        raw = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    return config_from_dict(raw, base_dir=p.parent, threads=threads)


# -- artifact layout -----------------------------------------------------------


def _soc_tag(soc: float) -> str:
    return f"soc{int(round(soc * 100)):03d}"


@dataclass(frozen=True)
class ArtifactPaths:
    """File layout of one pipeline output directory."""

    root: Path

    def preset(self) -> Path:
        return self.root / "preset_freqs.json"

    def bank(self, soc: float) -> Path:
        return self.root / f"translation_bank_{_soc_tag(soc)}.json"

    def refcurve(self, soc: float) -> Path:
        return self.root / f"refcurve_{_soc_tag(soc)}.json"

    def curves(self, soc: float) -> Path:
        return self.root / f"curve_predictors_{_soc_tag(soc)}.json"

    def phm(self, task: str) -> Path:
        return self.root / f"phm_{task}.json"


def preset_to_doc(preset: PresetFrequencies) -> dict:
    votes = sorted(
        preset.vote_counts.items(), key=lambda kv: (-kv[1], kv[0])
    )
    return {
        "format": PRESET_DOC_FORMAT,
        "version": 1,
        "f1_hz": float(preset.f1_hz),
        "f2_hz": float(preset.f2_hz),
        "bands": {
            "medium": [float(v) for v in preset.bands.medium],
            "high": [float(v) for v in preset.bands.high],
        },
        "votes": [
            {"f1_hz": float(f1), "f2_hz": float(f2), "count": int(n)}
            for (f1, f2), n in votes
        ],
    }


def preset_from_doc(doc: dict) -> PresetFrequencies:
    if not isinstance(doc, dict) or doc.get("format") != PRESET_DOC_FORMAT:
        raise UnknownFormatError(f"not a {PRESET_DOC_FORMAT} document")
    bands = FrequencyBands(
        medium=tuple(doc["bands"]["medium"]), high=tuple(doc["bands"]["high"])
    )
    votes = {
        (v["f1_hz"], v["f2_hz"]): int(v["count"]) for v in doc.get("votes", [])
    }
    return PresetFrequencies(
        f1_hz=float(doc["f1_hz"]), f2_hz=float(doc["f2_hz"]),
        bands=bands, vote_counts=votes,
    )


def _require(path: Path, stage: str) -> Path:
    if not path.exists():
        raise MissingPrerequisiteError(
            f"{path.name} not found; run the '{stage}' training stage first"
        )
    return path


# -- data access ----------------------------------------------------------------


def load_split(cfg: PipelineConfig) -> Tuple[List[CellHistory], DatasetSplit]:
    cells = load_cells(cfg.dataset_path, cfg.schema_version)
    split = split_by_policy(cells, cfg.split_policy, cfg.split_n)
    return cells, split


def _eval_units(record: RptRecord, soc_l: float, pair_policy: str,
                soc_binning: SocBinning) -> Tuple[EisSpectrum, ...]:
    """Field spectra of one checkup that pair with the given lab SOC."""
    units = record.field_spectra
    if pair_policy == "matched_soc":
        want = soc_binning.bin(soc_l)
        units = tuple(fs for fs in units if soc_binning.bin(fs.soc) == want)
    return units


def build_translation_pairs(cells: Sequence[CellHistory],
                            preset: PresetFrequencies, target_soc_l: float,
                            pair_policy: str = "all") -> List[TranslationPair]:
    """Field-to-lab training pairs for one target lab SOC."""
    soc_binning = SocBinning()
    pairs: List[TranslationPair] = []
    skipped = 0
    for cell in cells:
        for record in cell.rpts:
            try:
                lab = record.lab_spectrum_at(target_soc_l)
            except MissingFieldError:
                skipped += 1
                continue
            re1_l = lab.re_at(preset.f1_hz)
            re2_l = lab.re_at(preset.f2_hz)
            for fs in _eval_units(record, target_soc_l, pair_policy, soc_binning):
                pairs.append(TranslationPair(
                    "f1", fs.re_at(preset.f1_hz), fs.soc, fs.temp_c, re1_l))
                pairs.append(TranslationPair(
                    "f2", fs.re_at(preset.f2_hz), fs.soc, fs.temp_c, re2_l))
    if skipped:
        logger.info("soc_l=%s: skipped %d checkup(s) without a lab spectrum there",
                    target_soc_l, skipped)
    if not pairs:
        raise NoDataError(f"no translation pairs for soc_l={target_soc_l}")
    return pairs


def _resolve_re_binnings(cfg: PipelineConfig,
                         pairs: Sequence[TranslationPair]) -> Dict[str, ReBinning]:
    mode = cfg.re_bins["mode"]
    if mode == "preset":
        binning = ReBinning.preset(cfg.re_bins["name"])
        return {"f1": binning, "f2": binning}
    if mode == "explicit":
        return {
            "f1": ReBinning(tuple(float(e) for e in cfg.re_bins["f1"])),
            "f2": ReBinning(tuple(float(e) for e in cfg.re_bins["f2"])),
        }
    n_bins = int(cfg.re_bins["n_bins"])
    out = {}
    for role in ("f1", "f2"):
        values = [p.re_f_mohm for p in pairs if p.role == role]
        out[role] = ReBinning.from_values(values, n_bins)
    return out


# -- hyperparameters --------------------------------------------------------------


def _resolve_family_params(cfg: PipelineConfig, family: str, search_xy=None) -> dict:
    """Fixed forest settings for one model family, grid-searched on demand."""
    conf = cfg.hyper.get(family, {})
    params = dict(_DEFAULT_FOREST)
    params.update({k: v for k, v in conf.items() if k != "search"})
    search = conf.get("search")
    if search is not None:
        if search_xy is None:
            raise InvalidConfigError(
                f"hyperparams.{family}.search is not supported for this command"
            )
        X, y = search_xy()
        grid = search.get("grid") or DEFAULT_FOREST_GRID
        gs = GridSearchCV(
            RandomForestRegressor(random_state=cfg.seed, n_jobs=cfg.threads),
            param_grid=grid,
            folds=int(search.get("folds", 5)),
            scoring=search.get("scoring", "mae"),
            random_state=cfg.seed,
        )
        gs.fit(X, y)
        params.update(gs.best_params_)
        logger.info("%s: grid search chose %s (mean %s %.6g)",
                    family, gs.best_params_, gs.scoring, gs.best_score_)
    return params


def _phm_kinds(cfg: PipelineConfig) -> List[str]:
    """Feature curve kinds implied by the configured target curves."""
    kinds = [CurveKind.RE_F]
    if CurveKind.CHARGE_QV in cfg.curve_targets:
        kinds += [CurveKind.CHARGE_QV, CurveKind.CHARGE_IC, CurveKind.CHARGE_DV]
    if CurveKind.DISCHARGE_QV in cfg.curve_targets:
        kinds += [CurveKind.DISCHARGE_QV, CurveKind.DISCHARGE_IC, CurveKind.DISCHARGE_DV]
    if CurveKind.RELAXATION_VT in cfg.curve_targets:
        kinds.append(CurveKind.RELAXATION_VT)
    ordered = [k for k in FEATURE_KINDS if k in kinds]
    return [k.value for k in ordered]


# -- training stages ---------------------------------------------------------------


def run_synth_gen(cfg: PipelineConfig) -> Path:
    """Generate the configured synthetic dataset at dataset.path."""
    if cfg.synth is None:
        raise InvalidConfigError("config has no 'synth' section")
    cells = synth_generate(cfg.synth, seed=cfg.seed)
    save_cells(cells, cfg.dataset_path, schema_version=cfg.schema_version)
    logger.info("wrote %d synthetic cell(s) to %s", len(cells), cfg.dataset_path)
    return Path(cfg.dataset_path)


def run_select_freqs(cfg: PipelineConfig) -> PresetFrequencies:
    """Vote the two preset frequencies over the training lab curves."""
    _, split = load_split(cfg)
    curves = [
        spec
        for cell in split.train
        for record in cell.rpts
        for spec in record.lab_spectra.values()
    ]
    preset = select_preset_frequencies(curves, cfg.bands, seed=cfg.seed)
    paths = ArtifactPaths(Path(cfg.out_dir))
    paths.root.mkdir(parents=True, exist_ok=True)
    save_model(preset_to_doc(preset), paths.preset())
    logger.info("preset frequencies: f1=%g Hz, f2=%g Hz", preset.f1_hz, preset.f2_hz)
    return preset


def _train_translation(cfg: PipelineConfig, train_cells, preset, paths) -> None:
    def pooled_f1():
        pairs = build_translation_pairs(
            train_cells, preset, cfg.soc_l_targets[0], cfg.pair_policy)
        rows = [p for p in pairs if p.role == "f1"]
        X = np.array([[p.re_f_mohm, p.t_f_c, p.soc_f] for p in rows])
        y = np.array([p.re_l_mohm for p in rows])
        return X, y

    params = _resolve_family_params(cfg, "translation", pooled_f1)
    for soc in cfg.soc_l_targets:
        pairs = build_translation_pairs(train_cells, preset, soc, cfg.pair_policy)
        binnings = _resolve_re_binnings(cfg, pairs)
        bank = TranslationBank(
            target_soc_l=soc,
            re_binning_f1=binnings["f1"],
            re_binning_f2=binnings["f2"],
            random_state=cfg.seed,
            n_jobs=cfg.threads,
            **params,
        ).fit(pairs)
        doc = bank.to_doc()
        doc["preset_freqs"] = {"f1_hz": preset.f1_hz, "f2_hz": preset.f2_hz}
        save_model(doc, paths.bank(soc))


def _lab_records(train_cells, soc: float):
    """(record, lab spectrum) for every training checkup with data at soc."""
    out = []
    for cell in train_cells:
        for record in cell.rpts:
            try:
                out.append((record, record.lab_spectrum_at(soc)))
            except MissingFieldError:
                continue
    if not out:
        raise NoDataError(f"no training lab spectra at soc_l={soc}")
    return out


def _train_refcurve(cfg: PipelineConfig, train_cells, preset, paths) -> None:
    for soc in cfg.soc_l_targets:
        rows = _lab_records(train_cells, soc)
        X = np.array([
            [lab.re_at(preset.f1_hz), lab.re_at(preset.f2_hz)] for _, lab in rows
        ])
        curves = [lab for _, lab in rows]

        def xy():
            return X, np.vstack([c.re_mohm for c in curves])

        params = _resolve_family_params(cfg, "refcurve", xy)
        model = RefCurveModel(
            random_state=cfg.seed, n_jobs=cfg.threads, **params
        ).fit(X, curves)
        save_model(model.to_doc(), paths.refcurve(soc))


def _train_curves(cfg: PipelineConfig, train_cells, paths) -> None:
    attr = {
        CurveKind.CHARGE_QV: "charge_qv",
        CurveKind.DISCHARGE_QV: "discharge_qv",
        CurveKind.RELAXATION_VT: "relaxation",
    }
    for soc in cfg.soc_l_targets:
        X_rows, targets = [], {kind: [] for kind in cfg.curve_targets}
        skipped = 0
        for record, lab in _lab_records(train_cells, soc):
            curves = {k: getattr(record, attr[k]) for k in cfg.curve_targets}
            if any(c is None for c in curves.values()):
                skipped += 1
                continue
            X_rows.append(lab.re_mohm)
            for kind, curve in curves.items():
                targets[kind].append(curve)
        if skipped:
            logger.info("soc_l=%s: skipped %d checkup(s) missing a target curve",
                        soc, skipped)
        if not X_rows:
            raise NoDataError(f"no complete curve training samples at soc_l={soc}")
        X = np.vstack(X_rows)

        def xy():
            first = cfg.curve_targets[0]
            return X, np.vstack([c.values for c in targets[first]])

        params = _resolve_family_params(cfg, "curves", xy)
        model = CurvePredictorSet(
            random_state=cfg.seed, n_jobs=cfg.threads, **params
        ).fit(X, targets)
        save_model(model.to_doc(), paths.curves(soc))


def _train_phm(cfg: PipelineConfig, train_cells, paths) -> None:
    kinds = _phm_kinds(cfg)
    bundles, caps = diagnosis_training_set(
        train_cells, cfg.phm_soc_l, reference_rpt=cfg.reference_rpt)

    def diag_xy():
        probe = PhmModel(task="diagnosis", kinds=kinds,
                         random_state=cfg.seed).fit(bundles, caps)
        X = np.array([probe.features(b) for b in bundles])
        return X, caps

    params = _resolve_family_params(cfg, "phm", diag_xy)
    diag = PhmModel(
        task="diagnosis", kinds=kinds,
        random_state=cfg.seed, n_jobs=cfg.threads, **params,
    ).fit(bundles, caps)
    save_model(diag.to_doc(), paths.phm("diagnosis"))

    prog_path = paths.phm("prognosis")
    try:
        prog_bundles, lives = prognosis_training_set(
            train_cells, cfg.phm_soc_l, cfg.early_rpt,
            reference_rpt=cfg.reference_rpt,
            threshold=cfg.life_threshold, unit=cfg.life_unit,
        )
    except NoDataError:
        logger.warning(
            "no training cell crosses end of life; skipping the prognosis model")
        prog_path.unlink(missing_ok=True)
        return
    prog = PhmModel(
        task="prognosis", kinds=kinds,
        random_state=cfg.seed, n_jobs=cfg.threads, **params,
    ).fit(prog_bundles, lives)
    save_model(prog.to_doc(), prog_path)


def _chain_complete(cfg: PipelineConfig, paths: ArtifactPaths) -> bool:
    if not paths.preset().exists() or not paths.phm("diagnosis").exists():
        return False
    return all(
        paths.bank(s).exists() and paths.refcurve(s).exists() and paths.curves(s).exists()
        for s in cfg.soc_l_targets
    )


def run_train(cfg: PipelineConfig, stage: str = "all") -> dict:
    """Run one or all training stages; returns a summary of what was written."""
    if stage != "all" and stage not in STAGES:
        raise ConfigError(f"unknown stage {stage!r}; expected 'all' or one of {list(STAGES)}")
    stages = list(STAGES) if stage == "all" else [stage]

    _, split = load_split(cfg)
    train_cells = split.train
    paths = ArtifactPaths(Path(cfg.out_dir))
    paths.root.mkdir(parents=True, exist_ok=True)

    if "preset" in stages:
        preset = run_select_freqs(cfg)
    else:
        preset = preset_from_doc(load_model(_require(paths.preset(), "preset")))

    if "translation" in stages:
        _train_translation(cfg, train_cells, preset, paths)
    if "refcurve" in stages:
        _require(paths.bank(cfg.soc_l_targets[0]), "translation")
        _train_refcurve(cfg, train_cells, preset, paths)
    if "curves" in stages:
        _require(paths.refcurve(cfg.soc_l_targets[0]), "refcurve")
        _train_curves(cfg, train_cells, paths)
    if "phm" in stages:
        _require(paths.curves(cfg.phm_soc_l), "curves")
        _train_phm(cfg, train_cells, paths)

    summary = {"stages": stages, "out_dir": str(paths.root), "metrics": None}
    if _chain_complete(cfg, paths):
        rows = _evaluate(cfg, "train")[0]
        _write_metric_rows(paths.root / "metrics_train.csv", rows)
        summary["metrics"] = rows
    return summary


# -- evaluation --------------------------------------------------------------------


_METRIC_COLUMNS = ("step", "lab_data", "mae", "rmse", "mape")


def _metric_row(step: str, label: str, meas, pred) -> dict:
    a = np.asarray(meas, dtype=float).ravel()
    b = np.asarray(pred, dtype=float).ravel()
    keep = np.isfinite(a) & np.isfinite(b)
    a, b = a[keep], b[keep]
    if a.size == 0:
        return {"step": step, "lab_data": label,
                "mae": float("nan"), "rmse": float("nan"), "mape": float("nan")}
    try:
        pct = mape(a, b)
    except ZeroReferenceError:
        pct = float("nan")
    return {"step": step, "lab_data": label,
            "mae": mae(a, b), "rmse": rmse(a, b), "mape": pct}


class _Collector:
    """Gathers measured/predicted values per (step, lab_data) key."""

    def __init__(self):
        self.order: List[Tuple[str, str]] = []
        self.meas: Dict[Tuple[str, str], list] = {}
        self.pred: Dict[Tuple[str, str], list] = {}
        self.points: Dict[Tuple[str, str], list] = {}
        self.overlays: Dict[Tuple[str, str], tuple] = {}

    def add(self, step: str, label: str, sample: str, meas, pred,
            x=None, logx: bool = False) -> None:
        key = (step, label)
        m = np.asarray(meas, dtype=float).ravel()
        p = np.asarray(pred, dtype=float).ravel()
        if key not in self.meas:
            self.order.append(key)
            self.meas[key] = []
            self.pred[key] = []
            self.points[key] = []
        self.meas[key].append(m)
        self.pred[key].append(p)
        self.points[key].extend(
            (sample, i, float(m[i]), float(p[i])) for i in range(m.size)
        )
        if x is not None and key not in self.overlays:
            self.overlays[key] = (np.asarray(x, dtype=float), m, p, logx)

    def rows(self) -> List[dict]:
        return [
            _metric_row(step, label,
                        np.concatenate(self.meas[(step, label)]),
                        np.concatenate(self.pred[(step, label)]))
            for step, label in self.order
        ]


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_csv_cell(v) for v in row])


def _write_metric_rows(path: Path, rows: Sequence[dict]) -> None:
    _write_csv(path, _METRIC_COLUMNS,
               ([r[c] for c in _METRIC_COLUMNS] for r in rows))


def _load_soc_models(cfg: PipelineConfig, paths: ArtifactPaths):
    models = {}
    for soc in cfg.soc_l_targets:
        bank = TranslationBank.from_doc(load_model(_require(paths.bank(soc), "translation")))
        refm = RefCurveModel.from_doc(load_model(_require(paths.refcurve(soc), "refcurve")))
        curveset = CurvePredictorSet.from_doc(load_model(_require(paths.curves(soc), "curves")))
        models[soc] = (bank, refm, curveset)
    return models


def _predict_lab(bank, refm, curveset, re1_f, re2_f, soc_f, t_f_c):
    """Field reading -> translated Re pair, lab Re/f curve, lab curves, flags."""
    re1_l, fl1 = bank.predict(re1_f, soc_f, t_f_c, "f1")
    re2_l, fl2 = bank.predict(re2_f, soc_f, t_f_c, "f2")
    spec = refm.predict(re1_l, re2_l)
    curves = curveset.predict(spec.re_mohm)
    flags = {
        "out_of_range": bool(fl1["out_of_range"] or fl2["out_of_range"]),
        "fallback_re_bin": bool(fl1["fallback_re_bin"] or fl2["fallback_re_bin"]),
    }
    return re1_l, re2_l, spec, curves, flags


def _bundle_from_predicted(spec, curves):
    return curve_bundle(
        spec,
        charge_qv=curves.get(CurveKind.CHARGE_QV),
        discharge_qv=curves.get(CurveKind.DISCHARGE_QV),
        relaxation=curves.get(CurveKind.RELAXATION_VT),
    )


def _masked_gamma(meas_gamma: np.ndarray, pred_gamma: np.ndarray):
    """NaN out grid points where the reference distribution is negligible."""
    peak = float(meas_gamma.max()) if meas_gamma.size else 0.0
    keep = meas_gamma > 1e-9 * peak
    return (np.where(keep, meas_gamma, np.nan),
            np.where(keep, pred_gamma, np.nan))


_CURVE_ATTR = {
    CurveKind.CHARGE_QV: "charge_qv",
    CurveKind.DISCHARGE_QV: "discharge_qv",
    CurveKind.RELAXATION_VT: "relaxation",
}


def _curve_x(curve) -> np.ndarray:
    return curve.times if hasattr(curve, "times") else curve.voltages


def _add_curve_comparison(col: "_Collector", tag: str, sample: str,
                          meas_curve, pred_curve) -> None:
    """Source curve plus its derivative curves, measured vs predicted."""
    kind = meas_curve.kind
    col.add("step4", f"{kind.value} {tag}", sample,
            meas_curve.values, pred_curve.values, x=_curve_x(meas_curve))
    if kind is CurveKind.RELAXATION_VT:
        dm, dp = relaxation_derivative(meas_curve), relaxation_derivative(pred_curve)
        col.add("step4", f"{dm.kind.value} {tag}", sample,
                dm.values, dp.values, x=_curve_x(dm))
        return
    for deriv in (ic_curve, dv_curve):
        dm, dp = deriv(meas_curve), deriv(pred_curve)
        col.add("step4", f"{dm.kind.value} {tag}", sample,
                dm.values, dp.values, x=_curve_x(dm))


def _evaluate(cfg: PipelineConfig, which: str):
    """Replay the full chain on one split half; returns rows and side tables."""
    if which not in ("train", "test"):
        raise ConfigError(f"split must be 'train' or 'test', got {which!r}")
    _, split = load_split(cfg)
    group = split.train if which == "train" else split.test
    if not group:
        raise NoDataError(f"the {which} split is empty")

    paths = ArtifactPaths(Path(cfg.out_dir))
    preset = preset_from_doc(load_model(_require(paths.preset(), "preset")))
    models = _load_soc_models(cfg, paths)
    diag = PhmModel.from_doc(load_model(_require(paths.phm("diagnosis"), "phm")))
    prog = None
    if paths.phm("prognosis").exists():
        prog = PhmModel.from_doc(load_model(paths.phm("prognosis")))

    soc_binning = SocBinning()
    col = _Collector()
    flags_count = {"units": 0, "out_of_range": 0, "fallback_re_bin": 0}
    diag_series: List[tuple] = []
    prog_series: List[tuple] = []

    # steps 2-4: per target SOC, per checkup, per paired field spectrum
    drt_cache: Dict[tuple, np.ndarray] = {}
    for soc in cfg.soc_l_targets:
        tag = _soc_tag(soc)
        bank, refm, curveset = models[soc]
        for cell in group:
            for record in cell.rpts:
                try:
                    lab = record.lab_spectrum_at(soc)
                except MissingFieldError:
                    continue
                meas_re1 = lab.re_at(preset.f1_hz)
                meas_re2 = lab.re_at(preset.f2_hz)
                units = _eval_units(record, soc, cfg.pair_policy, soc_binning)
                for u_idx, fs in enumerate(units):
                    sample = f"{cell.cell_id}:r{record.rpt_index}:u{u_idx}"
                    re1_l, re2_l, spec, curves, flags = _predict_lab(
                        bank, refm, curveset,
                        fs.re_at(preset.f1_hz), fs.re_at(preset.f2_hz),
                        fs.soc, fs.temp_c,
                    )
                    flags_count["units"] += 1
                    flags_count["out_of_range"] += flags["out_of_range"]
                    flags_count["fallback_re_bin"] += flags["fallback_re_bin"]

                    col.add("step2", f"re1_l {tag}", sample, [meas_re1], [re1_l])
                    col.add("step2", f"re2_l {tag}", sample, [meas_re2], [re2_l])
                    col.add("step3", f"re_f_curve {tag}", sample,
                            lab.re_mohm, spec.re_mohm,
                            x=lab.grid.frequencies, logx=True)
                    if cfg.drt_enabled and lab.im_mohm is not None:
                        tau = make_tau_grid(lab.grid, cfg.drt_n_tau)
                        key = (tag, cell.cell_id, record.rpt_index)
                        if key not in drt_cache:
                            drt_cache[key] = drt(
                                lab, tau, lam=cfg.drt_lambda).gamma
                        pred_spec = EisSpectrum(
                            grid=lab.grid, re_mohm=spec.re_mohm,
                            im_mohm=lab.im_mohm, soc=lab.soc,
                            temp_c=lab.temp_c, provenance=Provenance.LAB,
                        )
                        gamma_p = drt(pred_spec, tau, lam=cfg.drt_lambda).gamma
                        gm, gp = _masked_gamma(drt_cache[key], gamma_p)
                        col.add("step3", f"drt_gamma {tag}", sample, gm, gp,
                                x=tau, logx=True)
                    for kind in cfg.curve_targets:
                        meas_curve = getattr(record, _CURVE_ATTR[kind])
                        pred_curve = curves.get(kind)
                        if meas_curve is None or pred_curve is None:
                            continue
                        _add_curve_comparison(col, tag, sample, meas_curve, pred_curve)

    # step 5: diagnosis per checkup, prognosis per cell at the early checkup
    phm_tag = _soc_tag(cfg.phm_soc_l)
    bank, refm, curveset = models[cfg.phm_soc_l]
    for cell in group:
        diffs = difference_curves(
            cell, reference_rpt=cfg.reference_rpt, soc_l=cfg.phm_soc_l,
            kinds=diag.kinds_)
        ref_bundle = record_bundle(cell.rpt(cfg.reference_rpt), cfg.phm_soc_l)
        for record in cell.rpts:
            actual = record.capacity_ah
            rid = f"{cell.cell_id}:r{record.rpt_index}"
            pred_cap = diag.predict(diffs[record.rpt_index])
            col.add("step5", "capacity measured_lab", rid, [actual], [pred_cap])
            diag_series.append(
                (cell.cell_id, record.rpt_index, "measured_lab", rid, actual, pred_cap))
            units = _eval_units(record, cfg.phm_soc_l, cfg.pair_policy, soc_binning)
            for u_idx, fs in enumerate(units):
                sample = f"{rid}:u{u_idx}"
                _, _, spec, curves, _ = _predict_lab(
                    bank, refm, curveset,
                    fs.re_at(preset.f1_hz), fs.re_at(preset.f2_hz),
                    fs.soc, fs.temp_c,
                )
                bundle = _bundle_from_predicted(spec, curves)
                diff = difference_bundle(bundle, ref_bundle, kinds=diag.kinds_)
                pred_cap = diag.predict(diff)
                col.add("step5", f"capacity predicted_lab {phm_tag}",
                        sample, [actual], [pred_cap])
                diag_series.append(
                    (cell.cell_id, record.rpt_index, "predicted_lab", sample,
                     actual, pred_cap))

        if prog is None:
            continue
        life = compute_life_target(
            cell, threshold=cfg.life_threshold, unit=cfg.life_unit)
        if not life.crossed:
            logger.info("cell %s never crosses end of life; no prognosis row",
                        cell.cell_id)
            continue
        if cfg.early_rpt not in diffs:
            logger.info("cell %s has no checkup %d; no prognosis row",
                        cell.cell_id, cfg.early_rpt)
            continue
        actual_rem = life.remaining[cfg.early_rpt]
        rid = f"{cell.cell_id}:r{cfg.early_rpt}"
        pred_rem = prog.predict(diffs[cfg.early_rpt])
        col.add("step5", f"remaining_{cfg.life_unit} measured_lab",
                rid, [actual_rem], [pred_rem])
        prog_series.append(
            (cell.cell_id, "measured_lab", rid, cfg.life_unit, actual_rem, pred_rem))
        early_record = cell.rpt(cfg.early_rpt)
        units = _eval_units(early_record, cfg.phm_soc_l, cfg.pair_policy, soc_binning)
        for u_idx, fs in enumerate(units):
            sample = f"{rid}:u{u_idx}"
            _, _, spec, curves, _ = _predict_lab(
                bank, refm, curveset,
                fs.re_at(preset.f1_hz), fs.re_at(preset.f2_hz),
                fs.soc, fs.temp_c,
            )
            bundle = _bundle_from_predicted(spec, curves)
            diff = difference_bundle(bundle, ref_bundle, kinds=prog.kinds_)
            pred_rem = prog.predict(diff)
            col.add("step5", f"remaining_{cfg.life_unit} predicted_lab {phm_tag}",
                    sample, [actual_rem], [pred_rem])
            prog_series.append(
                (cell.cell_id, "predicted_lab", sample, cfg.life_unit,
                 actual_rem, pred_rem))

    return col.rows(), col, flags_count, diag_series, prog_series


def _dump_name(step: str, label: str, which: str) -> str:
    return f"points_{step}_{label.replace(' ', '_')}_{which}.csv"


def run_evaluate(cfg: PipelineConfig, which: str = "test",
                 plots: bool = False) -> List[dict]:
    """Evaluate the trained chain on one split half and write the report."""
    rows, col, flags_count, diag_series, prog_series = _evaluate(cfg, which)
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    _write_metric_rows(out / f"evaluation_{which}.csv", rows)
    for step, label in col.order:
        _write_csv(
            out / _dump_name(step, label, which),
            ("sample", "point", "measured", "predicted"),
            col.points[(step, label)],
        )
    _write_csv(
        out / f"diagnosis_series_{which}.csv",
        ("cell_id", "rpt_index", "source", "sample",
         "actual_capacity_ah", "predicted_capacity_ah"),
        diag_series,
    )
    _write_csv(
        out / f"prognosis_series_{which}.csv",
        ("cell_id", "source", "sample", "unit",
         "actual_remaining", "predicted_remaining"),
        prog_series,
    )
    save_model(flags_count, out / f"translation_flags_{which}.json")

    if plots:
        from . import plots as plotmod

        for step, label in col.order:
            safe = label.replace(" ", "_")
            key = (step, label)
            if step in ("step2", "step5"):
                plotmod.save_scatter(
                    str(out / f"plot_{step}_{safe}_{which}.svg"),
                    np.concatenate(col.meas[key]),
                    np.concatenate(col.pred[key]),
                    title=f"{label} ({which})",
                )
            elif key in col.overlays:
                x, m, p, logx = col.overlays[key]
                plotmod.save_overlay(
                    str(out / f"plot_{step}_{safe}_{which}.svg"),
                    x, m, p, title=f"{label} ({which}, first sample)", logx=logx,
                )
    return rows


# -- deployment ---------------------------------------------------------------------


def _deploy_predict(cfg: PipelineConfig, reading: FieldReading, reference_cell: str):
    paths = ArtifactPaths(Path(cfg.out_dir))
    preset = preset_from_doc(load_model(_require(paths.preset(), "preset")))
    soc = cfg.phm_soc_l
    bank = TranslationBank.from_doc(load_model(_require(paths.bank(soc), "translation")))
    refm = RefCurveModel.from_doc(load_model(_require(paths.refcurve(soc), "refcurve")))
    curveset = CurvePredictorSet.from_doc(load_model(_require(paths.curves(soc), "curves")))

    cells = load_cells(cfg.dataset_path, cfg.schema_version)
    by_id = {c.cell_id: c for c in cells}
    if reference_cell not in by_id:
        raise MissingFieldError(
            f"reference cell {reference_cell!r} is not in the dataset")
    ref_bundle = record_bundle(
        by_id[reference_cell].rpt(cfg.reference_rpt), soc)

    re1_l, re2_l, spec, curves, flags = _predict_lab(
        bank, refm, curveset,
        reading.re1_f_mohm, reading.re2_f_mohm, reading.soc, reading.temp_c,
    )
    bundle = _bundle_from_predicted(spec, curves)
    base = {
        "reference_cell": reference_cell,
        "soc_l": soc,
        "preset_f1_hz": preset.f1_hz,
        "preset_f2_hz": preset.f2_hz,
        "re1_l_mohm": re1_l,
        "re2_l_mohm": re2_l,
        "flags": flags,
    }
    return paths, ref_bundle, bundle, base


def run_diagnose(cfg: PipelineConfig, reading: FieldReading,
                 reference_cell: str) -> dict:
    """Remaining capacity from one field reading."""
    paths, ref_bundle, bundle, base = _deploy_predict(cfg, reading, reference_cell)
    model = PhmModel.from_doc(load_model(_require(paths.phm("diagnosis"), "phm")))
    diff = difference_bundle(bundle, ref_bundle, kinds=model.kinds_)
    base["capacity_ah"] = model.predict(diff)
    return base


def run_prognose(cfg: PipelineConfig, reading: FieldReading,
                 reference_cell: str) -> dict:
    """Remaining life from one field reading."""
    paths, ref_bundle, bundle, base = _deploy_predict(cfg, reading, reference_cell)
    model = PhmModel.from_doc(load_model(_require(paths.phm("prognosis"), "phm")))
    diff = difference_bundle(bundle, ref_bundle, kinds=model.kinds_)
    base["remaining_life"] = model.predict(diff)
    base["unit"] = cfg.life_unit
    return base
