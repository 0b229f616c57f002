"""Pipeline configuration, artifact chain, and evaluation reports."""

import csv
import json

import numpy as np
import pytest

from eisbridge import (
    CurveKind,
    FieldReading,
    SynthConfig,
    build_translation_pairs,
    compute_life_target,
    config_from_dict,
    load_cells,
    load_config,
    run_diagnose,
    run_evaluate,
    run_prognose,
    run_train,
    select_preset_frequencies,
    split_by_policy,
    synth_generate,
)
from eisbridge.bridge.binning import SocBinning
from eisbridge.exceptions import (
    ConfigError,
    InvalidConfigError,
    MissingFieldError,
    MissingPrerequisiteError,
    NoDataError,
)
from eisbridge.mlcore.metrics import mae, mape, rmse

from conftest import TINY_SYNTH, tiny_config_dict, write_config


def minimal_raw(**overrides):
    raw = {
        "dataset": {"path": "data"},
        "out_dir": "run",
        "seed": 3,
    }
    raw.update(overrides)
    return raw


# -- configuration -------------------------------------------------------------


def test_preset_defaults_are_applied():
    cfg = config_from_dict(minimal_raw(preset="dataset1"), base_dir="/tmp/x")
    assert cfg.soc_l_targets == tuple(np.round(np.arange(0.1, 0.95, 0.1), 10))
    assert cfg.pair_policy == "matched_soc"
    assert cfg.split_policy == "first_n_train" and cfg.split_n == 2
    assert cfg.early_rpt == 2 and cfg.life_unit == "days"
    assert cfg.drt_enabled is True

    cfg2 = config_from_dict(minimal_raw(preset="dataset2"), base_dir="/tmp/x")
    assert cfg2.soc_l_targets == (0.9,)
    assert cfg2.split_policy == "odd_even"
    assert cfg2.life_unit == "cycles"
    assert CurveKind.RELAXATION_VT in cfg2.curve_targets


def test_explicit_values_override_preset():
    raw = minimal_raw(preset="dataset2", soc_l_targets=[0.8, 0.9],
                      phm_soc_l=0.8, drt={"enabled": False})
    cfg = config_from_dict(raw, base_dir="/tmp/x")
    assert cfg.soc_l_targets == (0.8, 0.9)
    assert cfg.phm_soc_l == 0.8
    assert cfg.drt_enabled is False


def test_re_bins_section_is_replaced_not_merged():
    # switching a preset's re_bins mode must not leak the preset's keys
    raw = minimal_raw(preset="dataset2", re_bins={"mode": "auto", "n_bins": 4})
    cfg = config_from_dict(raw, base_dir="/tmp/x")
    assert cfg.re_bins == {"mode": "auto", "n_bins": 4}


def test_relative_paths_resolve_against_config_dir(tmp_path):
    (tmp_path / "config.json").write_text(json.dumps(minimal_raw()), encoding="utf-8")
    cfg = load_config(tmp_path / "config.json")
    assert cfg.dataset_path == str(tmp_path / "data")
    assert cfg.out_dir == str(tmp_path / "run")


def test_config_rejections():
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(bogus=1))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(preset="dataset9"))
    with pytest.raises(InvalidConfigError):
        config_from_dict({"out_dir": "run", "seed": 1})  # no dataset.path
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(seed="not-a-seed"))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(bands={"medium": [100.0, 1.0]}))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(pair_policy="nearest"))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(split={"policy": "odd_even", "extra": 1}))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(curve_targets=["charge_ic"]))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(prognosis={"unit": "weeks"}))


def test_phm_soc_must_be_a_translation_target():
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(soc_l_targets=[0.5, 0.9], phm_soc_l=0.7))
    cfg = config_from_dict(minimal_raw(soc_l_targets=[0.5, 0.9]))
    assert cfg.phm_soc_l == 0.9  # defaults to the last target


def test_hyperparams_validation():
    ok = minimal_raw(hyperparams={"translation": {"n_estimators": 5}})
    assert config_from_dict(ok).hyper["translation"]["n_estimators"] == 5
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(hyperparams={"other": {}}))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(hyperparams={"phm": {"depth": 3}}))
    with pytest.raises(InvalidConfigError):
        config_from_dict(minimal_raw(
            hyperparams={"phm": {"search": {"grid": {}, "rounds": 2}}}))


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_field_reading_validation():
    with pytest.raises(MissingFieldError):
        FieldReading(re1_f_mohm=-1.0, re2_f_mohm=1.0, soc=0.5, temp_c=25.0)
    with pytest.raises(MissingFieldError):
        FieldReading(re1_f_mohm=1.0, re2_f_mohm=1.0, soc=1.5, temp_c=25.0)


# -- pair assembly ---------------------------------------------------------------


def small_cells():
    return synth_generate(SynthConfig.from_dict(TINY_SYNTH), seed=2)


def test_translation_pair_policies():
    cells = small_cells()
    curves = [s for c in cells for r in c.rpts for s in r.lab_spectra.values()]
    preset = select_preset_frequencies(curves, seed=0)

    pairs_all = build_translation_pairs(cells, preset, 0.9, "all")
    n_records = sum(len(c.rpts) for c in cells)
    n_field = len(TINY_SYNTH["field_socs"]) * len(TINY_SYNTH["field_temps"])
    assert len(pairs_all) == n_records * n_field * 2  # one pair per role

    # matched_soc keeps only field readings whose SOC falls in the lab decile
    spec = dict(TINY_SYNTH, field_socs=[0.25, 0.95])
    cells_m = synth_generate(SynthConfig.from_dict(spec), seed=2)
    curves_m = [s for c in cells_m for r in c.rpts for s in r.lab_spectra.values()]
    preset_m = select_preset_frequencies(curves_m, seed=0)
    pairs_matched = build_translation_pairs(cells_m, preset_m, 0.9, "matched_soc")
    binning = SocBinning()
    want = binning.bin(0.9)
    n_records_m = sum(len(c.rpts) for c in cells_m)
    assert len(pairs_matched) == n_records_m * len(spec["field_temps"]) * 2
    assert all(binning.bin(p.soc_f) == want for p in pairs_matched)

    # no field SOC shares the target decile -> nothing to train on
    with pytest.raises(NoDataError):
        build_translation_pairs(cells, preset, 0.9, "matched_soc")


def test_translation_pairs_use_lab_values_at_preset_frequencies():
    cells = small_cells()[:1]
    curves = [s for r in cells[0].rpts for s in r.lab_spectra.values()]
    preset = select_preset_frequencies(curves, seed=0)
    pairs = build_translation_pairs(cells, preset, 0.9, "all")
    lab = cells[0].rpts[0].lab_spectra[0.9]
    first_f1 = next(p for p in pairs if p.role == "f1")
    assert first_f1.re_l_mohm == lab.re_at(preset.f1_hz)


# -- training chain ---------------------------------------------------------------


def test_stage_prerequisites_enforced(tmp_path):
    write_config(tmp_path / "config.json")
    cfg = load_config(tmp_path / "config.json")
    from eisbridge import run_synth_gen

    run_synth_gen(cfg)
    with pytest.raises(MissingPrerequisiteError):
        run_train(cfg, stage="phm")
    with pytest.raises(MissingPrerequisiteError):
        run_train(cfg, stage="translation")  # preset artifact missing
    with pytest.raises(ConfigError):
        run_train(cfg, stage="everything")


def test_trained_chain_writes_all_artifacts(trained_dir):
    run = trained_dir / "run"
    for name in (
        "preset_freqs.json",
        "translation_bank_soc090.json",
        "refcurve_soc090.json",
        "curve_predictors_soc090.json",
        "phm_diagnosis.json",
        "phm_prognosis.json",
        "metrics_train.csv",
    ):
        assert (run / name).exists(), name


def test_retraining_is_byte_identical(trained_dir, tmp_path):
    cfg = load_config(trained_dir / "config.json")
    import dataclasses

    cfg2 = dataclasses.replace(cfg, out_dir=str(tmp_path / "run2"))
    run_train(cfg2)
    for a in sorted((trained_dir / "run").glob("*.json")):
        b = tmp_path / "run2" / a.name
        assert a.read_bytes() == b.read_bytes(), a.name


# -- evaluation --------------------------------------------------------------------


def read_csv_rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


def test_evaluation_report_layout_and_train_exactness(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    rows = run_evaluate(cfg, which="train")
    table = read_csv_rows(trained_dir / "run" / "evaluation_train.csv")
    assert table[0] == ["step", "lab_data", "mae", "rmse", "mape"]
    assert len(table) == len(rows) + 1

    # memorizing hyperparameters on noise-free data: training error vanishes
    for row in rows:
        assert row["step"] in {"step2", "step3", "step4", "step5"}
        if np.isnan(row["mape"]):
            continue
        assert row["mape"] < 1e-9, row
        assert row["rmse"] >= row["mae"] - 1e-15

    steps = {r["step"] for r in rows}
    assert steps == {"step2", "step3", "step4", "step5"}
    labels = {r["lab_data"] for r in rows}
    assert "re1_l soc090" in labels and "re2_l soc090" in labels
    assert "re_f_curve soc090" in labels
    assert "charge_qv soc090" in labels
    assert "relaxation_vt soc090" in labels
    assert "capacity measured_lab" in labels
    assert "capacity predicted_lab soc090" in labels
    assert "remaining_cycles measured_lab" in labels


def test_metric_rows_match_per_point_dumps(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    rows = run_evaluate(cfg, which="test")
    dump = read_csv_rows(trained_dir / "run" / "points_step3_re_f_curve_soc090_test.csv")
    assert dump[0] == ["sample", "point", "measured", "predicted"]
    meas = np.array([float(r[2]) for r in dump[1:]])
    pred = np.array([float(r[3]) for r in dump[1:]])
    row = next(r for r in rows if r["step"] == "step3"
               and r["lab_data"] == "re_f_curve soc090")
    assert row["mae"] == pytest.approx(mae(meas, pred), abs=1e-12)
    assert row["rmse"] == pytest.approx(rmse(meas, pred), abs=1e-12)
    assert row["mape"] == pytest.approx(mape(meas, pred), abs=1e-12)


def test_evaluation_writes_series_and_flags(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    run_evaluate(cfg, which="test")
    diag = read_csv_rows(trained_dir / "run" / "diagnosis_series_test.csv")
    assert diag[0] == ["cell_id", "rpt_index", "source", "sample",
                       "actual_capacity_ah", "predicted_capacity_ah"]
    assert len(diag) > 1
    prog = read_csv_rows(trained_dir / "run" / "prognosis_series_test.csv")
    assert prog[0][0] == "cell_id"
    flags = json.loads((trained_dir / "run" / "translation_flags_test.json").read_text())
    assert set(flags) == {"out_of_range", "fallback_re_bin", "units"}


def test_evaluate_reruns_identically(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    run_evaluate(cfg, which="test")
    first = (trained_dir / "run" / "evaluation_test.csv").read_bytes()
    run_evaluate(cfg, which="test")
    assert (trained_dir / "run" / "evaluation_test.csv").read_bytes() == first


# -- deployment --------------------------------------------------------------------


def reading_from_record(cfg, record, preset, soc=0.85, temp=25.0):
    fs = next(s for s in record.field_spectra
              if s.soc == soc and s.temp_c == temp)
    return FieldReading(
        re1_f_mohm=fs.re_at(preset.f1_hz),
        re2_f_mohm=fs.re_at(preset.f2_hz),
        soc=soc, temp_c=temp,
    )


def load_preset(trained_dir):
    from eisbridge.pipeline import preset_from_doc
    from eisbridge.mlcore.serialize import load_model

    return preset_from_doc(load_model(trained_dir / "run" / "preset_freqs.json"))


def test_diagnose_memorizing_models_return_training_capacity(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    preset = load_preset(trained_dir)
    cells = {c.cell_id: c for c in load_cells(cfg.dataset_path)}
    record = cells["cell_001"].rpts[2]
    reading = reading_from_record(cfg, record, preset)
    result = run_diagnose(cfg, reading, reference_cell="cell_001")
    assert result["capacity_ah"] == pytest.approx(record.capacity_ah, abs=1e-12)
    assert result["flags"]["out_of_range"] is False
    assert result["reference_cell"] == "cell_001"
    assert result["soc_l"] == 0.9


def test_prognose_memorizing_models_return_training_life(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    preset = load_preset(trained_dir)
    cells = {c.cell_id: c for c in load_cells(cfg.dataset_path)}
    record = cells["cell_003"].rpts[cfg.early_rpt]
    reading = reading_from_record(cfg, record, preset)
    result = run_prognose(cfg, reading, reference_cell="cell_003")
    life = compute_life_target(cells["cell_003"], threshold=cfg.life_threshold,
                               unit=cfg.life_unit)
    assert result["unit"] == "cycles"
    assert result["remaining_life"] == pytest.approx(life.remaining[cfg.early_rpt],
                                                     abs=1e-9)


def test_diagnose_flags_out_of_range_reading(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    reading = FieldReading(re1_f_mohm=500.0, re2_f_mohm=400.0, soc=0.85, temp_c=25.0)
    result = run_diagnose(cfg, reading, reference_cell="cell_001")
    assert result["flags"]["out_of_range"] is True
    assert np.isfinite(result["capacity_ah"])


def test_diagnose_unknown_reference_cell(trained_dir):
    cfg = load_config(trained_dir / "config.json")
    reading = FieldReading(re1_f_mohm=30.0, re2_f_mohm=20.0, soc=0.85, temp_c=25.0)
    with pytest.raises(MissingFieldError):
        run_diagnose(cfg, reading, reference_cell="cell_099")
