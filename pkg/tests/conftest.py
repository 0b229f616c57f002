"""Shared builders for small in-memory fixtures and one trained tiny pipeline."""

import json

import numpy as np
import pytest

from eisbridge import (
    CellHistory,
    CurveKind,
    EisSpectrum,
    FrequencyGrid,
    Provenance,
    RptRecord,
    TimeCurve,
    VoltageCurve,
    load_config,
    run_synth_gen,
    run_train,
)


def log_grid(n: int = 16, lo: float = 2.0, hi: float = 1000.0) -> FrequencyGrid:
    return FrequencyGrid(frequencies=np.logspace(np.log10(lo), np.log10(hi), n))


def lab_spectrum(re=None, grid=None, soc=0.9, temp_c=25.0, im=None) -> EisSpectrum:
    grid = log_grid() if grid is None else grid
    if re is None:
        re = np.linspace(30.0, 20.0, len(grid))
    return EisSpectrum(grid=grid, re_mohm=re, im_mohm=im, soc=soc,
                       temp_c=temp_c, provenance=Provenance.LAB)


def field_spectrum(re, grid, soc=0.5, temp_c=25.0) -> EisSpectrum:
    return EisSpectrum(grid=grid, re_mohm=re, im_mohm=None, soc=soc,
                       temp_c=temp_c, provenance=Provenance.FIELD)


def qv_curve(values, kind=CurveKind.CHARGE_QV, v_start=3.0, v_step=0.01) -> VoltageCurve:
    return VoltageCurve(kind=kind, v_start=v_start, v_step=v_step, values=values)


def relax_curve(values, t_start=0.0, t_step=60.0) -> TimeCurve:
    return TimeCurve(kind=CurveKind.RELAXATION_VT, t_start=t_start,
                     t_step=t_step, values=values)


def aging_record(cell_id: str, rpt_index: int, a: float, *, capacity=None,
                 age_days=None, age_cycles=None, n_curve=20) -> RptRecord:
    """Checkup whose lab quantities are smooth functions of an aging value."""
    grid = log_grid(n=12)
    re = 25.0 + 8.0 * a - 4.0 * np.log10(grid.frequencies)
    v = np.arange(n_curve)
    charge = qv_curve(2.0 * (1.0 - 0.3 * a) * (v / (n_curve - 1.0)) + 0.1 * a)
    discharge = qv_curve(2.0 - 1.5 * (1.0 - 0.2 * a) * (v / (n_curve - 1.0)),
                         kind=CurveKind.DISCHARGE_QV)
    relax = relax_curve(3.4 - 0.2 * a * np.exp(-np.arange(10) / 4.0))
    return RptRecord(
        cell_id=cell_id,
        rpt_index=rpt_index,
        capacity_ah=3.0 * (1.0 - 0.3 * a) if capacity is None else capacity,
        lab_spectra={0.9: lab_spectrum(re=re, grid=grid)},
        charge_qv=charge,
        discharge_qv=discharge,
        relaxation=relax,
        age_days=age_days,
        age_cycles=age_cycles,
    )


def aging_history(cell_id: str, agings, unit: str = "days",
                  step: float = 30.0) -> CellHistory:
    rpts = []
    for k, a in enumerate(agings):
        kw = {"age_days": k * step} if unit == "days" else {"age_cycles": k * step}
        rpts.append(aging_record(cell_id, k, a, **kw))
    return CellHistory(cell_id=cell_id, rpts=tuple(rpts))


# -- tiny trained pipeline shared by pipeline and CLI tests -------------------

TINY_SYNTH = {
    "n_cells": 6,
    "rpts_per_cell": 4,
    "cells_per_group": 3,
    "noise": 0.0,
    "field_socs": [0.25, 0.55, 0.85],
    "field_temps": [15.0, 25.0],
    "lab_socs": [0.9],
    "lab_temp_c": 25.0,
    "freq_min_hz": 2.0,
    "freq_max_hz": 1000.0,
    "n_freqs": 12,
    "charge_v_start": 3.0,
    "charge_v_step": 0.01,
    "charge_points": 40,
    "discharge_v_start": 3.0,
    "discharge_v_step": 0.01,
    "discharge_points": 40,
    "relax_t_step": 60.0,
    "relax_points": 12,
    "with_im": True,
    "days_per_rpt": 30.0,
    "cycles_per_rpt": 50.0,
    "initial_capacity_ah": 3.0,
    "capacity_fade": 0.3,
    "aging_max": 0.9,
    "aging_exponent_range": [0.9, 1.1],
}

# single unbagged fully grown tree per model: memorizes noise-free data
MEMORIZE = {"n_estimators": 1, "bootstrap": False}


def tiny_config_dict() -> dict:
    return {
        "preset": "dataset2",
        "dataset": {"path": "data"},
        "out_dir": "run",
        "seed": 7,
        "re_bins": {"mode": "auto", "n_bins": 6},
        "drt": {"enabled": False},
        "hyperparams": {family: dict(MEMORIZE) for family in
                        ("translation", "refcurve", "curves", "phm")},
        "synth": dict(TINY_SYNTH),
    }


def write_config(path, overrides=None) -> None:
    doc = tiny_config_dict()
    for key, value in (overrides or {}).items():
        doc[key] = value
    path.write_text(json.dumps(doc, indent=1), encoding="utf-8")


@pytest.fixture(scope="session")
def trained_dir(tmp_path_factory):
    """Config + synthetic dataset + fully trained artifact chain."""
    root = tmp_path_factory.mktemp("chain")
    cfg_path = root / "config.json"
    write_config(cfg_path)
    cfg = load_config(cfg_path)
    run_synth_gen(cfg)
    run_train(cfg)
    return root
