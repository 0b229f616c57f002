"""Deterministic synthetic dataset generator.

Every quantity derives from a latent aging state ``a`` in [0, 1] through
smooth maps, so laboratory-format quantities are exact functions of a field
reading (up to configured noise) and the full pipeline is learnable by
construction:

* ``re_map`` is strictly increasing in ``a`` for fixed (f, SOC, T) and
  therefore invertible (``re_map_invert``),
* charge and discharge capacity curves are monotone in voltage and scale
  and skew with ``a``,
* relaxation voltage decays smoothly with a rate and depth that vary with
  ``a``,
* remaining capacity decreases strictly with ``a``.

Given the same (config, seed) two runs produce identical datasets.
"""

from __future__ import annotations

from dataclasses import dataclass, fields as dc_fields
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..exceptions import InvalidConfigError
from ..validation import rng_from
from .types import (
    CellHistory,
    CurveKind,
    EisSpectrum,
    FrequencyGrid,
    Provenance,
    RptRecord,
    TimeCurve,
    VoltageCurve,
)

# generative map constants (mOhm, Hz, V, s)
R_HF = 12.0          # high-frequency resistance floor
R_AMP = 10.0         # amplitude of the frequency-dependent part
F_KNEE = 10.0        # knee frequency of the dispersion
ALPHA_AGE = 0.5      # relative Re growth at a = 1
BETA_SOC = 0.15      # relative Re growth from full to empty
GAMMA_TEMP = 0.004   # relative Re growth per degC below 25
IM_AMP = 5.0         # magnitude scale of the imaginary part
V_FULL = 4.2         # relaxation start voltage
Q_FLOOR = 0.05       # fraction of capacity at the first grid voltage


def _base_re(f_hz):
    return R_HF + R_AMP / (1.0 + np.sqrt(np.asarray(f_hz, dtype=float) / F_KNEE))


def re_map(f_hz, a, soc, temp_c):
    """Field/lab real impedance in mOhm; strictly increasing in ``a``."""
    return (
        _base_re(f_hz)
        * (1.0 + ALPHA_AGE * a)
        * (1.0 + BETA_SOC * (1.0 - soc))
        * (1.0 + GAMMA_TEMP * (25.0 - temp_c))
    )


def re_map_invert(re_mohm, f_hz, soc, temp_c):
    """Recover the latent aging state from one real-impedance reading."""
    scale = _base_re(f_hz) * (1.0 + BETA_SOC * (1.0 - soc)) * (1.0 + GAMMA_TEMP * (25.0 - temp_c))
    return (np.asarray(re_mohm, dtype=float) / scale - 1.0) / ALPHA_AGE


def im_map(f_hz, a):
    """Imaginary impedance in mOhm (negative, single dispersion)."""
    x = np.asarray(f_hz, dtype=float) / F_KNEE
    return -IM_AMP * (1.0 + ALPHA_AGE * a) * x / (1.0 + x * x)


def capacity_map(a, initial_capacity_ah, capacity_fade):
    return initial_capacity_ah * (1.0 - capacity_fade * np.asarray(a, dtype=float))


def _smoothstep(u):
    return u * u * (3.0 - 2.0 * u)


def charge_q_map(v, a, cfg: "SynthConfig"):
    span = (cfg.charge_points - 1) * cfg.charge_v_step
    u = np.clip((np.asarray(v, dtype=float) - cfg.charge_v_start) / span, 0.0, 1.0)
    g = u ** (1.0 + 0.3 * a)
    cap = capacity_map(a, cfg.initial_capacity_ah, cfg.capacity_fade)
    return cap * (Q_FLOOR + (1.0 - Q_FLOOR) * _smoothstep(g))


def discharge_q_map(v, a, cfg: "SynthConfig"):
    span = (cfg.discharge_points - 1) * cfg.discharge_v_step
    u = np.clip((np.asarray(v, dtype=float) - cfg.discharge_v_start) / span, 0.0, 1.0)
    h = u ** (1.0 / (1.0 + 0.25 * a))
    cap = capacity_map(a, cfg.initial_capacity_ah, cfg.capacity_fade)
    return cap * (Q_FLOOR + (1.0 - Q_FLOOR) * _smoothstep(h))


def relax_v_map(t, a):
    depth = 0.08 + 0.04 * a
    tau = 900.0 + 300.0 * a
    return V_FULL - depth * (1.0 - np.exp(-np.asarray(t, dtype=float) / tau))


def aging_value(rpt_index, rpts_per_cell, aging_max, exponent):
    """Latent aging at a checkup: aging_max * (k / (K-1)) ** p."""
    frac = rpt_index / (rpts_per_cell - 1)
    return aging_max * frac**exponent


@dataclass(frozen=True)
class SynthConfig:
    """Generator settings. Every field is required; unknown fields reject."""

    n_cells: int
    rpts_per_cell: int
    cells_per_group: int
    noise: float
    field_socs: Tuple[float, ...]
    field_temps: Tuple[float, ...]
    lab_socs: Tuple[float, ...]
    lab_temp_c: float
    freq_min_hz: float
    freq_max_hz: float
    n_freqs: int
    charge_v_start: float
    charge_v_step: float
    charge_points: int
    discharge_v_start: float
    discharge_v_step: float
    discharge_points: int
    relax_t_step: float
    relax_points: int          # 0 disables relaxation curves
    with_im: bool
    days_per_rpt: float
    cycles_per_rpt: float
    initial_capacity_ah: float
    capacity_fade: float
    aging_max: float
    aging_exponent_range: Tuple[float, float]

    def __post_init__(self):
        def bad(msg):
            raise InvalidConfigError(f"synth config: {msg}")

        if self.n_cells < 1:
            bad("n_cells must be >= 1")
        if self.rpts_per_cell < 2:
            bad("rpts_per_cell must be >= 2")
        if self.cells_per_group < 1:
            bad("cells_per_group must be >= 1")
        if self.noise < 0:
            bad("noise must be >= 0")
        for name in ("field_socs", "lab_socs"):
            socs = getattr(self, name)
            if not socs:
                bad(f"{name} must be non-empty")
            if any(not 0.0 <= s <= 1.0 for s in socs):
                bad(f"{name} values must lie in [0, 1]")
            object.__setattr__(self, name, tuple(float(s) for s in socs))
        if not self.field_temps:
            bad("field_temps must be non-empty")
        object.__setattr__(self, "field_temps", tuple(float(t) for t in self.field_temps))
        if not 0.0 < self.freq_min_hz < self.freq_max_hz:
            bad("need 0 < freq_min_hz < freq_max_hz")
        if self.n_freqs < 2:
            bad("n_freqs must be >= 2")
        for prefix in ("charge", "discharge"):
            if getattr(self, f"{prefix}_points") < 2:
                bad(f"{prefix}_points must be >= 2")
            if getattr(self, f"{prefix}_v_step") <= 0:
                bad(f"{prefix}_v_step must be > 0")
        if self.relax_points < 0 or self.relax_points == 1:
            bad("relax_points must be 0 (disabled) or >= 2")
        if self.relax_points and self.relax_t_step <= 0:
            bad("relax_t_step must be > 0")
        if self.days_per_rpt <= 0 or self.cycles_per_rpt <= 0:
            bad("days_per_rpt and cycles_per_rpt must be > 0")
        if self.initial_capacity_ah <= 0:
            bad("initial_capacity_ah must be > 0")
        if not 0.0 <= self.capacity_fade <= 1.0:
            bad("capacity_fade must lie in [0, 1]")
        if not 0.0 < self.aging_max <= 1.0:
            bad("aging_max must lie in (0, 1]")
        lo, hi = self.aging_exponent_range
        if not 0.0 < lo <= hi:
            bad("aging_exponent_range must satisfy 0 < lo <= hi")
        object.__setattr__(self, "aging_exponent_range", (float(lo), float(hi)))

    @classmethod
    def from_dict(cls, raw: dict) -> "SynthConfig":
        if not isinstance(raw, dict):
            raise InvalidConfigError("synth config must be a JSON object")
        names = {f.name for f in dc_fields(cls)}
        unknown = set(raw) - names
        if unknown:
            raise InvalidConfigError(f"synth config: unknown field(s) {sorted(unknown)}")
        missing = names - set(raw)
        if missing:
            raise InvalidConfigError(f"synth config: missing field(s) {sorted(missing)}")
        return cls(**raw)

    @classmethod
    def example(cls) -> "SynthConfig":
        """Small but fully exercising configuration."""
        return cls(
            n_cells=12,
            rpts_per_cell=10,
            cells_per_group=3,
            noise=0.0,
            field_socs=(0.05, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75, 0.85, 0.95),
            field_temps=(15.0, 25.0, 35.0),
            lab_socs=(0.9,),
            lab_temp_c=25.0,
            freq_min_hz=2.08,
            freq_max_hz=1000.0,
            n_freqs=16,
            charge_v_start=3.0,
            charge_v_step=0.01,
            charge_points=120,
            discharge_v_start=3.0,
            discharge_v_step=0.01,
            discharge_points=120,
            relax_t_step=60.0,
            relax_points=50,
            with_im=True,
            days_per_rpt=21.0,
            cycles_per_rpt=50.0,
            initial_capacity_ah=3.0,
            capacity_fade=0.3,
            aging_max=0.9,
            aging_exponent_range=(0.9, 1.1),
        )


def _noisy(values, noise, rng):
    if noise == 0.0:
        return np.asarray(values, dtype=float)
    return np.asarray(values, dtype=float) * (1.0 + noise * rng.standard_normal(np.shape(values)))


def synth_generate(config: SynthConfig, seed: int) -> List[CellHistory]:
    """Generate cells deterministically from (config, seed)."""
    cfg = config
    rng = rng_from(seed, 0)
    freqs = np.logspace(np.log10(cfg.freq_min_hz), np.log10(cfg.freq_max_hz), cfg.n_freqs)
    grid = FrequencyGrid(freqs)
    p_lo, p_hi = cfg.aging_exponent_range

    cells = []
    for c in range(cfg.n_cells):
        exponent = p_lo + (p_hi - p_lo) * rng.random()
        group = c // cfg.cells_per_group
        cell_id = f"cell_{c + 1:03d}"
        records = []
        for k in range(cfg.rpts_per_cell):
            a = aging_value(k, cfg.rpts_per_cell, cfg.aging_max, exponent)

            lab = {}
            for soc in cfg.lab_socs:
                re_vals = _noisy(re_map(freqs, a, soc, cfg.lab_temp_c), cfg.noise, rng)
                im_vals = _noisy(im_map(freqs, a), cfg.noise, rng) if cfg.with_im else None
                lab[soc] = EisSpectrum(
                    grid=grid, re_mohm=re_vals, im_mohm=im_vals,
                    soc=soc, temp_c=cfg.lab_temp_c, provenance=Provenance.LAB,
                )

            field = []
            for soc in cfg.field_socs:
                for temp in cfg.field_temps:
                    re_vals = _noisy(re_map(freqs, a, soc, temp), cfg.noise, rng)
                    im_vals = _noisy(im_map(freqs, a), cfg.noise, rng) if cfg.with_im else None
                    field.append(EisSpectrum(
                        grid=grid, re_mohm=re_vals, im_mohm=im_vals,
                        soc=soc, temp_c=temp, provenance=Provenance.FIELD,
                    ))

            v_c = cfg.charge_v_start + cfg.charge_v_step * np.arange(cfg.charge_points)
            charge = VoltageCurve(
                kind=CurveKind.CHARGE_QV, v_start=cfg.charge_v_start,
                v_step=cfg.charge_v_step,
                values=_noisy(charge_q_map(v_c, a, cfg), cfg.noise, rng),
            )
            v_d = cfg.discharge_v_start + cfg.discharge_v_step * np.arange(cfg.discharge_points)
            discharge = VoltageCurve(
                kind=CurveKind.DISCHARGE_QV, v_start=cfg.discharge_v_start,
                v_step=cfg.discharge_v_step,
                values=_noisy(discharge_q_map(v_d, a, cfg), cfg.noise, rng),
            )
            relax: Optional[TimeCurve] = None
            if cfg.relax_points:
                t = cfg.relax_t_step * np.arange(cfg.relax_points)
                relax = TimeCurve(
                    kind=CurveKind.RELAXATION_VT, t_start=0.0, t_step=cfg.relax_t_step,
                    values=_noisy(relax_v_map(t, a), cfg.noise, rng),
                )

            capacity = float(
                _noisy(capacity_map(a, cfg.initial_capacity_ah, cfg.capacity_fade), cfg.noise, rng)
            )
            records.append(RptRecord(
                cell_id=cell_id,
                rpt_index=k,
                capacity_ah=capacity,
                lab_spectra=lab,
                field_spectra=tuple(field),
                charge_qv=charge,
                discharge_qv=discharge,
                relaxation=relax,
                age_days=k * cfg.days_per_rpt,
                age_cycles=k * cfg.cycles_per_rpt,
            ))
        cells.append(CellHistory(
            cell_id=cell_id, rpts=tuple(records), metadata={"group": f"G{group}"}
        ))
    return cells
