"""Difference curves, two-point feature selection, life targets, PHM models."""

import numpy as np
import pytest

from eisbridge import (
    CellHistory,
    CurveKind,
    CurveSeries,
    PhmModel,
    compute_life_target,
    curve_bundle,
    difference_bundle,
    difference_curves,
    extract_btpf,
    record_bundle,
    select_btpf,
)
from eisbridge.phm import FEATURE_KINDS, diagnosis_training_set, prognosis_training_set
from eisbridge.exceptions import (
    ConstantInputError,
    DataValidationError,
    GridMismatchError,
    KindMismatchError,
    LengthMismatchError,
    MissingFieldError,
    MissingReferenceError,
    NoDataError,
    UnknownFormatError,
)

from conftest import aging_history, aging_record, qv_curve, relax_curve


# -- brute-force oracle for the best two-point feature -------------------------


def brute_force_btpf(values, targets):
    """Independent scan: best |pearson| pair, ties to smallest (i, j)."""
    V = np.asarray(values, dtype=float)
    t = np.asarray(targets, dtype=float)
    tc = t - t.mean()
    st = np.sqrt(np.sum(tc * tc))
    best = None
    m = V.shape[1]
    for i in range(m - 1):
        for j in range(i + 1, m):
            d = np.abs(V[:, j] - V[:, i])
            if not np.all(np.isfinite(d)):
                continue
            dc = d - d.mean()
            sd = np.sqrt(np.sum(dc * dc))
            if sd == 0.0:
                continue
            r = float(np.sum(tc * dc) / (st * sd))
            if best is None or abs(r) > best[0] + 1e-15:
                best = (abs(r), i, j, r)
    return best


def test_select_btpf_matches_exhaustive_scan():
    rng = np.random.default_rng(0)
    for trial in range(50):
        n = int(rng.integers(3, 10))
        m = int(rng.integers(2, 21))
        V = rng.normal(0.0, 1.0, (n, m))
        t = rng.uniform(1.0, 5.0, n)
        oracle = brute_force_btpf(V, t)
        if oracle is None:
            continue
        spec = select_btpf(V, np.arange(m, dtype=float), CurveKind.CHARGE_QV, t)
        assert abs(spec.training_correlation) == pytest.approx(oracle[0], abs=1e-12)
        assert (spec.index_i, spec.index_j) == (oracle[1], oracle[2])
        assert spec.training_correlation == pytest.approx(oracle[3], abs=1e-12)


def test_planted_feature_found_with_unit_correlation():
    rng = np.random.default_rng(1)
    for trial in range(10):
        n, m = 8, 30
        t = rng.uniform(2.0, 3.0, n)
        V = 0.01 * rng.normal(0.0, 1.0, (n, m))
        V[:, 3] = 0.0
        V[:, 11] = 0.05 * t  # |column 11 - column 3| is exactly linear in t
        spec = select_btpf(V, np.arange(m, dtype=float), CurveKind.RE_F, t)
        assert (spec.index_i, spec.index_j) == (3, 11)
        assert spec.training_correlation == pytest.approx(1.0, abs=1e-12)


def test_candidate_count_for_160_point_curves():
    rng = np.random.default_rng(2)
    V = rng.normal(0.0, 1.0, (3, 160))
    spec = select_btpf(V, np.arange(160.0), CurveKind.CHARGE_QV,
                       np.array([1.0, 2.0, 3.0]))
    assert spec.n_candidates == 12720


def test_btpf_tie_takes_smallest_pair():
    t = np.array([1.0, 2.0, 3.0, 4.0])
    V = np.zeros((4, 4))
    V[:, 1] = t
    V[:, 2] = t          # (0,1) and (0,2) tie at r = 1; (1,2) is constant
    V[:, 3] = [0.0, 0.1, 0.05, 0.2]
    spec = select_btpf(V, np.arange(4.0), CurveKind.CHARGE_QV, t)
    assert (spec.index_i, spec.index_j) == (0, 1)


def test_btpf_skips_masked_and_constant_pairs():
    t = np.array([1.0, 2.0, 3.0])
    V = np.array([
        [np.nan, 0.0, 1.0, 5.0],
        [np.nan, 0.0, 2.0, 5.0],
        [np.nan, 0.0, 3.0, 5.0],
    ])
    spec = select_btpf(V, np.arange(4.0), CurveKind.CHARGE_DV, t)
    # any pair touching column 0 is masked; (1,3) and (2,3)? (1,3) constant 5
    assert (spec.index_i, spec.index_j) == (1, 2)
    assert spec.training_correlation == pytest.approx(1.0, abs=1e-12)


def test_btpf_input_validation():
    t = np.array([1.0, 2.0])
    with pytest.raises(LengthMismatchError):
        select_btpf(np.zeros((2, 3)), np.arange(2.0), CurveKind.RE_F, t)
    with pytest.raises(NoDataError):
        select_btpf(np.zeros((1, 3)), np.arange(3.0), CurveKind.RE_F, [1.0])
    with pytest.raises(ConstantInputError):
        select_btpf(np.random.default_rng(0).normal(size=(3, 4)),
                    np.arange(4.0), CurveKind.RE_F, [2.0, 2.0, 2.0])


def test_extract_btpf_reads_the_selected_points():
    t = np.array([1.0, 2.0, 3.0])
    V = np.vstack([[0.0, 1.0, 4.0], [0.0, 2.0, 4.0], [0.0, 3.0, 4.0]])
    spec = select_btpf(V, np.array([3.0, 3.1, 3.2]), CurveKind.CHARGE_QV, t)
    series = CurveSeries(kind=CurveKind.CHARGE_QV, x=np.array([3.0, 3.1, 3.2]),
                         values=np.array([0.5, 2.5, 4.0]))
    assert extract_btpf(series, spec) == pytest.approx(
        abs(series.values[spec.index_j] - series.values[spec.index_i]))
    wrong = CurveSeries(kind=CurveKind.RE_F, x=np.array([1.0, 2.0, 3.0]),
                        values=np.zeros(3))
    with pytest.raises(KindMismatchError):
        extract_btpf(wrong, spec)
    short = CurveSeries(kind=CurveKind.CHARGE_QV, x=np.array([3.0]),
                        values=np.array([1.0]))
    with pytest.raises(LengthMismatchError):
        extract_btpf(short, spec)
    masked = CurveSeries(kind=CurveKind.CHARGE_QV, x=np.array([3.0, 3.1, 3.2]),
                         values=np.array([np.nan, 1.0, 2.0]))
    with pytest.raises(DataValidationError):
        extract_btpf(masked, spec)


# -- bundles -------------------------------------------------------------------


def test_curve_bundle_adds_derived_kinds():
    qv = qv_curve(np.linspace(0.0, 2.0, 10))
    relax = relax_curve(4.2 - 0.01 * np.arange(8))
    bundle = curve_bundle(None, charge_qv=qv, relaxation=relax)
    assert set(bundle) == {CurveKind.CHARGE_QV, CurveKind.CHARGE_IC,
                           CurveKind.CHARGE_DV, CurveKind.RELAXATION_VT}
    assert bundle[CurveKind.CHARGE_IC].values.size == 9


def test_record_bundle_covers_all_measured_kinds():
    rec = aging_record("c", 0, 0.2)
    bundle = record_bundle(rec, soc_l=0.9)
    expected = {CurveKind.RE_F, CurveKind.CHARGE_QV, CurveKind.CHARGE_IC,
                CurveKind.CHARGE_DV, CurveKind.DISCHARGE_QV,
                CurveKind.DISCHARGE_IC, CurveKind.DISCHARGE_DV,
                CurveKind.RELAXATION_VT}
    assert set(bundle) == expected
    assert tuple(FEATURE_KINDS) == (
        CurveKind.RE_F, CurveKind.CHARGE_QV, CurveKind.CHARGE_IC,
        CurveKind.CHARGE_DV, CurveKind.DISCHARGE_QV, CurveKind.DISCHARGE_IC,
        CurveKind.DISCHARGE_DV, CurveKind.RELAXATION_VT,
    )


def test_difference_bundle_subtracts_pointwise():
    a = record_bundle(aging_record("c", 1, 0.6), soc_l=0.9)
    ref = record_bundle(aging_record("c", 0, 0.0), soc_l=0.9)
    diff = difference_bundle(a, ref)
    kind = CurveKind.RE_F
    assert np.allclose(diff[kind].values, a[kind].values - ref[kind].values)
    sub = difference_bundle(a, ref, kinds=[CurveKind.CHARGE_QV])
    assert set(sub) == {CurveKind.CHARGE_QV}


def test_difference_bundle_rejects_grid_mismatch_and_missing_kind():
    a = record_bundle(aging_record("c", 0, 0.1), soc_l=0.9)
    b = record_bundle(aging_record("c", 1, 0.2, n_curve=25), soc_l=0.9)
    with pytest.raises(GridMismatchError):
        difference_bundle(a, b, kinds=[CurveKind.CHARGE_QV])
    with pytest.raises(MissingReferenceError):
        difference_bundle(a, {}, kinds=[CurveKind.RE_F])


def test_difference_curves_reference_is_zero():
    history = aging_history("c", [0.0, 0.3, 0.6, 0.9])
    diffs = difference_curves(history, reference_rpt=0, soc_l=0.9)
    assert set(diffs) == {0, 1, 2, 3}
    for kind, series in diffs[0].items():
        clean = series.values[np.isfinite(series.values)]
        assert np.allclose(clean, 0.0, atol=1e-12)
    with pytest.raises(MissingReferenceError):
        difference_curves(history, reference_rpt=9)


# -- life targets ---------------------------------------------------------------


def capacity_history(caps, unit="days", step=100.0):
    rpts = []
    for k, cap in enumerate(caps):
        kw = {"age_days": k * step} if unit == "days" else {"age_cycles": k * step}
        rpts.append(aging_record("c", k, a=0.1 * k, capacity=cap, **kw))
    return CellHistory(cell_id="c", rpts=tuple(rpts))


def test_life_target_hand_example():
    # capacities 3.0, 2.7, 2.3 at days 0, 100, 200 with threshold 0.8:
    # the 2.4 Ah limit is crossed 75% of the way from day 100 to day 200
    history = capacity_history([3.0, 2.7, 2.3])
    life = compute_life_target(history, threshold=0.8, unit="days")
    assert life.crossed is True
    assert life.eol_age == pytest.approx(175.0)
    assert life.remaining[0] == pytest.approx(175.0)
    assert life.remaining[1] == pytest.approx(75.0)
    assert life.remaining[2] == pytest.approx(0.0)


def test_life_target_never_crosses():
    life = compute_life_target(capacity_history([3.0, 2.9, 2.8]), threshold=0.8)
    assert life.crossed is False
    assert life.eol_age is None and life.remaining is None


def test_life_target_crossing_at_first_checkup():
    life = compute_life_target(capacity_history([3.0, 2.4, 2.0]), threshold=0.8)
    assert life.eol_age == pytest.approx(100.0)
    assert life.remaining[1] == 0.0


def test_life_target_other_units_and_errors():
    life = compute_life_target(capacity_history([3.0, 2.7, 2.3], unit="cycles"),
                               threshold=0.8, unit="cycles")
    assert life.unit == "cycles" and life.eol_age == pytest.approx(175.0)
    with pytest.raises(MissingFieldError):
        compute_life_target(capacity_history([3.0, 2.7, 2.3], unit="cycles"),
                            unit="days")  # no day markers present
    with pytest.raises(ValueError):
        compute_life_target(capacity_history([3.0, 2.3]), threshold=1.5)


# -- models ----------------------------------------------------------------------


def test_diagnosis_model_memorizes_capacities():
    histories = [aging_history(f"cell_{i}", [0.0, 0.25 + 0.02 * i, 0.55, 0.9])
                 for i in range(3)]
    bundles, targets = diagnosis_training_set(histories, soc_l=0.9)
    model = PhmModel(task="diagnosis", n_estimators=1, bootstrap=False)
    model.fit(bundles, targets)
    for b, t in zip(bundles, targets):
        assert model.predict(b) == pytest.approx(t, abs=1e-12)
    assert model.kinds_ == list(FEATURE_KINDS)
    assert len(model.btpf_specs_) == len(FEATURE_KINDS)


def test_prognosis_model_excludes_never_crossing_cells():
    crossing = [aging_history(f"cell_{i}", [0.0, 0.28 + 0.02 * i, 0.55 + 0.05 * i, 0.95])
                for i in range(3)]
    flat = capacity_history([3.0, 2.95, 2.93, 2.91])
    bundles, targets = prognosis_training_set(crossing + [flat], soc_l=0.9,
                                              early_rpt=1, unit="days")
    assert len(bundles) == 3  # the flat cell is skipped
    model = PhmModel(task="prognosis", n_estimators=1, bootstrap=False)
    model.fit(bundles, targets)
    for b, t in zip(bundles, targets):
        assert model.predict(b) == pytest.approx(t, abs=1e-9)


def test_prognosis_training_set_can_be_empty():
    flat = capacity_history([3.0, 2.95, 2.93])
    with pytest.raises(NoDataError):
        prognosis_training_set([flat], soc_l=0.9, early_rpt=1, unit="days")


def test_phm_model_round_trip():
    histories = [aging_history(f"cell_{i}", [0.0, 0.3, 0.6, 0.9 - 0.01 * i])
                 for i in range(3)]
    bundles, targets = diagnosis_training_set(histories, soc_l=0.9)
    model = PhmModel(task="diagnosis", n_estimators=3, random_state=4).fit(bundles, targets)
    restored = PhmModel.from_doc(model.to_doc())
    assert restored.kinds_ == model.kinds_
    for a, b in zip(restored.btpf_specs_, model.btpf_specs_):
        assert (a.curve_kind, a.index_i, a.index_j) == (b.curve_kind, b.index_i, b.index_j)
    for b in bundles:
        assert restored.predict(b) == model.predict(b)
    with pytest.raises(UnknownFormatError):
        PhmModel.from_doc({"format": "other"})


def test_phm_model_restricted_kinds():
    histories = [aging_history(f"cell_{i}", [0.0, 0.4, 0.8]) for i in range(2)]
    bundles, targets = diagnosis_training_set(histories, soc_l=0.9)
    model = PhmModel(task="diagnosis", kinds=["re_f", "charge_qv"],
                     n_estimators=1, bootstrap=False).fit(bundles, targets)
    assert model.kinds_ == [CurveKind.RE_F, CurveKind.CHARGE_QV]
    assert model.features(bundles[0]).size == 2


def test_phm_model_validation():
    with pytest.raises(ValueError):
        PhmModel(task="forecast").fit([], [])
    histories = [aging_history("c", [0.0, 0.5])]
    bundles, targets = diagnosis_training_set(histories, soc_l=0.9)
    with pytest.raises(LengthMismatchError):
        PhmModel().fit(bundles, targets[:-1])
    with pytest.raises(NoDataError):
        PhmModel().fit([], [])
