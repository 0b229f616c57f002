"""Preset frequency selection: per-curve clustering and modal voting."""

import numpy as np
import pytest

from eisbridge import FrequencyBands, PresetFrequencies, select_preset_frequencies
from eisbridge.exceptions import BandEmptyError, NoDataError

from conftest import lab_spectrum, log_grid


def dispersed_spectrum(freqs, re_values):
    grid = log_grid(n=len(freqs))
    grid = type(grid)(frequencies=np.asarray(freqs, dtype=float))
    return lab_spectrum(re=np.asarray(re_values, dtype=float), grid=grid)


def test_two_separated_groups_vote_their_nearest_grid_points():
    # medium points {2,5,10,20} Hz sit high in Re, high points {200,400,800}
    # sit low: clustering must split by band; the vote takes the in-band
    # frequency nearest each cluster's mean frequency (9.25 -> 10, 467 -> 400)
    spec = dispersed_spectrum(
        [2.0, 5.0, 10.0, 20.0, 200.0, 400.0, 800.0],
        [30.0, 30.0, 29.8, 29.9, 10.0, 10.1, 9.9],
    )
    preset = select_preset_frequencies([spec], seed=0)
    assert preset.f1_hz == 10.0
    assert preset.f2_hz == 400.0
    assert preset.vote_counts == {(10.0, 400.0): 1}


def test_majority_vote_across_curves():
    a = dispersed_spectrum(
        [2.0, 5.0, 10.0, 20.0, 200.0, 400.0, 800.0],
        [30.0, 30.0, 29.8, 29.9, 10.0, 10.1, 9.9],
    )
    b = dispersed_spectrum(
        [2.0, 5.0, 6.0, 200.0, 500.0],
        [30.0, 29.9, 29.8, 10.0, 10.1],
    )
    preset = select_preset_frequencies([a, a, b], seed=0)
    assert (preset.f1_hz, preset.f2_hz) == (10.0, 400.0)
    assert preset.vote_counts[(10.0, 400.0)] == 2
    assert preset.vote_counts[(5.0, 200.0)] == 1


def test_tied_vote_resolves_to_smallest_pair():
    a = dispersed_spectrum(
        [2.0, 5.0, 10.0, 20.0, 200.0, 400.0, 800.0],
        [30.0, 30.0, 29.8, 29.9, 10.0, 10.1, 9.9],
    )
    b = dispersed_spectrum(
        [2.0, 5.0, 6.0, 200.0, 500.0],
        [30.0, 29.9, 29.8, 10.0, 10.1],
    )
    preset = select_preset_frequencies([a, b], seed=0)
    assert (preset.f1_hz, preset.f2_hz) == (5.0, 200.0)


def test_selection_is_deterministic():
    rng = np.random.default_rng(0)
    curves = []
    for _ in range(6):
        grid = log_grid(n=16)
        re = 30.0 - 5.0 * np.log10(grid.frequencies) + rng.normal(0.0, 0.2, 16)
        curves.append(lab_spectrum(re=re, grid=grid))
    a = select_preset_frequencies(curves, seed=9)
    b = select_preset_frequencies(curves, seed=9)
    assert (a.f1_hz, a.f2_hz) == (b.f1_hz, b.f2_hz)
    assert a.vote_counts == b.vote_counts


def test_chosen_frequencies_lie_in_their_bands():
    rng = np.random.default_rng(4)
    grid = log_grid(n=16, lo=2.08, hi=1000.0)
    curves = [
        lab_spectrum(re=30.0 - 5.0 * np.log10(grid.frequencies)
                     + rng.normal(0.0, 0.3, 16), grid=grid)
        for _ in range(5)
    ]
    bands = FrequencyBands()
    preset = select_preset_frequencies(curves, bands, seed=0)
    assert bands.medium[0] < preset.f1_hz <= bands.medium[1]
    assert bands.high[0] < preset.f2_hz <= bands.high[1]


def test_band_with_too_few_points_rejected():
    spec = dispersed_spectrum([50.0, 60.0, 200.0, 400.0], [20.0, 19.0, 10.0, 10.5])
    ok = select_preset_frequencies([spec])  # two points per band is enough
    assert ok.f1_hz in (50.0, 60.0)
    thin = dispersed_spectrum([50.0, 200.0, 400.0], [20.0, 10.0, 10.5])
    with pytest.raises(BandEmptyError):
        select_preset_frequencies([thin])


def test_no_curves_rejected():
    with pytest.raises(NoDataError):
        select_preset_frequencies([])


def test_band_and_preset_validation():
    with pytest.raises(ValueError):
        FrequencyBands(medium=(100.0, 1.0))
    with pytest.raises(ValueError):
        FrequencyBands(medium=(1.0, 200.0), high=(100.0, 1000.0))
    with pytest.raises(ValueError):
        PresetFrequencies(f1_hz=500.0, f2_hz=900.0, bands=FrequencyBands())
