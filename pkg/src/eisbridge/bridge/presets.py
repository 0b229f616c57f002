"""Preset measurement frequency selection from laboratory Re/f curves.

For every training curve the points with frequencies in the medium or high
band are clustered into two groups by k-means on z-scored (log10 f, Re)
features. The cluster with the lower mean frequency is the medium cluster,
the other the high cluster; each contributes the in-band grid frequency
nearest its mean frequency. The (medium, high) combination seen most often
across curves wins, ties resolved toward the lexicographically smallest
pair.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Sequence, Tuple

import numpy as np

from ..exceptions import BandEmptyError, NoDataError
from ..mlcore.kmeans import kmeans
from ..validation import rng_from
from ..datamodel.types import EisSpectrum


@dataclass(frozen=True)
class FrequencyBands:
    """Half-open search bands (lo, hi] in Hz."""

    medium: Tuple[float, float] = (1.0, 100.0)
    high: Tuple[float, float] = (100.0, 1000.0)

    def __post_init__(self):
        m_lo, m_hi = self.medium
        h_lo, h_hi = self.high
        if not (0.0 <= m_lo < m_hi <= h_lo < h_hi):
            raise ValueError(
                f"bands must satisfy 0 <= m_lo < m_hi <= h_lo < h_hi, got {self.medium}, {self.high}"
            )
        object.__setattr__(self, "medium", (float(m_lo), float(m_hi)))
        object.__setattr__(self, "high", (float(h_lo), float(h_hi)))

    def medium_mask(self, freqs: np.ndarray) -> np.ndarray:
        return (freqs > self.medium[0]) & (freqs <= self.medium[1])

    def high_mask(self, freqs: np.ndarray) -> np.ndarray:
        return (freqs > self.high[0]) & (freqs <= self.high[1])


@dataclass(frozen=True)
class PresetFrequencies:
    f1_hz: float
    f2_hz: float
    bands: FrequencyBands
    vote_counts: Dict[Tuple[float, float], int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.bands.medium[0] < self.f1_hz <= self.bands.medium[1]:
            raise ValueError(f"f1={self.f1_hz} Hz outside medium band {self.bands.medium}")
        if not self.bands.high[0] < self.f2_hz <= self.bands.high[1]:
            raise ValueError(f"f2={self.f2_hz} Hz outside high band {self.bands.high}")


def _curve_vote(spectrum: EisSpectrum, bands: FrequencyBands, seed: int) -> Tuple[float, float]:
    freqs = spectrum.grid.frequencies
    med_mask = bands.medium_mask(freqs)
    high_mask = bands.high_mask(freqs)
    if med_mask.sum() < 2 or high_mask.sum() < 2:
        raise BandEmptyError(
            f"curve needs >= 2 points per band, found {int(med_mask.sum())} medium "
            f"and {int(high_mask.sum())} high"
        )
    union = med_mask | high_mask
    f_u = freqs[union]
    re_u = spectrum.re_mohm[union]

    feats = np.column_stack([np.log10(f_u), re_u])
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std[std == 0.0] = 1.0
    result = kmeans((feats - mean) / std, 2, seed=seed)

    # the lower-mean-frequency cluster is the medium one
    mean_f = [f_u[result.assignments == c].mean() for c in (0, 1)]
    med_cluster = int(np.argmin(mean_f))
    centers = []
    for cluster, mask in ((med_cluster, med_mask), (1 - med_cluster, high_mask)):
        in_cluster = union.copy()
        in_cluster[union] = result.assignments == cluster
        candidates = freqs[in_cluster & mask]
        if candidates.size == 0:
            candidates = freqs[mask]
        target = mean_f[cluster]
        centers.append(float(candidates[np.argmin(np.abs(candidates - target))]))
    return centers[0], centers[1]


def select_preset_frequencies(
    curves: Sequence[EisSpectrum],
    bands: FrequencyBands = FrequencyBands(),
    seed: int = 0,
) -> PresetFrequencies:
    """Modal (f1, f2) combination over the given laboratory curves."""
    if not curves:
        raise NoDataError("no laboratory curves to select preset frequencies from")
    votes = Counter()
    for i, curve in enumerate(curves):
        curve_seed = int(rng_from(seed, i).integers(2**31 - 1))
        votes[_curve_vote(curve, bands, curve_seed)] += 1
    (f1, f2), _ = sorted(votes.items(), key=lambda kv: (-kv[1], kv[0]))[0]
    return PresetFrequencies(f1_hz=f1, f2_hz=f2, bands=bands, vote_counts=dict(votes))
