"""SOC and impedance interval binning for translation-model routing."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from ..exceptions import NoDataError, NonMonotonicGridError

# field SOC deciles: [0,0.1) .. [0.8,0.9), plus the closed top bin [0.9,1.0]
SOC_BIN_COUNT = 10

RE_BIN_PRESETS = {
    "dataset1": (14.0, 18.0, 22.0, 26.0, 30.0),
    "dataset2": (4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0),
}


@dataclass(frozen=True)
class SocBinning:
    """Fixed decile bins over the SOC fraction with per-bin labels.

    The label of a bin is its lower edge; it names the laboratory SOC a
    field reading in that bin is conventionally translated to.
    """

    n_bins: int = SOC_BIN_COUNT

    def __post_init__(self):
        if self.n_bins != SOC_BIN_COUNT:
            raise ValueError("SOC binning is fixed to ten decile bins")

    def bin(self, soc: float) -> int:
        if not 0.0 <= soc <= 1.0:
            raise ValueError(f"soc must lie in [0, 1], got {soc}")
        return min(int(soc * self.n_bins), self.n_bins - 1)

    def label(self, bin_index: int) -> float:
        if not 0 <= bin_index < self.n_bins:
            raise ValueError(f"bin index {bin_index} out of range")
        return bin_index / self.n_bins


@dataclass(frozen=True)
class ReBinning:
    """Contiguous impedance intervals given by their edges in mOhm.

    Bins are half-open [e_k, e_{k+1}) except the last, which is closed.
    Values outside the span clamp to the nearest bin and are flagged.
    """

    edges: Tuple[float, ...]

    def __post_init__(self):
        edges = tuple(float(e) for e in self.edges)
        if len(edges) < 2:
            raise NonMonotonicGridError("re binning needs at least two edges")
        if any(b <= a for a, b in zip(edges, edges[1:])):
            raise NonMonotonicGridError(f"re bin edges must be strictly increasing: {edges}")
        object.__setattr__(self, "edges", edges)

    @property
    def n_bins(self) -> int:
        return len(self.edges) - 1

    @classmethod
    def preset(cls, name: str) -> "ReBinning":
        if name not in RE_BIN_PRESETS:
            raise ValueError(f"unknown re-binning preset {name!r}")
        return cls(edges=RE_BIN_PRESETS[name])

    @classmethod
    def from_values(cls, values, n_bins: int) -> "ReBinning":
        """Equal-width bins spanning the observed value range."""
        vals = np.asarray(values, dtype=float)
        if vals.size == 0:
            raise NoDataError("cannot derive re bins from no values")
        lo, hi = float(vals.min()), float(vals.max())
        if hi <= lo:
            hi = lo + max(abs(lo) * 1e-6, 1e-6)
        return cls(edges=tuple(np.linspace(lo, hi, int(n_bins) + 1)))

    def assign(self, re_mohm: float) -> Tuple[int, bool]:
        """(bin index, out_of_range flag); out-of-span values clamp."""
        if re_mohm < self.edges[0]:
            return 0, True
        if re_mohm > self.edges[-1]:
            return self.n_bins - 1, True
        idx = int(np.searchsorted(self.edges, re_mohm, side="right")) - 1
        return min(idx, self.n_bins - 1), False


class BinAssignment(NamedTuple):
    soc_bin: int
    re_bin: int
    out_of_range: bool


def assign_bins(soc: float, re_mohm: float, soc_binning: SocBinning,
                re_binning: ReBinning) -> BinAssignment:
    re_bin, oor = re_binning.assign(re_mohm)
    return BinAssignment(soc_bin=soc_binning.bin(soc), re_bin=re_bin, out_of_range=oor)
