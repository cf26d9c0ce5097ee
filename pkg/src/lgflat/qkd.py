"""High-dimensional BB84 key rates from crosstalk data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .crosstalk import CrosstalkMatrix, visibility


@dataclass(frozen=True)
class KeyRateResult:
    dimension: int
    qber: float
    rate_bits: float

    @property
    def reported_rate(self) -> float:
        """Rate floored at zero, for reports only."""
        return max(0.0, self.rate_bits)


def entropy_d(x: float, d: int) -> float:
    """d-dimensional Shannon entropy ``-x log2(x/(d-1)) - (1-x) log2(1-x)``."""
    if d < 2:
        raise ValueError("d must be >= 2")
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"x must lie in [0, 1], got {x}")
    h = 0.0
    if x > 0:
        h -= x * (math.log2(x) - math.log2(d - 1))
    if x < 1:
        h -= (1 - x) * math.log2(1 - x)
    return h


def secret_key_rate(d: int, e_b: float) -> KeyRateResult:
    return KeyRateResult(d, float(e_b), math.log2(d) - 2.0 * entropy_d(e_b, d))


def qber_from_crosstalk(m: CrosstalkMatrix | np.ndarray, subset: Sequence[int] | None = None) -> float:
    """``1 - V`` on the square submatrix picked out by ``subset``."""
    C = m.C if isinstance(m, CrosstalkMatrix) else np.asarray(m, dtype=float)
    if subset is None:
        subset = range(C.shape[0])
    idx = list(subset)
    if len(idx) < 2:
        raise ValueError("subset needs at least two indices")
    if len(set(idx)) != len(idx):
        raise ValueError("subset indices must be distinct")
    if min(idx) < 0 or max(idx) >= C.shape[0]:
        raise IndexError("subset index out of range")
    return 1.0 - visibility(C[np.ix_(idx, idx)])


def subset_key_rate(m: CrosstalkMatrix | np.ndarray, subset: Sequence[int]) -> KeyRateResult:
    e = min(1.0, max(0.0, qber_from_crosstalk(m, subset)))
    return secret_key_rate(len(subset), e)
