"""Closed-form memory model for two-site TDVP on square lattices.

Component formulas (s = bytes per scalar, d = local dimension, k = Krylov
basis size, h = peak MPO bond dimension 3*sqrt(N) + 2):

    M_mps          = s d chi^2 N
    M_baths        = s chi^2 (3 N^{3/2} - 7 N - 12 sqrt(N) - 4)
    M_krylov       = k s d chi^2
    M_intermediate = 3 s h d^2 chi^2

The bath term is the trapezoid area under the linear-growth-then-saturation
bond profile and dominates at scale; its leading part 3 s chi^2 N^{3/2}
(48 chi^2 N^{3/2} for complex doubles) is reported separately.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class MemoryBreakdown:
    mps: float
    baths: float
    krylov: float
    intermediate: float
    total: float
    leading_term: float

    def as_dict(self) -> dict:
        return {
            "mps_bytes": self.mps,
            "baths_bytes": self.baths,
            "krylov_bytes": self.krylov,
            "intermediate_bytes": self.intermediate,
            "total_bytes": self.total,
            "leading_term_bytes": self.leading_term,
        }


def memory_estimate(n: int, chi: int, d: int = 2, s: int = 16, k: int = 50) -> MemoryBreakdown:
    """Upper-bound memory for evolving an N-site MPS at bond dimension chi.

    The bath term goes negative for tiny N where the saturated-profile
    picture does not apply; it is clamped at zero there.
    """
    if n < 1 or chi < 1 or d < 1 or s < 1 or k < 1:
        raise ValueError("all memory-model inputs must be positive")
    sqrt_n = math.sqrt(n)
    chi2 = float(chi) ** 2
    mps = s * d * chi2 * n
    baths = max(0.0, s * chi2 * (3.0 * n * sqrt_n - 7.0 * n - 12.0 * sqrt_n - 4.0))
    krylov = k * s * d * chi2
    h_max = 3.0 * sqrt_n + 2.0
    intermediate = 3.0 * s * h_max * d**2 * chi2
    total = mps + baths + krylov + intermediate
    leading = 3.0 * s * chi2 * n * sqrt_n
    return MemoryBreakdown(
        mps=mps,
        baths=baths,
        krylov=krylov,
        intermediate=intermediate,
        total=total,
        leading_term=leading,
    )
