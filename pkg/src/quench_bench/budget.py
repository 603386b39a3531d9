"""Shot budgets: precision -> usable shots -> total attempts -> time and energy.

Measuring a +/-1-valued observable to precision alpha (95% confidence,
sigma_O <= alpha/2) needs m = ceil(16 p (1-p) / alpha^2) usable shots.  Only
defect-free register preparations yield usable shots, so the attempt count n
is inflated to make P[Binom(n, p_defect_free) >= m] reach the requested
confidence.  Wall time is n / shot_rate: each attempt costs one cycle no
matter the pulse length (pulses of a few us against a ~1 s cycle).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import binom, norm

from .errors import InvalidPrecision, Unsatisfiable
from .register import DefectProbabilities, defect_free_analytic, expected_counts
from .units import watt_seconds_to_kwh

#: Largest n evaluated with the exact binomial tail; beyond this the normal
#: approximation with continuity correction takes over.
EXACT_TAIL_LIMIT = 1_000_000


@dataclass(frozen=True)
class ShotBudget:
    m_usable: int
    alpha: float
    confidence: float
    p_defect_free: float
    n_attempts: int
    shot_rate: float  # Hz
    wall_seconds: float


@dataclass(frozen=True)
class QpuSchedule:
    budget: ShotBudget
    qpu_power_watts: float
    energy_kwh: float
    counts: dict


def shots_for_precision(p: float, alpha: float) -> int:
    """ceil(16 p (1-p) / alpha^2); zero at p in {0, 1} (no variance)."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p = {p} outside [0, 1]")
    if alpha <= 0.0:
        raise InvalidPrecision(f"alpha must be positive, got {alpha}")
    return math.ceil(16.0 * p * (1.0 - p) / alpha**2)


def _tail_at_least(n: int, p: float, m: int) -> float:
    """P[Binom(n, p) >= m]; exact below EXACT_TAIL_LIMIT, else normal approx."""
    if m <= 0:
        return 1.0
    if n < m:
        return 0.0
    if n <= EXACT_TAIL_LIMIT:
        return float(binom.sf(m - 1, n, p))
    mean = n * p
    sigma = math.sqrt(n * p * (1.0 - p))
    if sigma == 0.0:
        return 1.0 if mean >= m else 0.0
    return float(norm.sf((m - 0.5 - mean) / sigma))


def attempts_for_usable(m: int, p_df: float, confidence: float = 0.95) -> int:
    """Smallest n such that P[Binom(n, p_df) >= m] >= confidence.

    The tail probability is nondecreasing in n, so the search brackets by
    doubling and then bisects.
    """
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    if not 0.0 < confidence < 1.0:
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    if p_df <= 0.0:
        raise Unsatisfiable("defect-free probability is zero; no attempt count suffices")
    if p_df > 1.0:
        raise ValueError(f"p_df = {p_df} outside (0, 1]")
    if m == 0:
        return 0
    if p_df == 1.0:
        return m

    lo = m  # tail(m-1) = 0 < confidence always
    hi = max(m, math.ceil(m / p_df))
    while _tail_at_least(hi, p_df, m) < confidence:
        lo = hi
        hi *= 2
        if hi > 2**62:  # pragma: no cover - defensive
            raise Unsatisfiable("attempt search diverged")
    while lo + 1 < hi:
        mid = (lo + hi) // 2
        if _tail_at_least(mid, p_df, m) >= confidence:
            hi = mid
        else:
            lo = mid
    return hi if _tail_at_least(lo, p_df, m) < confidence else lo


def qpu_schedule(
    n_register: int,
    probs: DefectProbabilities,
    alpha: float = 0.05,
    confidence: float = 0.95,
    shot_rate: float = 1.0,
    qpu_power_watts: float = 3200.0,
    p_observable: float = 0.5,
) -> QpuSchedule:
    """Full QPU budget for one quench task on an n_register-atom array.

    Uses the expected-counts model (``register.expected_counts``) for the
    defect-free probability; ``p_observable`` defaults to the worst case 0.5.
    """
    if shot_rate <= 0:
        raise ValueError(f"shot_rate must be positive, got {shot_rate}")
    counts = expected_counts(n_register)
    p_df = defect_free_analytic(counts, probs)
    m = shots_for_precision(p_observable, alpha)
    n = attempts_for_usable(m, p_df, confidence)
    wall = n / shot_rate
    budget = ShotBudget(
        m_usable=m,
        alpha=alpha,
        confidence=confidence,
        p_defect_free=p_df,
        n_attempts=n,
        shot_rate=shot_rate,
        wall_seconds=wall,
    )
    return QpuSchedule(
        budget=budget,
        qpu_power_watts=qpu_power_watts,
        energy_kwh=watt_seconds_to_kwh(qpu_power_watts, wall),
        counts=counts,
    )
