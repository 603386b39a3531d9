"""Run-time scaling-law fits, large-(N, chi) extrapolation and QPU crossover.

Per-step MPS cost is fitted as t(N, chi) = a + b N^{3/2} chi^3 + c N^2 chi^2
and the NQS cost as t(N) = a_q N + b_q N^2 + c_q N^3, both by non-negative
least squares (run times cannot have negative components).  Because samples
span orders of magnitude, rows are weighted by 1/t by default so the fit
minimizes relative rather than absolute residuals.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import UnderdeterminedFit
from .mps import memory_estimate
from .units import watt_seconds_to_kwh

#: Flat GPU power draw assumed for classical energy projections (maximum
#: rated consumption under sustained load); override with a measured power log.
DEFAULT_GPU_POWER_WATTS = 400.0


@dataclass(frozen=True)
class RuntimeSample:
    n: int
    chi: int  # 0 marks NQS rows
    seconds_per_step: float
    hardware_tag: str = "cpu"
    n_workers: int = 1

    @property
    def method(self) -> str:
        return "NQS" if self.chi == 0 else "MPS"

    def __post_init__(self):
        if self.seconds_per_step <= 0:
            raise ValueError(f"seconds_per_step must be positive, got {self.seconds_per_step}")


@dataclass(frozen=True)
class CostModelMPS:
    a: float
    b: float
    c: float
    fit_residual: float  # relative RMS
    domain: dict

    def predict(self, n: float, chi: float) -> float:
        return self.a + self.b * n**1.5 * chi**3 + self.c * n**2 * chi**2


@dataclass(frozen=True)
class CostModelNQS:
    a_q: float
    b_q: float
    c_q: float
    fit_residual: float
    domain: dict

    def predict(self, n: float, chi: float = 0) -> float:
        return self.a_q * n + self.b_q * n**2 + self.c_q * n**3


@dataclass(frozen=True)
class ResourceReport:
    method: str
    n: int
    chi: int
    t_pulse: float
    n_steps: int
    seconds_per_step: float
    total_seconds: float
    memory_bytes: float | None
    energy_kwh: float
    power_watts: float

    def as_dict(self) -> dict:
        return {
            "method": self.method,
            "N": self.n,
            "chi": self.chi,
            "t_pulse_s": self.t_pulse,
            "n_steps": self.n_steps,
            "seconds_per_step": self.seconds_per_step,
            "total_seconds": self.total_seconds,
            "memory_bytes": self.memory_bytes,
            "energy_kwh": self.energy_kwh,
            "power_watts": self.power_watts,
        }


@dataclass(frozen=True)
class CrossoverResult:
    n_time: float | None
    n_energy: float | None
    sweep: list[int]
    at_boundary_time: bool = False
    at_boundary_energy: bool = False


def _nnls_fit(samples, basis_fn, n_basis: int, relative: bool):
    times = np.array([s.seconds_per_step for s in samples], dtype=float)
    design = np.array([basis_fn(s) for s in samples], dtype=float)
    active = ~np.all(design == 0.0, axis=0)
    if len(samples) < 4:
        raise UnderdeterminedFit(f"need at least 4 samples, got {len(samples)}")
    if len({(s.n, s.chi) for s in samples}) < 2:
        raise UnderdeterminedFit("all samples share one (N, chi) point")
    weights = 1.0 / times if relative else np.ones_like(times)
    a_mat = design * weights[:, None]
    b_vec = times * weights
    if np.linalg.matrix_rank(a_mat[:, active]) < int(active.sum()):
        raise UnderdeterminedFit("design matrix is rank-deficient for the sampled (N, chi)")
    coeffs = np.zeros(n_basis)
    sol, _ = nnls(a_mat[:, active], b_vec)
    coeffs[active] = sol
    pred = design @ coeffs
    residual = float(np.sqrt(np.mean(((pred - times) / times) ** 2)))
    return coeffs, residual


def fit_mps(samples: list[RuntimeSample], relative_weights: bool = True) -> CostModelMPS:
    """Fit t(N, chi) = a + b N^{3/2} chi^3 + c N^2 chi^2 over MPS samples.

    Samples should span at least two distinct N and two distinct chi for the
    surface terms to be identifiable; degenerate designs raise
    UnderdeterminedFit.
    """
    coeffs, residual = _nnls_fit(
        samples,
        lambda s: (1.0, s.n**1.5 * s.chi**3, s.n**2 * s.chi**2),
        3,
        relative_weights,
    )
    return CostModelMPS(
        a=float(coeffs[0]),
        b=float(coeffs[1]),
        c=float(coeffs[2]),
        fit_residual=residual,
        domain=_domain(samples),
    )


def fit_nqs(
    samples: list[RuntimeSample],
    relative_weights: bool = True,
    normalize_workers: bool = True,
) -> CostModelNQS:
    """Fit t(N) = a_q N + b_q N^2 + c_q N^3 over NQS samples.

    With ``normalize_workers`` the per-step seconds are divided by the GPU
    worker count first (run time scales down roughly linearly with GPUs).
    """
    if normalize_workers:
        samples = [
            RuntimeSample(
                n=s.n,
                chi=s.chi,
                seconds_per_step=s.seconds_per_step / s.n_workers,
                hardware_tag=s.hardware_tag,
                n_workers=1,
            )
            for s in samples
        ]
    coeffs, residual = _nnls_fit(
        samples, lambda s: (float(s.n), float(s.n) ** 2, float(s.n) ** 3), 3, relative_weights
    )
    return CostModelNQS(
        a_q=float(coeffs[0]),
        b_q=float(coeffs[1]),
        c_q=float(coeffs[2]),
        fit_residual=residual,
        domain=_domain(samples),
    )


def _domain(samples) -> dict:
    return {
        "n_min": min(s.n for s in samples),
        "n_max": max(s.n for s in samples),
        "chi_min": min(s.chi for s in samples),
        "chi_max": max(s.chi for s in samples),
    }


def extrapolate(
    model,
    n: int,
    chi: int,
    t_pulse: float,
    dt: float,
    power_watts: float = DEFAULT_GPU_POWER_WATTS,
) -> ResourceReport:
    """Project total run time, memory and energy for one quench simulation.

    Issues a warning (never an error) when (N, chi) falls outside the fitted
    sample domain.  Memory follows the closed-form MPS model; NQS reports
    carry no memory figure.
    """
    dom = model.domain
    if not (dom["n_min"] <= n <= dom["n_max"]) or not (
        dom["chi_min"] <= chi <= dom["chi_max"]
    ):
        warnings.warn(
            f"extrapolating outside the fitted domain: N={n}, chi={chi} vs {dom}",
            stacklevel=2,
        )
    n_steps = int(round(t_pulse / dt))
    per_step = float(model.predict(n, chi))
    total = n_steps * per_step
    is_mps = isinstance(model, CostModelMPS)
    memory = memory_estimate(n, chi).total if is_mps else None
    return ResourceReport(
        method="MPS" if is_mps else "NQS",
        n=n,
        chi=chi,
        t_pulse=t_pulse,
        n_steps=n_steps,
        seconds_per_step=per_step,
        total_seconds=total,
        memory_bytes=memory,
        energy_kwh=watt_seconds_to_kwh(power_watts, total),
        power_watts=power_watts,
    )


def crossover(classical_fn, qpu_fn, n_sweep: list[int]) -> CrossoverResult:
    """Smallest N where the QPU undercuts the classical projection.

    ``classical_fn(N) -> ResourceReport`` and ``qpu_fn(N) -> QpuSchedule`` are
    evaluated over the sweep; separate crossover points are located for total
    time and for energy, log-interpolated between grid points.  ``None`` means
    the QPU never wins inside the sweep; a crossover flagged ``at_boundary``
    sits at the first grid point (the true crossing is at or below it).
    """
    if not n_sweep:
        raise ValueError("empty N sweep")
    n_sweep = sorted(n_sweep)
    cl_time, cl_energy, q_time, q_energy = [], [], [], []
    for n in n_sweep:
        report = classical_fn(n)
        schedule = qpu_fn(n)
        cl_time.append(report.total_seconds)
        cl_energy.append(report.energy_kwh)
        q_time.append(schedule.budget.wall_seconds)
        q_energy.append(schedule.energy_kwh)

    def locate(classical, qpu):
        wins = [q < c for q, c in zip(qpu, classical)]
        if not any(wins):
            return None, False
        first = wins.index(True)
        if first == 0:
            return float(n_sweep[0]), True
        # log-interpolate the root of log(classical) - log(qpu) in [first-1, first]
        n0, n1 = n_sweep[first - 1], n_sweep[first]
        f0 = math.log(classical[first - 1]) - math.log(qpu[first - 1])
        f1 = math.log(classical[first]) - math.log(qpu[first])
        if f1 == f0:
            return float(n1), False
        frac = -f0 / (f1 - f0)
        return float(n0 + frac * (n1 - n0)), False

    n_time, b_time = locate(cl_time, q_time)
    n_energy, b_energy = locate(cl_energy, q_energy)
    return CrossoverResult(
        n_time=n_time,
        n_energy=n_energy,
        sweep=list(n_sweep),
        at_boundary_time=b_time,
        at_boundary_energy=b_energy,
    )


# ---------------------------------------------------------------------------
# file interfaces
# ---------------------------------------------------------------------------

def read_timing_csv(path) -> list[RuntimeSample]:
    """Read the timing CSV (N, chi, dt_ns, seconds_per_step, hardware_tag,
    n_workers); chi = 0 rows are NQS samples."""
    samples = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.startswith("N,"):
                continue
            n, chi, _dt_ns, sec, tag, workers = line.split(",")
            samples.append(
                RuntimeSample(
                    n=int(n),
                    chi=int(chi),
                    seconds_per_step=float(sec),
                    hardware_tag=tag,
                    n_workers=int(workers),
                )
            )
    return samples


def mean_power_from_log(path) -> float:
    """Mean watts from a power-log CSV (timestamp_iso8601, watts)."""
    watts = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#") or line.lower().startswith("timestamp"):
                continue
            watts.append(float(line.split(",")[1]))
    if not watts:
        raise ValueError(f"power log {path} contains no samples")
    return float(np.mean(watts))


def format_resource_table(reports: list[ResourceReport], qpu_rows: dict | None = None) -> str:
    """Aligned text table with Mem / Time / Energy columns per problem size."""
    from .units import format_bytes, format_duration

    sizes = sorted({r.n for r in reports})
    lines = []
    header = f"{'Method':<24}" + "".join(
        f"| {f'N={n}':^30}" for n in sizes
    )
    sub = f"{'':<24}" + "".join(f"| {'Mem':>9} {'Time':>9} {'Energy':>9} " for _ in sizes)
    lines.append(header)
    lines.append(sub)
    lines.append("-" * len(sub))
    by_method: dict[str, dict[int, ResourceReport]] = {}
    for r in reports:
        key = f"{r.method} (chi={r.chi})" if r.method == "MPS" else r.method
        by_method.setdefault(key, {})[r.n] = r
    for key, row in sorted(by_method.items()):
        cells = []
        for n in sizes:
            r = row.get(n)
            if r is None:
                cells.append(f"| {'-':>9} {'-':>9} {'-':>9} ")
                continue
            mem = format_bytes(r.memory_bytes) if r.memory_bytes else "-"
            cells.append(
                f"| {mem:>9} {format_duration(r.total_seconds):>9} "
                f"{r.energy_kwh:>6.3g} kWh"
            )
        lines.append(f"{key:<24}" + "".join(cells))
    if qpu_rows:
        cells = []
        for n in sizes:
            sched = qpu_rows.get(n)
            if sched is None:
                cells.append(f"| {'-':>9} {'-':>9} {'-':>9} ")
                continue
            cells.append(
                f"| {'-':>9} {format_duration(sched.budget.wall_seconds):>9} "
                f"{sched.energy_kwh:>6.3g} kWh"
            )
        lines.append(f"{'QPU':<24}" + "".join(cells))
    return "\n".join(lines)
