"""Matrix-product-state machinery: long-range MPO, two-site TDVP, memory model."""

from .memory import MemoryBreakdown, memory_estimate
from .mpo import MpoHamiltonian, build_mpo, mpo_dense_matrix
from .state import MpsState, mpo_expectation, site_expectations
from .evolve import (
    QuenchRunResult,
    TdvpEngine,
    TdvpStepRecord,
    benchmark_steps,
    run_quench,
    tdvp_step,
    write_timing_csv,
)

__all__ = [
    "MemoryBreakdown",
    "MpoHamiltonian",
    "MpsState",
    "QuenchRunResult",
    "TdvpEngine",
    "TdvpStepRecord",
    "benchmark_steps",
    "build_mpo",
    "memory_estimate",
    "mpo_dense_matrix",
    "mpo_expectation",
    "run_quench",
    "site_expectations",
    "tdvp_step",
    "write_timing_csv",
]
