"""Resource-estimation toolkit for post-quench Ising dynamics.

Simulates the neutral-atom register pipeline (loading, rearrangement, shot
budgets), runs exact and MPS-TDVP classical simulations with timing and
memory instrumentation, fits run-time scaling laws, and locates the
run-time/energy crossover between QPU and classical execution.
"""

__version__ = "0.1.0"

from . import budget, convergence, costfit, model, mps, oracle, register

__all__ = [
    "__version__",
    "budget",
    "convergence",
    "costfit",
    "model",
    "mps",
    "oracle",
    "register",
]
