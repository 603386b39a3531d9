"""Krylov-subspace action of the matrix exponential for Hermitian operators.

Computes w = exp(coeff * H) v without materializing H, via the Lanczos
recursion with full reorthogonalization (done as two BLAS-level products per
iteration, cheap at the basis sizes used here).  Used for the dense
statevector propagator as well as for the local effective Hamiltonians
inside two-site TDVP.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import math

import numpy as np
from scipy.linalg import get_lapack_funcs

_stev = get_lapack_funcs("stev", (np.empty(0, dtype=np.float64),))


@dataclass
class LanczosResult:
    vector: np.ndarray
    iterations: int
    converged: bool


def expm_lanczos(
    matvec: Callable[[np.ndarray], np.ndarray],
    v: np.ndarray,
    coeff: complex,
    k_max: int = 50,
    tol: float = 1e-12,
) -> LanczosResult:
    """Approximate exp(coeff * H) v for Hermitian H given through ``matvec``.

    Builds an orthonormal Krylov basis V_k and the real tridiagonal projection
    T_k, then returns ||v|| * V_k exp(coeff T_k) e_1.  Iteration stops on a
    happy breakdown (the Krylov space is invariant, so the result is exact) or
    once the coefficient vector exp(coeff T_k) e_1 moves by less than ``tol``
    between iterations.

    Args:
        matvec: action of the Hermitian operator on a flat complex vector.
        v: start vector (not necessarily normalized).
        coeff: scalar multiplying H in the exponent, e.g. -1j*dt.
        k_max: Krylov-basis cap; non-convergence at k_max is reported through
            ``converged``, not raised.
        tol: relative tolerance on the local coefficient vector.

    Returns:
        LanczosResult with the evolved vector, the basis size used, and a
        convergence flag.
    """
    norm_v = float(np.linalg.norm(v))
    if norm_v == 0.0:
        return LanczosResult(vector=v.copy(), iterations=0, converged=True)

    dim = v.size
    k_max = max(1, min(k_max, dim))
    basis = np.empty((k_max, dim), dtype=complex)
    basis[0] = np.ravel(v) / norm_v
    alphas = np.empty(k_max)
    betas = np.empty(k_max)
    y_prev: np.ndarray | None = None

    for k in range(k_max):
        w = np.ravel(matvec(basis[k]))
        alphas[k] = np.real(np.vdot(basis[k], w))
        # full reorthogonalization against the basis built so far
        active = basis[: k + 1]
        w -= active.conj() @ w @ active  # (k+1,) coefficients times basis rows
        beta = math.sqrt(np.vdot(w, w).real)

        if k < 2 and k + 1 < k_max and beta > tol * max(1.0, abs(alphas[k])):
            # exp(T_k) e1 cannot have settled with a growing 2-vector basis;
            # skip the spectral solve until the basis can resolve it
            betas[k] = beta
            basis[k + 1] = w / beta
            continue

        y = _expm_tridiag_e1(alphas[: k + 1], betas[:k], coeff)
        if y_prev is not None and _update_size(y, y_prev) <= tol:
            return LanczosResult(
                vector=norm_v * (y @ basis[: k + 1]), iterations=k + 1, converged=True
            )
        if beta <= tol * max(1.0, abs(alphas[k])):
            # happy breakdown: Krylov space is invariant, result exact
            return LanczosResult(
                vector=norm_v * (y @ basis[: k + 1]), iterations=k + 1, converged=True
            )
        y_prev = y
        betas[k] = beta
        if k + 1 < k_max:
            basis[k + 1] = w / beta

    return LanczosResult(vector=norm_v * (y @ basis), iterations=k_max, converged=False)


def _update_size(y: np.ndarray, y_prev: np.ndarray) -> float:
    d = y[:-1] - y_prev
    return math.sqrt(np.vdot(d, d).real) + abs(y[-1])


def _expm_tridiag_e1(alphas: np.ndarray, betas: np.ndarray, coeff: complex) -> np.ndarray:
    """exp(coeff * T) e_1 for the real symmetric tridiagonal T (LAPACK stev)."""
    if len(alphas) == 1:
        return np.array([np.exp(coeff * alphas[0])])
    eigvals, eigvecs, info = _stev(alphas, betas, compute_v=1)
    if info != 0:  # pragma: no cover - stev failure on a tiny tridiagonal
        raise np.linalg.LinAlgError(f"stev failed with info={info}")
    return eigvecs @ (np.exp(coeff * eigvals) * eigvecs[0, :])
