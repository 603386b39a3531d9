"""MPS container, canonical-form maintenance and observable contractions.

MPS tensors are indexed (chi_left, phys, chi_right).  The orthogonality
center is tracked explicitly: tensors left of it are left-isometries,
tensors right of it are right-isometries.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mpo import MpoHamiltonian


@dataclass
class MpsState:
    tensors: list[np.ndarray]
    orthogonality_center: int = 0
    max_chi: int = 2**30
    truncation_weight: float = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        """Bond dimensions including the trivial boundaries, length N + 1."""
        return [self.tensors[0].shape[0]] + [t.shape[2] for t in self.tensors]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims)

    def check_canonical(self, tol: float = 1e-10) -> bool:
        """Isometry check left and right of the center."""
        for i, a in enumerate(self.tensors):
            if i < self.orthogonality_center:
                m = a.reshape(-1, a.shape[2])
                if not np.allclose(m.conj().T @ m, np.eye(a.shape[2]), atol=tol):
                    return False
            elif i > self.orthogonality_center:
                m = a.reshape(a.shape[0], -1)
                if not np.allclose(m @ m.conj().T, np.eye(a.shape[0]), atol=tol):
                    return False
        return True

    def norm(self) -> float:
        left = np.ones((1, 1), dtype=complex)
        for a in self.tensors:
            left = np.einsum("lm,ldr,mds->rs", left, a, a.conj())
        return float(np.sqrt(np.real(left[0, 0])))


def product_all_ground(n_sites: int, max_chi: int = 2**30) -> MpsState:
    """|00...0> as a bond-dimension-1 MPS."""
    site = np.zeros((1, 2, 1), dtype=complex)
    site[0, 0, 0] = 1.0
    return MpsState(tensors=[site.copy() for _ in range(n_sites)], max_chi=max_chi)


def random_state(n_sites: int, chi: int, rng: np.random.Generator) -> MpsState:
    """Normalized random MPS with every interior bond saturated at min(chi, 2^k).

    Used to time TDVP steps at a prescribed bond dimension: the quench itself
    reaches the cap only after entanglement has grown, whereas timing samples
    must reflect the sustained cost at that cap.
    """

    def right_dim(i: int) -> int:
        return min(chi, 2 ** (i + 1), 2 ** (n_sites - 1 - i))

    tensors = []
    left = 1
    for i in range(n_sites):
        right = right_dim(i)
        shape = (left, 2, right)
        t = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        tensors.append(t)
        left = right
    state = MpsState(tensors=tensors, max_chi=chi)
    # right-canonicalize so the orthogonality center lands on site 0
    for i in range(n_sites - 1, 0, -1):
        a = state.tensors[i]
        l, d, r = a.shape
        q, rmat = np.linalg.qr(a.reshape(l, d * r).conj().T)
        state.tensors[i] = q.conj().T.reshape(-1, d, r)
        state.tensors[i - 1] = np.tensordot(state.tensors[i - 1], rmat.conj().T, axes=(2, 0))
    state.tensors[0] /= np.linalg.norm(state.tensors[0])
    state.orthogonality_center = 0
    return state


# ---------------------------------------------------------------------------
# environment contractions (shared by observables and the TDVP engine)
# ---------------------------------------------------------------------------

def update_left_env(left: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Grow the (ket, mpo, bra) environment by one site from the left."""
    t = np.tensordot(left, a, axes=([0], [0]))  # (w, bra, s, ket')
    t = np.tensordot(t, w, axes=([0, 2], [0, 2]))  # (bra, ket', t, w')
    return np.tensordot(t, a.conj(), axes=([0, 2], [0, 1]))  # (ket', w', bra')


def update_right_env(right: np.ndarray, a: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Grow the (ket, mpo, bra) environment by one site from the right."""
    t = np.tensordot(a, right, axes=([2], [0]))  # (ket, s, w', bra')
    t = np.tensordot(t, w, axes=([1, 2], [2, 3]))  # (ket, bra', w, t)
    return np.tensordot(t, a.conj(), axes=([3, 1], [1, 2]))  # (ket, w, bra)


def trivial_env() -> np.ndarray:
    return np.ones((1, 1, 1), dtype=complex)


def mpo_expectation(state: MpsState, mpo: MpoHamiltonian) -> float:
    """<psi|H|psi> / <psi|psi> by folding the network left to right."""
    left = trivial_env()
    for a, w in zip(state.tensors, mpo.tensors):
        left = update_left_env(left, a, w)
    return float(np.real(left[0, 0, 0])) / state.norm() ** 2


def site_expectations(state: MpsState, op: np.ndarray) -> np.ndarray:
    """<op_i> for a single-site operator at every site, normalized."""
    n = state.n_sites
    right_envs: list[np.ndarray] = [np.ones((1, 1), dtype=complex)] * (n + 1)
    for i in range(n - 1, -1, -1):
        a = state.tensors[i]
        right_envs[i] = np.einsum("ldr,rs,mds->lm", a, right_envs[i + 1], a.conj())
    norm_sq = float(np.real(right_envs[0][0, 0]))
    values = np.empty(n, dtype=float)
    left = np.ones((1, 1), dtype=complex)
    for i in range(n):
        a = state.tensors[i]
        val = np.einsum("lm,ldr,de,mes,rs->", left, a, op, a.conj(), right_envs[i + 1])
        values[i] = float(np.real(val)) / norm_sq
        left = np.einsum("lm,ldr,mds->rs", left, a, a.conj())
    return values
