"""Exact finite-automaton MPO for the long-range quench Hamiltonian.

Sites are visited in snake order.  The automaton has a "ready" state (all
identities so far), a "done" state (one term completed), and one carrier
state per source site that has already placed its ``n`` operator but still
owes a coupling to a site further along the snake.  The bond dimension at a
cut is therefore 2 plus the number of open couplings across it, which for
square lattices with the default interaction cutoff peaks at 3*sqrt(N) + 2.

MPO tensors are indexed (h_left, phys_out, phys_in, h_right); contracting all
of them reproduces the Hamiltonian matrix exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..model import InteractionMatrix, LatticeSpec, QuenchParams

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_NUMBER_OP = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
_IDENTITY = np.eye(2, dtype=complex)


@dataclass
class MpoHamiltonian:
    """MPO tensors plus the bond-dimension profile h_0..h_N (h_0 = h_N = 1)."""

    tensors: list[np.ndarray]
    bond_profile: list[int]
    d: int = 2

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def max_bond(self) -> int:
        return max(self.bond_profile)


def build_mpo(
    lattice: LatticeSpec, params: QuenchParams, v: InteractionMatrix
) -> MpoHamiltonian:
    """Build the exact MPO for all couplings retained in ``v``.

    The coupling coefficient V_jk sits on the closing end of each two-site
    string (the opening operator is a bare ``n``), so carrier states are
    shared between all partners of a source site.
    """
    n = lattice.n_sites
    vm = v.v
    onsite = 0.5 * params.omega * _SIGMA_X - params.delta * _NUMBER_OP

    # furthest snake partner of each source site, -1 when none
    last_partner = np.full(n, -1, dtype=int)
    for j in range(n - 1):
        nz = np.nonzero(vm[j, j + 1 :])[0]
        if len(nz):
            last_partner[j] = int(nz[-1] + j + 1)

    def states_at_bond(m: int) -> dict:
        # bond between sites m and m+1; "S" = ready, "F" = done
        states = {"S": 0, "F": 1}
        for j in range(m + 1):
            if last_partner[j] > m:
                states[("c", j)] = len(states)
        return states

    tensors: list[np.ndarray] = []
    bond_profile = [1]
    prev: dict = {"S": 0}
    for site in range(n):
        cur = states_at_bond(site) if site < n - 1 else {"F": 0}
        w = np.zeros((len(prev), 2, 2, len(cur)), dtype=complex)
        if "S" in prev:
            a = prev["S"]
            if "S" in cur:
                w[a, :, :, cur["S"]] += _IDENTITY
            w[a, :, :, cur["F"]] += onsite
            if ("c", site) in cur:
                w[a, :, :, cur[("c", site)]] += _NUMBER_OP
        if "F" in prev and "F" in cur:
            w[prev["F"], :, :, cur["F"]] += _IDENTITY
        for key, a in prev.items():
            if not isinstance(key, tuple):
                continue
            j = key[1]
            if vm[j, site] != 0.0:
                w[a, :, :, cur["F"]] += vm[j, site] * _NUMBER_OP
            if key in cur:
                w[a, :, :, cur[key]] += _IDENTITY
        tensors.append(w)
        bond_profile.append(len(cur))
        prev = cur
    return MpoHamiltonian(tensors=tensors, bond_profile=bond_profile)


def mpo_dense_matrix(mpo: MpoHamiltonian) -> np.ndarray:
    """Contract the MPO to a full 2^N x 2^N matrix (test-scale N only)."""
    acc = mpo.tensors[0][0]  # (d, d, h)
    for w in mpo.tensors[1:]:
        acc = np.einsum("abh,hcdk->acbdk", acc, w)
        d_out = acc.shape[0] * acc.shape[1]
        d_in = acc.shape[2] * acc.shape[3]
        acc = acc.reshape(d_out, d_in, acc.shape[4])
    return acc[:, :, 0]


def dense_hamiltonian_matrix(
    lattice: LatticeSpec, params: QuenchParams, v: InteractionMatrix
) -> np.ndarray:
    """Kronecker-product H for cross-checking the MPO (test-scale N only).

    Uses the same bit convention as the oracle: site k is bit k of the basis
    index, but the matrix here is ordered so that site 0 is the slowest index
    to match the MPO contraction order.
    """
    n = lattice.n_sites
    dim = 1 << n
    h = np.zeros((dim, dim), dtype=complex)
    eye_cache = {k: np.eye(1 << k) for k in range(n + 1)}

    def embed(op: np.ndarray, site: int) -> np.ndarray:
        return np.kron(np.kron(eye_cache[site], op), eye_cache[n - site - 1])

    for i in range(n):
        h += 0.5 * params.omega * embed(_SIGMA_X, i)
        h -= params.delta * embed(_NUMBER_OP, i)
    for i in range(n):
        for j in range(i + 1, n):
            if v.v[i, j] != 0.0:
                h += v.v[i, j] * (embed(_NUMBER_OP, i) @ embed(_NUMBER_OP, j))
    return h
