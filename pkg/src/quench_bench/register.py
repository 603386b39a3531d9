"""Tweezer loading, Hungarian rearrangement and defect-free statistics.

Models one preparation cycle of a neutral-atom register: stochastic loading
of a trap layout at 50% fill, an optimal-assignment move plan filling the
register from surplus atoms, and the four elementary failure channels
(transfer, pick-up for dumping, accidental loading of idle traps, loss of
unmoved register atoms).  The analytic defect-free probability is

    P = p_transf^N_transf * p_pickup^N_dump
        * (1 - p_acci)^(N_traps - N_transf - N_dump)
        * (1 - p_loss)^(N_register - N_transf)

and the Monte Carlo applies exactly those four channels per trial, so the
two agree by construction up to sampling noise and count fluctuations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidCounts, NotEnoughAtoms

#: Loads that cannot fill the register are redrawn up to this many times per
#: trial (the hardware reloads until rearrangement is feasible).  Trials still
#: infeasible afterwards count as defective.
MAX_RELOADS = 25


@dataclass(frozen=True)
class TrapLayout:
    """Trap positions (um) with a boolean mask marking the register subset."""

    trap_positions: np.ndarray  # (N_traps, 2)
    register_mask: np.ndarray  # (N_traps,) bool

    @property
    def n_traps(self) -> int:
        return len(self.trap_positions)

    @property
    def n_register(self) -> int:
        return int(self.register_mask.sum())


@dataclass(frozen=True)
class DefectProbabilities:
    """The four elementary failure-channel probabilities."""

    p_transf: float = 0.989
    p_pickup: float = 0.998
    p_acci: float = 0.0009
    p_loss: float = 0.009

    def __post_init__(self):
        for name in ("p_transf", "p_pickup", "p_acci", "p_loss"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} = {value} outside [0, 1]")


@dataclass
class RearrangementPlan:
    moves: list[tuple[int, int]]  # (source trap, target register trap)
    dumps: list[int]
    n_transf: int
    n_dump: int
    n_idle: int
    total_distance: float = 0.0


@dataclass
class DefectFreeEstimate:
    p_hat: float
    std_err: float
    trials: int
    counts_mean: dict = field(default_factory=dict)


def make_layout(
    n_register: int, n_traps: int | None = None, pitch: float = 5.0
) -> TrapLayout:
    """Register grid plus reservoir rings at the same pitch.

    The register is a near-square grid of ``n_register`` sites; reservoir
    traps are added on concentric rectangular rings around it (closest rings
    first, deterministic order) until ``n_traps`` total traps exist.
    ``n_traps`` defaults to 2 * n_register.
    """
    if n_traps is None:
        n_traps = 2 * n_register
    if n_traps < 2 * n_register:
        raise ValueError(
            f"layout must be at least twice the register: {n_traps} < 2*{n_register}"
        )
    cols = math.ceil(math.sqrt(n_register))
    register = [(col, row) for row in range(math.ceil(n_register / cols)) for col in range(cols)]
    register = register[:n_register]
    occupied = set(register)
    reservoir: list[tuple[int, int]] = []
    ring = 1
    while len(register) + len(reservoir) < n_traps:
        lo_c, hi_c = -ring, cols - 1 + ring
        lo_r, hi_r = -ring, math.ceil(n_register / cols) - 1 + ring
        candidates = sorted(
            (c, r)
            for c in range(lo_c, hi_c + 1)
            for r in range(lo_r, hi_r + 1)
            if (c in (lo_c, hi_c) or r in (lo_r, hi_r)) and (c, r) not in occupied
        )
        for pos in candidates:
            reservoir.append(pos)
            occupied.add(pos)
            if len(register) + len(reservoir) == n_traps:
                break
        ring += 1
    coords = np.array(register + reservoir, dtype=float) * pitch
    mask = np.zeros(len(coords), dtype=bool)
    mask[: n_register] = True
    return TrapLayout(trap_positions=coords, register_mask=mask)


def load_stochastic(
    layout: TrapLayout, fill_p: float = 0.5, rng_seed=0
) -> np.ndarray:
    """Independent Bernoulli(fill_p) occupancy per trap, seed-deterministic."""
    if not 0.0 <= fill_p <= 1.0:
        raise ValueError(f"fill_p = {fill_p} outside [0, 1]")
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    return rng.random(layout.n_traps) < fill_p


def trap_distances(layout: TrapLayout) -> np.ndarray:
    """Full trap-to-trap Euclidean distance matrix (um)."""
    return np.linalg.norm(
        layout.trap_positions[:, None, :] - layout.trap_positions[None, :, :], axis=2
    )


def plan_rearrangement(
    layout: TrapLayout, occupancy: np.ndarray, distances: np.ndarray | None = None
) -> RearrangementPlan:
    """Fill empty register sites from surplus atoms at minimal total distance.

    Atoms already sitting on register sites stay put.  The assignment of
    surplus atoms to empty register sites minimizes the summed Euclidean move
    distance (Hungarian / linear sum assignment); leftover surplus atoms are
    dumped.  Pass a precomputed ``trap_distances`` matrix when planning many
    occupancies of one layout.

    Raises:
        NotEnoughAtoms: fewer surplus atoms than empty register sites.
    """
    occupancy = np.asarray(occupancy, dtype=bool)
    empty_register = np.flatnonzero(layout.register_mask & ~occupancy)
    outside_atoms = np.flatnonzero(~layout.register_mask & occupancy)
    if len(outside_atoms) < len(empty_register):
        raise NotEnoughAtoms(
            f"{len(outside_atoms)} surplus atoms cannot fill "
            f"{len(empty_register)} empty register sites"
        )
    moves: list[tuple[int, int]] = []
    distance = 0.0
    assigned: set[int] = set()
    if len(empty_register):
        if distances is None:
            cost = np.linalg.norm(
                layout.trap_positions[empty_register, None, :]
                - layout.trap_positions[None, outside_atoms, :],
                axis=2,
            )
        else:
            cost = distances[np.ix_(empty_register, outside_atoms)]
        rows, cols = linear_sum_assignment(cost)
        distance = float(cost[rows, cols].sum())
        for r, c in zip(rows, cols):
            moves.append((int(outside_atoms[c]), int(empty_register[r])))
            assigned.add(int(outside_atoms[c]))
    dumps = [int(t) for t in outside_atoms if int(t) not in assigned]
    n_transf = len(moves)
    n_dump = len(dumps)
    return RearrangementPlan(
        moves=moves,
        dumps=dumps,
        n_transf=n_transf,
        n_dump=n_dump,
        n_idle=layout.n_traps - n_transf - n_dump,
        total_distance=distance,
    )


def defect_free_analytic(counts: dict, probs: DefectProbabilities) -> float:
    """Analytic defect-free probability for the given event counts.

    ``counts`` needs keys N_transf, N_dump, N_traps, N_register; non-integer
    (mean) counts are accepted.
    """
    n_transf = float(counts["N_transf"])
    n_dump = float(counts["N_dump"])
    n_traps = float(counts["N_traps"])
    n_register = float(counts["N_register"])
    n_idle = n_traps - n_transf - n_dump
    n_unmoved = n_register - n_transf
    if min(n_transf, n_dump, n_idle, n_unmoved) < 0:
        raise InvalidCounts(
            f"inconsistent counts: transf={n_transf}, dump={n_dump}, "
            f"idle={n_idle}, unmoved={n_unmoved}"
        )
    return (
        probs.p_transf**n_transf
        * probs.p_pickup**n_dump
        * (1.0 - probs.p_acci) ** n_idle
        * (1.0 - probs.p_loss) ** n_unmoved
    )


def expected_counts(n_register: int) -> dict:
    """Large-N expected-counts model used for QPU budget projections.

    At 50% loading of a 2N-trap layout, half the register sites start empty
    in expectation; the dump count is taken equal to the transfer count.
    """
    n_half = math.ceil(n_register / 2)
    return {
        "N_transf": n_half,
        "N_dump": n_half,
        "N_traps": 2 * n_register,
        "N_register": n_register,
    }


def simulate_defect_free(
    layout: TrapLayout,
    probs: DefectProbabilities,
    trials: int,
    rng_seed: int = 0,
    fill_p: float = 0.5,
    max_reloads: int = MAX_RELOADS,
) -> DefectFreeEstimate:
    """Monte Carlo defect-free frequency over full load/plan/failure cycles.

    Each trial draws an occupancy (redrawing up to ``max_reloads`` times when
    the register cannot be filled, as the hardware would reload), plans the
    rearrangement, then applies the four failure channels as independent
    Bernoulli events.  A trial is defect-free iff every transfer and dump
    succeeded, no idle trap loaded accidentally, and no unmoved register atom
    was lost.  Trials that stay infeasible after all redraws count as
    defective.

    Per-trial RNG streams are derived from (rng_seed, trial index), so results
    are bit-reproducible regardless of execution order.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_traps = layout.n_traps
    n_register = layout.n_register
    distances = trap_distances(layout)
    successes = 0
    infeasible = 0
    sum_transf = sum_dump = sum_idle = 0.0
    n_counted = 0
    for trial in range(trials):
        rng = np.random.default_rng([rng_seed, trial])
        plan = None
        for _ in range(max_reloads + 1):
            occupancy = rng.random(n_traps) < fill_p
            try:
                plan = plan_rearrangement(layout, occupancy, distances)
                break
            except NotEnoughAtoms:
                continue
        if plan is None:
            infeasible += 1
            continue  # defective shot
        n_counted += 1
        sum_transf += plan.n_transf
        sum_dump += plan.n_dump
        sum_idle += plan.n_idle
        n_unmoved = n_register - plan.n_transf
        draws = rng.random(plan.n_transf + plan.n_dump + plan.n_idle + n_unmoved)
        k = 0
        ok = bool(np.all(draws[k : k + plan.n_transf] < probs.p_transf))
        k += plan.n_transf
        ok = ok and bool(np.all(draws[k : k + plan.n_dump] < probs.p_pickup))
        k += plan.n_dump
        ok = ok and bool(np.all(draws[k : k + plan.n_idle] >= probs.p_acci))
        k += plan.n_idle
        ok = ok and bool(np.all(draws[k : k + n_unmoved] >= probs.p_loss))
        if ok:
            successes += 1
    p_hat = successes / trials
    std_err = math.sqrt(p_hat * (1.0 - p_hat) / trials)
    counts_mean = {
        "N_transf": sum_transf / n_counted if n_counted else float("nan"),
        "N_dump": sum_dump / n_counted if n_counted else float("nan"),
        "N_idle": sum_idle / n_counted if n_counted else float("nan"),
        "N_traps": n_traps,
        "N_register": n_register,
        "infeasible_trials": infeasible,
    }
    return DefectFreeEstimate(
        p_hat=p_hat, std_err=std_err, trials=trials, counts_mean=counts_mean
    )


def write_layout_csv(layout: TrapLayout, path) -> None:
    with open(path, "w") as fh:
        fh.write("x_um,y_um,in_register\n")
        for (x, y), in_reg in zip(layout.trap_positions, layout.register_mask):
            fh.write(f"{float(x)!r},{float(y)!r},{int(in_reg)}\n")


def read_layout_csv(path) -> TrapLayout:
    rows = np.loadtxt(path, delimiter=",", skiprows=1)
    return TrapLayout(
        trap_positions=rows[:, :2].astype(float),
        register_mask=rows[:, 2].astype(bool),
    )
