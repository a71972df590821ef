"""Exact Markov-chain view of a PBN, attractors, transient and steady-state analysis."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .pbn import (
    CapExceededError,
    Pbn,
    Realization,
    index_to_state,
    one_probabilities,
    realization_update,
    require_valid,
    state_bits,
)

DEFAULT_NODE_CAP = 20
DEFAULT_NNZ_CAP = 50_000_000


class NonConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Dtmc:
    """Transition matrix over 2**n states (CSR, row = current state)."""

    n: int
    matrix: sparse.csr_matrix
    names: tuple = ()

    @property
    def num_states(self) -> int:
        return 2 ** self.n

    def row(self, s: int) -> dict:
        lo, hi = self.matrix.indptr[s], self.matrix.indptr[s + 1]
        return {int(c): float(v) for c, v in zip(self.matrix.indices[lo:hi], self.matrix.data[lo:hi])}

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()


def _check_cap(pbn: Pbn, cap: int):
    if pbn.n > cap:
        raise CapExceededError(f"{pbn.n} nodes exceed exact-analysis cap {cap}")


def transition_matrix(pbn: Pbn, perturb: bool, nnz_cap: int = DEFAULT_NNZ_CAP) -> sparse.csr_matrix:
    """Expand the per-node marginals into sparse rows.

    Entries are multiplied in node order, as in
    :func:`pbnkit.pbn.next_state_distribution`, so rows agree bit for bit.
    """
    n = pbn.n
    size = 2 ** n
    q = one_probabilities(pbn, state_bits(n), perturb)
    rows = np.arange(size, dtype=np.int64)
    cols = np.zeros(size, dtype=np.int64)
    probs = np.ones(size)
    for j in range(n):
        q1 = q[rows, j]
        q0 = 1.0 - q1
        keep0 = q0 > 0.0
        keep1 = q1 > 0.0
        total = int(keep0.sum() + keep1.sum())
        if total > nnz_cap:
            raise CapExceededError(f"transition matrix needs more than {nnz_cap} entries")
        rows = np.concatenate([rows[keep0], rows[keep1]])
        cols = np.concatenate([cols[keep0] * 2, cols[keep1] * 2 + 1])
        probs = np.concatenate([probs[keep0] * q0[keep0], probs[keep1] * q1[keep1]])
    order = np.lexsort((cols, rows))
    return sparse.csr_matrix((probs[order], (rows[order], cols[order])), shape=(size, size))


def build_dtmc(pbn: Pbn, perturb: bool = True, cap: int = DEFAULT_NODE_CAP) -> Dtmc:
    require_valid(pbn)
    _check_cap(pbn, cap)
    matrix = transition_matrix(pbn, perturb)
    matrix.sort_indices()
    return Dtmc(pbn.n, matrix, tuple(pbn.names))


# ------------------------------------------------------------- attractors

@dataclass(frozen=True)
class Attractor:
    cycle: tuple  # of state tuples, starting at the smallest index
    basin_size: int

    @property
    def period(self) -> int:
        return len(self.cycle)


@dataclass(frozen=True)
class AttractorSet:
    attractors: tuple

    @property
    def cycles(self) -> list:
        return [a.cycle for a in self.attractors]

    def __len__(self):
        return len(self.attractors)


def successor_map(pbn: Pbn, realization: Realization) -> np.ndarray:
    n = pbn.n
    nxt_bits = realization_update(pbn, realization, state_bits(n))
    weights = 1 << np.arange(n - 1, -1, -1, dtype=np.int64)
    return nxt_bits.astype(np.int64) @ weights


def find_attractors(pbn: Pbn, realization: Realization, cap: int = DEFAULT_NODE_CAP) -> AttractorSet:
    """All cycles of one constituent network with their basin sizes.

    Every state is visited once: a walk runs until it meets a state that is
    already assigned, or closes a loop on itself (a new attractor).
    """
    require_valid(pbn)
    _check_cap(pbn, cap)
    n = pbn.n
    succ = successor_map(pbn, realization)
    size = 2 ** n
    owner = np.full(size, -1, dtype=np.int64)  # attractor id per state
    on_path = np.full(size, -1, dtype=np.int64)
    cycles = []
    for start in range(size):
        if owner[start] >= 0:
            continue
        path = []
        s = start
        while owner[s] < 0 and on_path[s] < 0:
            on_path[s] = len(path)
            path.append(s)
            s = int(succ[s])
        if owner[s] >= 0:
            aid = owner[s]
        else:
            aid = len(cycles)
            cycles.append(path[on_path[s]:])
        for v in path:
            owner[v] = aid
            on_path[v] = -1
    basins = np.bincount(owner, minlength=len(cycles))
    attractors = []
    for aid, cyc in enumerate(cycles):
        k = cyc.index(min(cyc))
        ordered = cyc[k:] + cyc[:k]
        attractors.append(Attractor(tuple(index_to_state(s, n) for s in ordered), int(basins[aid])))
    attractors.sort(key=lambda a: a.cycle[0])
    return AttractorSet(tuple(attractors))


# ---------------------------------------------------- transient / steady

def point_mass(n_states: int, index: int) -> np.ndarray:
    v = np.zeros(n_states)
    v[index] = 1.0
    return v


def _check_init(dtmc: Dtmc, init) -> np.ndarray:
    init = np.asarray(init, dtype=float)
    if init.shape != (dtmc.num_states,):
        raise ValueError(f"initial distribution must have {dtmc.num_states} entries")
    if abs(init.sum() - 1.0) > 1e-9 or (init < 0).any():
        raise ValueError("initial distribution must be nonnegative and sum to 1")
    return init


def transient_distributions(dtmc: Dtmc, init, t: int) -> np.ndarray:
    """Distributions at steps 0..t, shape (t + 1, num_states)."""
    pi = _check_init(dtmc, init)
    pt = dtmc.matrix.T.tocsr()
    out = np.empty((t + 1, dtmc.num_states))
    out[0] = pi
    for k in range(1, t + 1):
        pi = pt @ pi
        out[k] = pi
    return out


def transient_distribution(dtmc: Dtmc, init, t: int) -> np.ndarray:
    pi = _check_init(dtmc, init)
    pt = dtmc.matrix.T.tocsr()
    for _ in range(t):
        pi = pt @ pi
    return pi


def expected_cumulative_reward(dtmc: Dtmc, init, reward: np.ndarray, horizon: int) -> float:
    """Sum over steps 0..horizon-1 of the expected state reward."""
    pi = _check_init(dtmc, init)
    pt = dtmc.matrix.T.tocsr()
    total = 0.0
    for _ in range(horizon):
        total += float(pi @ reward)
        pi = pt @ pi
    return total


def steady_state(dtmc: Dtmc, init, tol: float = 1e-10, max_iter: int = 1_000_000,
                 damping: float = 0.0, method: str = "power") -> np.ndarray:
    """Iterate ``pi <- pi P`` until successive iterates are within ``tol`` in L1.

    With several closed classes the limit depends on ``init``.  ``damping``
    mixes that fraction of the uniform distribution into every step, which
    makes periodic chains converge (to the damped chain's limit).

    ``method="squaring"`` compares ``pi P^(2^k)`` with ``pi P^(2^(k+1))``
    instead, squaring a dense copy of ``P`` each round; ``max_iter`` then
    counts squarings.  It suits small chains that mix slowly, such as ones
    driven by rare perturbations.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= damping < 1.0:
        raise ValueError("damping must be in [0, 1)")
    if method not in ("power", "squaring"):
        raise ValueError(f"unknown method {method!r}")
    pi = _check_init(dtmc, init)
    uniform = 1.0 / dtmc.num_states
    if method == "squaring":
        q = dtmc.matrix.toarray()
        if damping:
            q = (1.0 - damping) * q + damping * uniform
        for _ in range(min(max_iter, 128)):
            nxt = pi @ q
            nxt /= nxt.sum()
            if np.abs(nxt - pi).sum() < tol:
                return nxt
            pi = nxt
            q = q @ q
            q /= q.sum(axis=1, keepdims=True)
        raise NonConvergenceError(f"no convergence to {tol} within {min(max_iter, 128)} squarings")
    pt = dtmc.matrix.T.tocsr()
    for _ in range(max_iter):
        nxt = pt @ pi
        if damping:
            nxt = (1.0 - damping) * nxt + damping * uniform
        if np.abs(nxt - pi).sum() < tol:
            return nxt
        pi = nxt
    raise NonConvergenceError(f"no convergence to {tol} within {max_iter} iterations")
