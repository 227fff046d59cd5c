"""Model-based synthesis: discounted value iteration and exact probabilities.

The reward is collected on entering a state: ``(1 - gamma_acc) * r_n`` for
the unsafe sink and 0 elsewhere.  The discount applied after entering a
state is ``gamma_acc`` for the sink and ``gamma`` otherwise, so the sink's
value is exactly ``r_n`` and winning pairs stay at exactly 0.0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, identity
from scipy.sparse.linalg import spsolve

from .params import Params
from .product import ProductSdes, Supervisor, induced_chain

__all__ = [
    "NonConvergenceError",
    "QTable",
    "rewards",
    "discounts",
    "value_iterate",
    "winning_region",
    "winning_pairs",
    "build_supervisor",
    "max_reach_prob",
    "almost_sure_reach",
    "reach_prob_under",
    "sat_prob_under",
]


class NonConvergenceError(RuntimeError):
    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"value iteration did not converge after {sweeps} sweeps (residual {residual:.3e})")
        self.residual = residual
        self.sweeps = sweeps


@dataclass
class QTable:
    """One value per (product state, directed pattern) pair."""

    prod: ProductSdes
    values: np.ndarray
    sweeps: int = 0
    residual: float = 0.0

    def copy(self) -> "QTable":
        return QTable(self.prod, self.values.copy(), self.sweeps, self.residual)

    def state_values(self) -> np.ndarray:
        return np.maximum.reduceat(self.values, self.prod.pair_offset[:-1])

    def at(self, i: int) -> np.ndarray:
        a, b = self.prod.pair_offset[i], self.prod.pair_offset[i + 1]
        return self.values[a:b]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["state", "pattern", "value"])
        prod = self.prod
        for i in range(prod.n):
            for p in prod.pair_range(i):
                w.writerow([prod.name(i), prod.pattern_name(prod.pattern_of(p)), format(float(self.values[p]), ".17g")])
        return buf.getvalue()


def rewards(prod: ProductSdes, params: Params) -> np.ndarray:
    return np.where(prod.unsafe, params.unsafe_reward, 0.0)


def discounts(prod: ProductSdes, params: Params) -> np.ndarray:
    return np.where(prod.unsafe, params.gamma_acc, params.gamma)


def value_iterate(prod: ProductSdes, params: Params | None = None) -> QTable:
    """Jacobi value iteration from all-zero values.

    Stops once the largest change is at most ``params.tol`` and the set of
    exactly-zero pairs did not change in the last sweep (so the zero set is
    a fixpoint and the winning region is exact).
    """
    params = params or Params()
    R = rewards(prod, params)
    G = discounts(prod, params)
    M = prod.matrix
    starts = prod.pair_offset[:-1]
    q = np.zeros(prod.n_pairs)
    residual = np.inf
    for sweep in range(1, params.max_sweeps + 1):
        v = np.maximum.reduceat(q, starts)
        new = M @ (R + G * v)
        residual = float(np.max(np.abs(new - q))) if len(q) else 0.0
        same_zeros = np.array_equal(new == 0.0, q == 0.0)
        q = new
        if residual <= params.tol and same_zeros:
            return QTable(prod, q, sweep, residual)
    raise NonConvergenceError(residual, params.max_sweeps)


def winning_pairs(q: QTable) -> np.ndarray:
    """Boolean mask of pairs whose value is exactly zero."""
    return q.values == 0.0


def winning_region(q: QTable) -> frozenset[int]:
    v = q.state_values()
    return frozenset(int(i) for i in np.flatnonzero(v == 0.0))


def build_supervisor(q: QTable, tie_tol: float = 1e-12) -> Supervisor:
    """Union of zero-valued patterns inside the winning region; elsewhere the
    best pattern, ties going to the canonically first one."""
    prod = q.prod
    pats = []
    for i in range(prod.n):
        vals = q.at(i)
        options = prod.patterns[i]
        if i == prod.sink:
            pats.append(frozenset())
        elif np.any(vals == 0.0):
            pats.append(frozenset().union(*(xi.events for xi, v in zip(options, vals) if v == 0.0)))
        else:
            best = int(np.flatnonzero(vals >= vals.max() - tie_tol)[0])
            pats.append(options[best].events)
    return Supervisor(prod, pats)


# ------------------------------------------------------------ probabilities


def _backward_reach(prod: ProductSdes, target: np.ndarray) -> np.ndarray:
    """States from which ``target`` is reachable under some pattern choice."""
    M = prod.matrix.tocsc()
    reach = target.copy()
    frontier = list(np.flatnonzero(target))
    pair_state = prod.pair_state
    while frontier:
        j = frontier.pop()
        for p in M.indices[M.indptr[j]:M.indptr[j + 1]]:
            i = pair_state[p]
            if not reach[i]:
                reach[i] = True
                frontier.append(i)
    return reach


def almost_sure_reach(prod: ProductSdes, target: np.ndarray) -> np.ndarray:
    """States where some directed controller reaches ``target`` with
    probability one (nested fixpoint over directed patterns)."""
    U = np.ones(prod.n, dtype=bool)
    while True:
        R = target.copy()
        while True:
            ok_pair = np.zeros(prod.n_pairs, dtype=bool)
            for p, info in enumerate(prod.pairs):
                ok_pair[p] = U[info.succ].all() and R[info.succ].any()
            new_R = R | (np.logical_or.reduceat(ok_pair, prod.pair_offset[:-1]) & U)
            if np.array_equal(new_R, R):
                break
            R = new_R
        if np.array_equal(R, U):
            return U
        U = R


def max_reach_prob(prod: ProductSdes, target, tol: float = 1e-12, max_sweeps: int = 10_000_000) -> np.ndarray:
    """Maximal probability over directed controllers of reaching ``target``.

    States that cannot reach the target get 0 and states that reach it
    almost surely get 1; value iteration from below fills in the rest.
    """
    tgt = np.zeros(prod.n, dtype=bool)
    tgt[list(target)] = True
    zero = ~_backward_reach(prod, tgt)
    one = almost_sure_reach(prod, tgt)
    x = np.where(one, 1.0, 0.0)
    fixed = zero | one
    starts = prod.pair_offset[:-1]
    for _ in range(max_sweeps):
        new = np.maximum.reduceat(prod.matrix @ x, starts)
        new[fixed] = x[fixed]
        if np.max(np.abs(new - x)) <= tol:
            return new
        x = new
    raise NonConvergenceError(float(np.max(np.abs(new - x))), max_sweeps)


def reach_prob_under(prod: ProductSdes, sv: Supervisor, target) -> dict[int, float]:
    """Probability of ever reaching ``target`` from each state the supervisor
    reaches, by one sparse linear solve."""
    chain = induced_chain(prod, sv)
    n = len(chain.states)
    tgt = np.array([i in target for i in chain.states])
    P = chain.matrix
    # states that can reach the target inside the chain
    can = tgt.copy()
    Pc = P.tocsc()
    frontier = list(np.flatnonzero(tgt))
    while frontier:
        b = frontier.pop()
        for a in Pc.indices[Pc.indptr[b]:Pc.indptr[b + 1]]:
            if not can[a]:
                can[a] = True
                frontier.append(a)
    x = np.where(tgt, 1.0, 0.0)
    free = np.flatnonzero(can & ~tgt)
    if len(free):
        A = identity(len(free), format="csr") - P[free][:, free]
        rhs = np.asarray(P[free][:, np.flatnonzero(tgt)].sum(axis=1)).ravel()
        sol = spsolve(csr_matrix(A).tocsc(), rhs)
        x[free] = np.atleast_1d(sol)
    return {i: float(x[a]) for a, i in enumerate(chain.states)}


def sat_prob_under(prod: ProductSdes, sv: Supervisor, start: int | None = None) -> float:
    """Probability of never entering the unsafe sink under ``sv``."""
    start = prod.initial if start is None else start
    if start != prod.initial:
        raise ValueError("only the initial state is supported")
    probs = reach_prob_under(prod, sv, {prod.sink})
    return 1.0 - probs[prod.initial]
