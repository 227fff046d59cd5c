"""Independent oracles and evaluation metrics.

Nothing here reuses the discounted value iteration: the winning region is
recomputed as a plain greatest fixpoint, satisfaction probabilities by
exhaustive enumeration or simulation.
"""

from __future__ import annotations

import itertools
import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .product import ProductSdes, Supervisor, reachable_under
from .synth import QTable

__all__ = [
    "qualitative_winning",
    "enumerate_directed_controllers",
    "brute_force_max_sat",
    "ind1",
    "optimal_choices",
    "Ind2Scorer",
    "ind2",
    "MonteCarloResult",
    "monte_carlo_sat",
    "resolution_times",
]


def qualitative_winning(prod: ProductSdes) -> tuple[frozenset[int], np.ndarray]:
    """Greatest set of safe states from which some directed pattern keeps
    every successor inside the set.  Returns ``(W, winning_pair_mask)``."""
    Z = ~prod.unsafe.copy()
    while True:
        ok = np.array([bool(Z[info.succ].all()) for info in prod.pairs])
        ok &= Z[prod.pair_state]
        newZ = np.logical_or.reduceat(ok, prod.pair_offset[:-1]) & ~prod.unsafe
        if np.array_equal(newZ, Z):
            return frozenset(int(i) for i in np.flatnonzero(Z)), ok
        Z = newZ


def enumerate_directed_controllers(prod: ProductSdes, limit: int = 100_000) -> Iterator[Supervisor]:
    """Every assignment of one directed pattern per state (at most ``limit``)."""
    choices = [[xi.events for xi in prod.patterns[i]] for i in range(prod.n)]
    total = math.prod(len(c) for c in choices)
    if total > limit:
        raise ValueError(f"{total} directed controllers exceed the limit {limit}")
    for combo in itertools.product(*choices):
        yield Supervisor(prod, combo)


def brute_force_max_sat(prod: ProductSdes, limit: int = 100_000) -> float:
    """Best satisfaction probability from the initial state over all
    directed controllers, each solved exactly as a Markov chain."""
    best = 0.0
    for sv in enumerate_directed_controllers(prod, limit):
        best = max(best, _sat_dense(prod, sv))
    return best


def _sat_dense(prod: ProductSdes, sv: Supervisor) -> float:
    """Chance of never reaching the sink, by a dense linear solve (kept
    separate from the sparse solver used elsewhere)."""
    states = reachable_under(prod, sv)
    pos = {i: a for a, i in enumerate(states)}
    n = len(states)
    P = np.zeros((n, n))
    for a, i in enumerate(states):
        for j, p in sv.distribution(i).items():
            P[a, pos[j]] += p
    if prod.sink not in pos:
        return 1.0
    k = pos[prod.sink]
    # states that can reach the sink
    can = np.zeros(n, dtype=bool)
    can[k] = True
    changed = True
    while changed:
        new = can | ((P > 0) & can[None, :]).any(axis=1)
        changed = not np.array_equal(new, can)
        can = new
    free = [a for a in range(n) if can[a] and a != k]
    x = np.zeros(n)
    x[k] = 1.0
    if free:
        A = np.eye(len(free)) - P[np.ix_(free, free)]
        x[free] = np.linalg.solve(A, P[free, k])
    return 1.0 - float(x[pos[prod.initial]])


# ------------------------------------------------------------------ metrics


def _ctrl(prod: ProductSdes, i: int, pattern) -> frozenset[str]:
    return frozenset(pattern) - prod.uncontrollable_at(i)


def ind1(prod: ProductSdes, sv_star: Supervisor, sv_k: Supervisor, winning: frozenset[int]) -> float:
    """Controllable events allowed by the optimal supervisor on the winning
    region, relative to those allowed by the learned one (1 when both are 0)."""
    num = sum(len(_ctrl(prod, i, sv_star[i])) for i in winning)
    den = sum(len(_ctrl(prod, i, sv_k[i])) for i in winning)
    return num / den if den else 1.0


def optimal_choices(q_star: QTable, tie_tol: float = 1e-9) -> list[tuple[frozenset[str], ...]]:
    """Per state, the patterns an optimal supervisor may use: the union of
    zero-valued patterns in the winning region, otherwise every pattern
    within ``tie_tol`` of the best value."""
    prod = q_star.prod
    out = []
    for i in range(prod.n):
        vals = q_star.at(i)
        pats = prod.patterns[i]
        if i == prod.sink:
            out.append((frozenset(),))
        elif np.any(vals == 0.0):
            out.append((frozenset().union(*(x.events for x, v in zip(pats, vals) if v == 0.0)),))
        else:
            m = vals.max()
            out.append(tuple(x.events for x, v in zip(pats, vals) if v >= m - tie_tol))
    return out


class Ind2Scorer:
    """Scores learned values against every optimal supervisor.

    For each optimal supervisor (tie choices enumerated up to ``limit``
    distinct reachable behaviours) the states it reaches outside
    ``W_inf`` and the sink are collected; a learned supervisor scores the
    fraction of those states where it makes the same choice.  The result
    is the best score over optimal supervisors.
    """

    def __init__(self, q_star: QTable, w_inf: frozenset[int], tie_tol: float = 1e-9, limit: int = 4096):
        prod = q_star.prod
        self.prod = prod
        self.w_inf = frozenset(w_inf)
        choices = optimal_choices(q_star, tie_tol)
        self.families: list[tuple[tuple[int, ...], tuple[frozenset[str], ...]]] = []
        self._explore(choices, limit)
        self.states = sorted({i for fam, _ in self.families for i in fam})

    def _explore(self, choices, limit: int) -> None:
        prod = self.prod

        def succ(i, pattern):
            return [j for j, p in sorted(prod.distribution(i, pattern).items()) if p > 0]

        def walk(assign: dict, frontier: list) -> None:
            # breadth-first completion; every tie spawns an alternative branch
            while frontier:
                i = frontier.pop(0)
                if i in assign:
                    continue
                opts = choices[i]
                if i in self.w_inf or i == prod.sink:
                    assign[i] = opts[0]
                    continue
                for o in opts[1:]:
                    if len(self.families) < limit:
                        walk({**assign, i: o}, frontier + succ(i, o))
                assign[i] = opts[0]
                frontier.extend(succ(i, opts[0]))
            if len(self.families) >= limit:
                return
            mid = tuple(i for i in sorted(assign) if i not in self.w_inf and i != prod.sink)
            fam = (mid, tuple(assign[i] for i in mid))
            if fam not in self.families:
                self.families.append(fam)

        walk({}, [prod.initial])

    @property
    def size(self) -> int:
        """|Re^{0<p<1}| for the first optimal supervisor."""
        return len(self.families[0][0]) if self.families else 0

    def learned_choice(self, values: np.ndarray, i: int, tie_tol: float = 1e-12) -> frozenset[str]:
        a, b = self.prod.pair_offset[i], self.prod.pair_offset[i + 1]
        v = values[a:b]
        pats = self.prod.patterns[i]
        if np.any(v == 0.0):
            return frozenset().union(*(x.events for x, y in zip(pats, v) if y == 0.0))
        return pats[int(np.flatnonzero(v >= v.max() - tie_tol)[0])].events

    def score_choices(self, learned: dict[int, frozenset[str]]) -> float:
        best = 0.0
        for mid, opt in self.families:
            if not mid:
                return 1.0
            hit = 0
            for i, o in zip(mid, opt):
                k = learned[i]
                if k == o:
                    hit += 1
                else:
                    hit += len((k & o) - self.prod.uncontrollable_at(i))
            best = max(best, hit / len(mid))
        return best

    def __call__(self, values: np.ndarray) -> float:
        learned = {i: self.learned_choice(values, i) for i in self.states}
        return self.score_choices(learned)


def ind2(q_star: QTable, w_inf: frozenset[int], q_learned: QTable, limit: int = 4096) -> float:
    return Ind2Scorer(q_star, w_inf, limit=limit)(q_learned.values)


# -------------------------------------------------------------- simulation


@dataclass(frozen=True)
class MonteCarloResult:
    estimate: float
    half_width: float  # 95% normal-approximation half-width
    unresolved: float  # fraction of runs that hit the horizon


def monte_carlo_sat(
    prod: ProductSdes,
    sv: Supervisor,
    trials: int,
    horizon: int = 10_000,
    seed: int = 0,
    resolved_safe: frozenset[int] | None = None,
) -> MonteCarloResult:
    """Estimate the probability of never entering the sink.

    A run stops at the sink (failure), on entering ``resolved_safe``
    (success; pass the winning region for a supervisor that is winning
    there), or at the horizon (counted as success and reported as
    unresolved).
    """
    rng = random.Random(seed)
    tables: dict[int, tuple[list[float], list[int]]] = {}
    stop = resolved_safe or frozenset()
    fails = unresolved = 0
    for _ in range(trials):
        s = prod.initial
        for _t in range(horizon):
            if s == prod.sink or s in stop:
                break
            tab = tables.get(s)
            if tab is None:
                d = sv.distribution(s)
                succ = sorted(d)
                tab = tables[s] = (list(itertools.accumulate(d[j] for j in succ)), succ)
            cum, succ = tab
            u = rng.random() * cum[-1]
            k = min(bisect_right(cum, u), len(succ) - 1)
            s = succ[k]
        if s == prod.sink:
            fails += 1
        elif s not in stop:
            unresolved += 1
    est = 1.0 - fails / trials
    hw = 1.96 * math.sqrt(max(est * (1 - est), 0.0) / trials)
    return MonteCarloResult(est, hw, unresolved / trials)


def resolution_times(prod: ProductSdes, sv: Supervisor, resolved: Sequence[int]) -> dict[int, float]:
    """Expected number of steps to reach ``resolved`` (or the sink) from
    every product state; ``inf`` where that is not almost sure."""
    done = set(resolved) | {prod.sink}
    free = [i for i in range(prod.n) if i not in done]
    idx = {i: a for a, i in enumerate(free)}
    n = len(free)
    out = {i: 0.0 for i in done}
    # states that cannot reach ``done`` have infinite expected time,
    can = {i: False for i in free}
    changed = True
    while changed:
        changed = False
        for i in free:
            if not can[i] and any(p > 0 and (j in done or can[j]) for j, p in sv.distribution(i).items()):
                can[i] = changed = True
    A = np.eye(n)
    for i in free:
        for j, p in sv.distribution(i).items():
            if j in idx:
                A[idx[i], idx[j]] -= p
    # and so do states that reach such a state with positive probability
    doomed = {i for i in free if not can[i]}
    changed = True
    while changed:
        changed = False
        for i in free:
            if i not in doomed and any(p > 0 and j in doomed for j, p in sv.distribution(i).items()):
                doomed.add(i)
                changed = True
    live = [i for i in free if i not in doomed]
    for i in free:
        out[i] = math.inf
    if live:
        rows = [idx[i] for i in live]
        t = np.linalg.solve(A[np.ix_(rows, rows)], np.ones(len(rows)))
        for i, v in zip(live, t):
            out[i] = float(v)
    return out
