"""Two-stage model-free learning on the product.

The learner sees the product's structure (states, directed patterns, which
state is unsafe) but no probabilities: it only observes sampled outcomes
``(event, controllable, next_state)`` through :class:`ProductEnv`.

Stage 1 estimates the winning region.  Values start at 0 on safe pairs and
``r_n`` on the sink.  The agent walks inside the current estimate ``W^k``
choosing uniformly among zero-valued patterns; whenever it steps out of
``W^k`` the offending pair gets a Q-learning update (all patterns of the
state when the event was uncontrollable), which makes it negative for good.
An episode is a budget of ``T_epi`` steps; after each exit the walk
restarts from a state of ``W^k`` drawn with probability proportional to
1/visits (unvisited states count as one visit).

Stage 2 learns values outside the estimated winning region with
epsilon-greedy Q-learning from the initial state.
"""

from __future__ import annotations

import random
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate
from typing import Callable, Sequence

import numpy as np

from .params import Params
from .product import ProductSdes
from .sdes import DirectedPattern
from .synth import QTable

__all__ = [
    "ProductEnv",
    "Stage1Result",
    "Stage2Result",
    "stage1_learn",
    "stage2_learn",
    "initial_state_weights",
    "session_seeds",
]


def session_seeds(seed: int) -> tuple[int, int]:
    """Independent seeds for the environment and the agent."""
    env, agent = np.random.SeedSequence(seed).generate_state(2)
    return int(env), int(agent)


class ProductEnv:
    """Sampling-only view of a product.

    ``step`` plays one directed pattern from the current state and reports
    what happened; nothing about the underlying probabilities is exposed.
    """

    def __init__(self, prod: ProductSdes, seed: int = 0):
        self._prod = prod
        self._rng = random.Random(seed)
        self.n_states = prod.n
        self.initial = prod.initial
        self.sink = prod.sink
        self.unsafe: tuple[bool, ...] = tuple(bool(x) for x in prod.unsafe)
        self.pair_offset: tuple[int, ...] = tuple(int(x) for x in prod.pair_offset)
        self.n_pairs = prod.n_pairs
        self._tables = []
        for info in prod.pairs:
            cum, outcomes = [], []
            acc = 0.0
            for e, pe, ctrl, succ, pts in info.events:
                for j, pt in zip(succ, pts):
                    acc += pe * pt
                    cum.append(acc)
                    outcomes.append((e, ctrl, j))
            if not outcomes:  # sink self-loop
                cum, outcomes = [1.0], [(None, False, prod.sink)]
            cum[-1] = float("inf")
            self._tables.append((cum, outcomes))
        self.state = self.initial

    def patterns(self, i: int) -> tuple[DirectedPattern, ...]:
        return self._prod.patterns[i]

    def pairs_of(self, i: int) -> range:
        return range(self.pair_offset[i], self.pair_offset[i + 1])

    def pattern_tagged(self, pair: int) -> bool:
        """Whether the pair's pattern contains a controllable event."""
        return self._prod.pattern_of(pair).tag is not None

    def name(self, i: int) -> str:
        return self._prod.name(i)

    def reset(self, state: int | None = None) -> int:
        self.state = self.initial if state is None else state
        return self.state

    def sample_pair(self, pair: int) -> tuple[str | None, bool, int]:
        """Outcome of playing ``pair`` (a state's pattern) once."""
        cum, outcomes = self._tables[pair]
        return outcomes[bisect_right(cum, self._rng.random())]

    def step(self, pattern: int) -> tuple[str | None, bool, int]:
        """Play the ``pattern``-th directed pattern of the current state."""
        pair = self.pair_offset[self.state] + pattern
        if pair >= self.pair_offset[self.state + 1]:
            raise IndexError(f"state {self.state} has no pattern {pattern}")
        out = self.sample_pair(pair)
        self.state = out[2]
        return out


def initial_state_weights(visits: Sequence[int]) -> np.ndarray:
    """Start-state distribution proportional to 1/visits (0 visits count as 1)."""
    w = 1.0 / np.maximum(np.asarray(visits, dtype=float), 1.0)
    return w / w.sum()


@dataclass
class Stage1Result:
    q: QTable
    winning: frozenset[int]
    winning_pairs: np.ndarray
    episodes: int
    converged: bool
    curve: list[tuple] = field(default_factory=list)  # episode, avg_reward, steps_in_Wk, |Wk|, |Wkp|
    ind1: list[tuple] = field(default_factory=list)  # episode, ind1
    kills: list[tuple] = field(default_factory=list)  # episode, state, pair
    revivals: int = 0


def stage1_learn(
    env: ProductEnv,
    prod: ProductSdes,
    params: Params,
    seed: int = 0,
    truth: tuple[frozenset[int], int] | None = None,
    progress: Callable[[int], None] | None = None,
) -> Stage1Result:
    """Estimate the winning region by exploration inside ``W^k``.

    ``truth`` is an optional ``(W, n_ctrl)`` pair used only for logging the
    Ind1 curve: the true winning region and the number of controllable
    events the optimal supervisor allows on it.
    """
    rng = random.Random(seed)
    rnd = rng.random
    n = env.n_states
    offs = env.pair_offset
    unsafe = env.unsafe
    r_unsafe = params.unsafe_reward
    R = [r_unsafe if u else 0.0 for u in unsafe]
    G = [params.gamma_acc if u else params.gamma for u in unsafe]
    alpha = params.alpha
    Q = [0.0] * env.n_pairs
    for i in range(n):
        if unsafe[i]:
            for p in env.pairs_of(i):
                Q[p] = params.r_n
    zero = [list(env.pairs_of(i)) if not unsafe[i] else [] for i in range(n)]
    in_wk = [not u for u in unsafe]
    wk_size = sum(in_wk)
    wkp_size = sum(len(z) for z in zero)
    visits = [0] * n
    sample = env.sample_pair
    tagged = [env.pattern_tagged(p) for p in range(env.n_pairs)]
    if truth is not None:
        w_true, num = truth
        w_mask = [i in w_true for i in range(n)]
        den = sum(1 for i in w_true for p in zero[i] if tagged[p])
    else:
        w_mask = [False] * n
        den = num = 0

    res = Stage1Result(q=None, winning=frozenset(), winning_pairs=None, episodes=0, converged=False)
    kills = res.kills
    T = params.T_epi
    stable = 0
    converged = False
    episode = 0
    for episode in range(1, params.episodes_stage1 + 1):
        before = wkp_size
        left = T
        total_reward = 0.0
        phases = 0
        while left > 0 and wk_size > 0:
            cand = [i for i in range(n) if in_wk[i]]
            weights = [1.0 / (visits[i] or 1) for i in cand]
            cum = list(accumulate(weights))
            s = cand[min(bisect_right(cum, rnd() * cum[-1]), len(cand) - 1)]
            phases += 1
            while left > 0:
                visits[s] += 1
                zs = zero[s]
                p = zs[int(rnd() * len(zs))]
                _, ctrl, s2 = sample(p)
                left -= 1
                total_reward += R[s2]
                if in_wk[s2]:
                    s = s2
                    continue
                a2, b2 = offs[s2], offs[s2 + 1]
                target = R[s2] + G[s2] * max(Q[a2:b2])
                update = (p,) if ctrl else range(offs[s], offs[s + 1])
                for pp in update:
                    old = Q[pp]
                    new = (1.0 - alpha) * old + alpha * target
                    Q[pp] = new
                    if old == 0.0 and new != 0.0:
                        zs.remove(pp)
                        wkp_size -= 1
                        kills.append((episode, s, pp))
                        if w_mask[s] and tagged[pp]:
                            den -= 1
                    elif old != 0.0 and new == 0.0:
                        res.revivals += 1
                if not zs:
                    in_wk[s] = False
                    wk_size -= 1
                break
        steps_in = T / phases if phases else float(T)
        res.curve.append((episode, total_reward / T, steps_in, wk_size, wkp_size))
        if truth is not None:
            res.ind1.append((episode, num / den if den else 1.0))
        if progress is not None:
            progress(episode)
        stable = stable + 1 if wkp_size == before else 0
        if params.stability_window and stable >= params.stability_window:
            converged = True
            break
    q = QTable(prod, np.array(Q))
    res.q = q
    res.winning_pairs = q.values == 0.0
    res.winning = frozenset(i for i in range(n) if in_wk[i])
    res.episodes = episode
    res.converged = converged
    return res


@dataclass
class Stage2Result:
    q: QTable
    episodes: int
    steps: int
    skipped: bool
    curve: list[tuple] = field(default_factory=list)  # episode, return, Ind2


def stage2_learn(
    env: ProductEnv,
    prod: ProductSdes,
    q_init: QTable,
    winning: frozenset[int],
    params: Params,
    seed: int = 0,
    ind2: Callable[[np.ndarray], float] | None = None,
    log_every: int = 100,
    max_total_steps: int | None = None,
) -> Stage2Result:
    """Epsilon-greedy Q-learning outside the estimated winning region.

    Episodes start at the initial state and stop on entering ``winning`` or
    the sink, or after ``params.max_steps_stage2`` steps.  The step size of
    a pair's n-th update is ``alpha_a / (alpha_b + n)``.  Values inside
    ``winning`` and at the sink are never changed.  ``ind2`` (optional)
    scores a value vector; it is logged every ``log_every`` episodes.
    """
    Q = [float(x) for x in q_init.values]
    res = Stage2Result(q=None, episodes=0, steps=0, skipped=False)
    start = env.initial
    if start in winning or env.unsafe[start]:
        res.skipped = True
        res.q = QTable(prod, np.array(Q))
        return res
    rng = random.Random(seed)
    rnd = rng.random
    n = env.n_states
    offs = env.pair_offset
    unsafe = env.unsafe
    stop = [unsafe[i] or i in winning for i in range(n)]
    R = [params.unsafe_reward if u else 0.0 for u in unsafe]
    G = [params.gamma_acc if u else params.gamma for u in unsafe]
    a_, b_ = params.alpha_a, params.alpha_b
    eps = params.epsilon
    gamma, r_n = params.gamma, params.r_n
    count = [0] * env.n_pairs
    sample = env.sample_pair
    cap = params.max_steps_stage2
    total = 0
    episode = 0
    for episode in range(1, params.episodes_stage2 + 1):
        s = start
        disc = 1.0
        ret = 0.0
        t = 0
        while t < cap and not stop[s]:
            a, b = offs[s], offs[s + 1]
            if b - a == 1:
                p = a
            elif rnd() < eps:
                p = a + int(rnd() * (b - a))
            else:
                vals = Q[a:b]
                m = max(vals)
                best = [a + k for k, v in enumerate(vals) if v == m]
                p = best[int(rnd() * len(best))] if len(best) > 1 else best[0]
            _, _, s2 = sample(p)
            c = count[p]
            count[p] = c + 1
            alpha = a_ / (b_ + c)
            if alpha > 1.0:
                alpha = 1.0
            target = R[s2] + G[s2] * max(Q[offs[s2]:offs[s2 + 1]])
            Q[p] = (1.0 - alpha) * Q[p] + alpha * target
            t += 1
            if unsafe[s2]:
                ret = disc * r_n
            disc *= gamma
            s = s2
        total += t
        if ind2 is not None and (episode % log_every == 0 or episode == params.episodes_stage2):
            res.curve.append((episode, ret, ind2(np.array(Q))))
        else:
            res.curve.append((episode, ret, float("nan")))
        if max_total_steps is not None and total >= max_total_steps:
            break
    res.q = QTable(prod, np.array(Q))
    res.episodes = episode
    res.steps = total
    return res
