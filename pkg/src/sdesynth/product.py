"""Product of an SDES with a counter safety automaton.

Product states pair a model state with an automaton state.  The automaton
reads the label of the state being entered, so ``(s, q)`` means "the
system is in ``s`` and ``q`` has already consumed ``L(s)``".  Every product
state whose automaton component is the sink is merged into one absorbing
unsafe state named ``sink``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix

from .automata import SafetyAutomaton
from .sdes import DirectedPattern, ModelError, Sdes

__all__ = [
    "ProductSdes",
    "Supervisor",
    "MarkovChain",
    "SINK_PATTERN",
    "build_product",
    "reachable_under",
    "induced_chain",
    "format_supervisor",
    "parse_supervisor",
    "format_pattern",
]

SINK_PATTERN = DirectedPattern(None, frozenset())
SINK = "sink"


def format_pattern(events: Iterable[str], order: Sequence[str] | None = None) -> str:
    ev = list(events)
    if order is not None:
        rank = {e: i for i, e in enumerate(order)}
        ev.sort(key=rank.__getitem__)
    else:
        ev.sort()
    return "{" + ",".join(ev) + "}"


@dataclass(frozen=True)
class PairInfo:
    """Exact one-step behaviour of a (state, directed pattern) pair."""

    succ: np.ndarray  # successor product indices
    prob: np.ndarray  # matching probabilities (sum to 1)
    events: tuple  # ((event, P_E, controllable, succ_idx, P_T), ...)


class ProductSdes:
    """Reachable product, indexed ``0..n-1`` in breadth-first order with the
    sink last.

    ``patterns[i]`` lists the directed patterns of state ``i``; pair ``p``
    ranges over ``pair_offset[i] <= p < pair_offset[i+1]``.
    """

    def __init__(self, model: Sdes, automaton: SafetyAutomaton):
        self.model = model
        self.automaton = automaton
        aut = automaton
        for s in model.states:
            aut.letter_index(model.label(s))  # raises on labels outside the alphabet

        def enter(q: int, s: str):
            q2 = aut.step(q, model.label(s))
            return None if q2 == aut.sink else (s, q2)

        keys: list[tuple[str, int]] = []
        index: dict = {}
        first = enter(aut.initial, model.initial) if aut.initial != aut.sink else None
        raw_edges: dict[tuple[int, str], list[tuple[object, float]]] = {}
        if first is not None:
            index[first] = 0
            keys.append(first)
            queue = deque([first])
            while queue:
                key = queue.popleft()
                s, q = key
                i = index[key]
                for e in model.enabled(s):
                    row = []
                    for t, p in model.transitions[(s, e)].items():
                        if p <= 0:
                            continue
                        nk = enter(q, t)
                        if nk is not None and nk not in index:
                            index[nk] = len(keys)
                            keys.append(nk)
                            queue.append(nk)
                        row.append((nk, p))
                    raw_edges[(i, e)] = row
        self.sink = len(keys)
        self.keys: tuple = tuple(keys) + ((SINK, aut.sink),)
        self.index: dict = dict(index)
        self.n = len(self.keys)
        self.initial = index[first] if first is not None else self.sink
        self.unsafe = np.zeros(self.n, dtype=bool)
        self.unsafe[self.sink] = True

        # successor lists per (state, event)
        self._edges: dict[tuple[int, str], tuple[tuple[int, float], ...]] = {
            k: tuple((self.sink if nk is None else index[nk], p) for nk, p in row)
            for k, row in raw_edges.items()
        }

        self.patterns: list[tuple[DirectedPattern, ...]] = [
            model.directed_patterns(s) for s, _ in keys
        ] + [(SINK_PATTERN,)]
        counts = [len(p) for p in self.patterns]
        self.pair_offset = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.n_pairs = int(self.pair_offset[-1])
        self.pair_state = np.repeat(np.arange(self.n), counts)
        self.pairs: list[PairInfo] = []
        rows, cols, vals = [], [], []
        for i in range(self.n):
            for xi in self.patterns[i]:
                info = self._pair_info(i, xi)
                p = len(self.pairs)
                self.pairs.append(info)
                rows.extend([p] * len(info.succ))
                cols.extend(info.succ.tolist())
                vals.extend(info.prob.tolist())
        self.matrix = csr_matrix((vals, (rows, cols)), shape=(self.n_pairs, self.n))

    # ---------------------------------------------------------------- views

    def name(self, i: int) -> str:
        s, q = self.keys[i]
        return SINK if i == self.sink else f"({s},{self.automaton.name(q)})"

    def describe(self, i: int) -> str:
        s, q = self.keys[i]
        return SINK if i == self.sink else f"({s},{self.automaton.describe(q)})"

    def lookup(self, name: str) -> int:
        if not hasattr(self, "_names"):
            self._names = {self.name(i): i for i in range(self.n)}
        try:
            return self._names[name]
        except KeyError:
            raise KeyError(f"unknown product state {name!r}") from None

    def sdes_state(self, i: int) -> str | None:
        return None if i == self.sink else self.keys[i][0]

    def uncontrollable_at(self, i: int) -> frozenset[str]:
        s = self.sdes_state(i)
        return frozenset() if s is None else self.model.uncontrollable_at(s)

    def pair_range(self, i: int) -> range:
        return range(int(self.pair_offset[i]), int(self.pair_offset[i + 1]))

    def pattern_of(self, pair: int) -> DirectedPattern:
        i = int(self.pair_state[pair])
        return self.patterns[i][pair - int(self.pair_offset[i])]

    def pattern_name(self, xi: DirectedPattern | Iterable[str]) -> str:
        events = xi.events if isinstance(xi, DirectedPattern) else xi
        return format_pattern(events, self.model.events)

    # ------------------------------------------------------------- dynamics

    def _pair_info(self, i: int, xi: DirectedPattern) -> PairInfo:
        if i == self.sink:
            return PairInfo(np.array([self.sink]), np.array([1.0]), ())
        dist: dict[int, float] = {}
        events = []
        s = self.keys[i][0]
        for e, pe in self.model.event_distribution(s, xi.events).items():
            row = self._edges[(i, e)]
            events.append((e, pe, self.model.is_controllable(e), tuple(j for j, _ in row), tuple(p for _, p in row)))
            for j, pt in row:
                dist[j] = dist.get(j, 0.0) + pe * pt
        succ = np.array(sorted(dist), dtype=np.int64)
        return PairInfo(succ, np.array([dist[j] for j in succ]), tuple(events))

    def distribution(self, i: int, pattern: Iterable[str]) -> dict[int, float]:
        """``P(j | i, pattern)`` for an arbitrary control pattern."""
        if i == self.sink:
            return {self.sink: 1.0}
        s = self.keys[i][0]
        xi = self.model.check_pattern(s, pattern)
        out: dict[int, float] = {}
        for e, pe in self.model.event_distribution(s, xi).items():
            for j, pt in self._edges[(i, e)]:
                out[j] = out.get(j, 0.0) + pe * pt
        return out


def build_product(model: Sdes, automaton: SafetyAutomaton) -> ProductSdes:
    return ProductSdes(model, automaton)


class Supervisor:
    """A control pattern per product state (the sink's pattern is empty)."""

    def __init__(self, prod: ProductSdes, patterns: Sequence[Iterable[str]]):
        if len(patterns) != prod.n:
            raise ValueError("one pattern per product state required")
        self.prod = prod
        pats = []
        for i, xi in enumerate(patterns):
            xi = frozenset(xi)
            if i != prod.sink:
                prod.model.check_pattern(prod.sdes_state(i), xi)
            pats.append(xi)
        self.patterns: tuple[frozenset[str], ...] = tuple(pats)

    def __getitem__(self, i: int) -> frozenset[str]:
        return self.patterns[i]

    def __eq__(self, other) -> bool:
        return isinstance(other, Supervisor) and self.patterns == other.patterns

    def __hash__(self):
        return hash(self.patterns)

    def distribution(self, i: int) -> dict[int, float]:
        return self.prod.distribution(i, self.patterns[i])


def reachable_under(prod: ProductSdes, sv: Supervisor, start: int | None = None) -> list[int]:
    """States reachable from ``start`` (default: initial) with positive
    probability, in breadth-first order."""
    start = prod.initial if start is None else start
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        i = queue.popleft()
        for j, p in sorted(sv.distribution(i).items()):
            if p > 0 and j not in seen:
                seen.add(j)
                order.append(j)
                queue.append(j)
    return order


@dataclass(frozen=True)
class MarkovChain:
    """Chain induced by a supervisor on the states it reaches.

    ``matrix[a, b]`` is the probability of moving from ``states[a]`` to
    ``states[b]``.
    """

    states: tuple[int, ...]
    matrix: csr_matrix

    def position(self, i: int) -> int:
        return self.states.index(i)


def induced_chain(prod: ProductSdes, sv: Supervisor) -> MarkovChain:
    states = reachable_under(prod, sv)
    pos = {i: a for a, i in enumerate(states)}
    rows, cols, vals = [], [], []
    for a, i in enumerate(states):
        for j, p in sv.distribution(i).items():
            if p > 0:
                rows.append(a)
                cols.append(pos[j])
                vals.append(p)
    n = len(states)
    return MarkovChain(tuple(states), csr_matrix((vals, (rows, cols)), shape=(n, n)))


def format_supervisor(sv: Supervisor) -> str:
    """One ``state ; ev1,ev2`` line per product state, in state order."""
    prod = sv.prod
    lines = []
    for i in range(prod.n):
        events = prod.model.sort_events(sv[i])
        lines.append(f"{prod.name(i)} ; {','.join(events)}")
    return "\n".join(lines) + "\n"


def parse_supervisor(prod: ProductSdes, text: str) -> Supervisor:
    pats: dict[int, frozenset[str]] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, rest = line.rpartition(";")
        if not sep:
            raise ModelError(f"supervisor line {lineno}: expected 'state ; events'")
        try:
            i = prod.lookup(name.strip())
        except KeyError as exc:
            raise ModelError(f"supervisor line {lineno}: {exc.args[0]}") from None
        pats[i] = frozenset(e.strip() for e in rest.split(",") if e.strip())
    missing = [prod.name(i) for i in range(prod.n) if i not in pats and i != prod.sink]
    if missing:
        raise ModelError(f"supervisor has no pattern for {missing[:5]}")
    pats.setdefault(prod.sink, frozenset())
    return Supervisor(prod, [pats[i] for i in range(prod.n)])


def supervisor_from_mapping(prod: ProductSdes, mapping: Mapping[int, Iterable[str]]) -> Supervisor:
    return Supervisor(prod, [mapping.get(i, ()) for i in range(prod.n)])
