"""Co-Buchi automata, K-bounded counter determinization and acceptance checks.

A universal co-Buchi automaton (cBA) accepts a word when every run visits
the accepting set finitely often.  Its K-bounded variant requires every run
to visit accepting states at most K times in total.  The K-bounded language
is recognised by a deterministic safety automaton whose states are *counter
maps*: for each cBA state, the largest number of accepting visits over run
prefixes ending there (-1 when no run is there).
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .ltl import Formula, Lasso, atoms
from .tableau import build_buchi, letters_over, nnf

__all__ = [
    "CoBuchiAutomaton",
    "SafetyAutomaton",
    "AutomatonError",
    "ltl_to_ucba",
    "counter_initial",
    "counter_step",
    "determinize",
    "accepts_ucba",
    "accepts_kcba",
    "format_letter",
    "format_automaton",
    "format_safety_automaton",
    "parse_automaton",
]

Letter = frozenset
CounterMap = tuple  # tuple[int, ...] aligned with CoBuchiAutomaton.states


class AutomatonError(ValueError):
    pass


@dataclass(frozen=True)
class CoBuchiAutomaton:
    """Nondeterministic automaton read with universal co-Buchi acceptance.

    ``delta`` maps ``(state, letter)`` to a tuple of successors; missing keys
    mean no successor.
    """

    states: tuple[str, ...]
    alphabet: tuple[Letter, ...]
    initial: str
    accepting: frozenset[str]
    delta: Mapping[tuple[str, Letter], tuple[str, ...]]
    _index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.states)})
        if self.initial not in self._index:
            raise AutomatonError(f"unknown initial state {self.initial!r}")
        for x in self.accepting:
            if x not in self._index:
                raise AutomatonError(f"unknown accepting state {x!r}")
        letters = set(self.alphabet)
        for (x, a), succ in self.delta.items():
            if x not in self._index or a not in letters:
                raise AutomatonError(f"bad transition key {(x, sorted(a))!r}")
            for y in succ:
                if y not in self._index:
                    raise AutomatonError(f"unknown successor {y!r}")

    @property
    def propositions(self) -> tuple[str, ...]:
        return tuple(sorted(set().union(*self.alphabet)))

    def index(self, x: str) -> int:
        return self._index[x]

    def successors(self, x: str, letter: Letter) -> tuple[str, ...]:
        return self.delta.get((x, letter), ())

    def is_complete(self) -> bool:
        return all(self.successors(x, a) for x in self.states for a in self.alphabet)


def _reach_sets(states: Sequence, succ_of) -> dict:
    """Strict reachability (at least one step) for each state."""
    out = {}
    for s in states:
        seen: set = set()
        stack = list(succ_of(s))
        while stack:
            t = stack.pop()
            if t not in seen:
                seen.add(t)
                stack.extend(succ_of(t))
        out[s] = seen
    return out


def _tableau_key(st) -> tuple:
    node, level, acc = st
    return (tuple(sorted(repr(t) for t in node)), level, acc)


def ltl_to_ucba(formula: Formula, ap: Iterable[str] | None = None) -> CoBuchiAutomaton:
    """Translate a formula into a complete cBA accepting exactly its models.

    An NBA for the negated formula is read universally with the same
    accepting set.  States that cannot reach an accepting cycle are trimmed,
    bisimilar states are merged, and missing transitions are routed to one
    fresh non-accepting absorbing state.  States are named ``x0, x1, ...`` in
    breadth-first order from the initial state ``x0``.
    """
    props = tuple(sorted(set(ap) if ap is not None else atoms(formula)))
    missing = atoms(formula) - set(props)
    if missing:
        raise AutomatonError(f"formula atoms {sorted(missing)} not in alphabet")
    states, init, accepting, delta, letters = build_buchi(nnf(formula, negate=True), props)

    def succ_all(s):
        out = set()
        for a in letters:
            out |= delta.get((s, a), set())
        return out

    # trim: keep states that can reach an accepting state lying on a cycle
    reach = _reach_sets(states, succ_all)
    good = {a for a in accepting if a in reach[a]}
    keep = {s for s in states if s in good or reach[s] & good}
    keep.add(init)
    delta = {
        k: {t for t in v if t in keep} for k, v in delta.items() if k[0] in keep
    }

    # merge bisimilar states (same acceptance, same successor blocks per letter)
    kept = sorted(keep, key=_tableau_key)
    block = {s: int(s in accepting) for s in kept}
    while True:
        sig = {
            s: (block[s],) + tuple(frozenset(block[t] for t in delta.get((s, a), ())) for a in letters)
            for s in kept
        }
        ids: dict = {}
        new_block = {s: ids.setdefault(sig[s], len(ids)) for s in kept}
        if len(ids) == len(set(block.values())):
            block = new_block
            break
        block = new_block

    rep: dict[int, object] = {}
    for s in kept:
        rep.setdefault(block[s], s)

    # breadth-first naming over block representatives
    order = [rep[block[init]]]
    seen = {block[init]}
    queue = deque(order)
    while queue:
        s = queue.popleft()
        for a in letters:
            for t in sorted(delta.get((s, a), ()), key=_tableau_key):
                b = block[t]
                if b not in seen:
                    seen.add(b)
                    order.append(rep[b])
                    queue.append(rep[b])
    name = {block[s]: f"x{i}" for i, s in enumerate(order)}
    dead = f"x{len(order)}"
    names = [name[block[s]] for s in order] + [dead]
    out_delta: dict = {}
    need_dead = False
    for s in order:
        for a in letters:
            succ = sorted({name[block[t]] for t in delta.get((s, a), ())}, key=lambda n: int(n[1:]))
            if not succ:
                succ = [dead]
                need_dead = True
            out_delta[(name[block[s]], a)] = tuple(succ)
    if need_dead:
        for a in letters:
            out_delta[(dead, a)] = (dead,)
    else:
        names.pop()
    return CoBuchiAutomaton(
        states=tuple(names),
        alphabet=tuple(letters),
        initial="x0",
        accepting=frozenset(name[block[s]] for s in order if s in accepting),
        delta=out_delta,
    )


# ---------------------------------------------------------------- counters


def counter_initial(B: CoBuchiAutomaton) -> CounterMap:
    """-1 everywhere except the initial state (1 if accepting, else 0)."""
    return tuple(
        (1 if x in B.accepting else 0) if x == B.initial else -1 for x in B.states
    )


def counter_step(B: CoBuchiAutomaton, F: CounterMap, letter: Letter, K: int) -> CounterMap:
    """One counter update: for each target, the max over live predecessors of
    ``min(K+1, F(x) + [target accepting])``; -1 when there is none."""
    out = [-1] * len(B.states)
    acc = B.accepting
    for i, x in enumerate(B.states):
        c = F[i]
        if c < 0:
            continue
        for y in B.successors(x, letter):
            j = B.index(y)
            v = min(K + 1, c + (1 if y in acc else 0))
            if v > out[j]:
                out[j] = v
    return tuple(out)


@dataclass(frozen=True)
class SafetyAutomaton:
    """Deterministic automaton whose only rejecting behaviour is entering
    the absorbing ``sink``.

    ``counters[q]`` is the counter map of state ``q`` (``None`` for the
    sink); ``delta[q][j]`` is the successor of ``q`` on ``alphabet[j]``.
    """

    source: CoBuchiAutomaton
    K: int
    counters: tuple
    delta: tuple[tuple[int, ...], ...]
    initial: int
    sink: int
    _letter_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_letter_index", {a: j for j, a in enumerate(self.alphabet)})

    @property
    def alphabet(self) -> tuple[Letter, ...]:
        return self.source.alphabet

    @property
    def n_states(self) -> int:
        return len(self.counters)

    def name(self, q: int) -> str:
        return "sink" if q == self.sink else f"q{q}"

    def letter_index(self, letter: Letter) -> int:
        try:
            return self._letter_index[letter]
        except KeyError:
            raise AutomatonError(f"letter {format_letter(letter)} not in alphabet") from None

    def step(self, q: int, letter: Letter) -> int:
        return self.delta[q][self.letter_index(letter)]

    def describe(self, q: int) -> str:
        """Counter map as ``{(x0,0),(x1,1)}`` (entries equal to -1 omitted)."""
        if q == self.sink:
            return "sink"
        parts = [f"({x},{c})" for x, c in zip(self.source.states, self.counters[q]) if c >= 0]
        return "{" + ",".join(parts) + "}"

    def accepts(self, w: Lasso) -> bool:
        """True when the run on ``w`` never enters the sink."""
        q = self.initial
        if q == self.sink:
            return False
        for a in w.prefix:
            q = self.step(q, a)
            if q == self.sink:
                return False
        starts: set[int] = set()
        while q not in starts:
            starts.add(q)
            for a in w.cycle:
                q = self.step(q, a)
                if q == self.sink:
                    return False
        return True


def _live_states(B: CoBuchiAutomaton) -> list[bool]:
    """States from which an accepting state is reachable (reflexively)."""
    preds: dict[str, set[str]] = {x: set() for x in B.states}
    for (x, _), succ in B.delta.items():
        for y in succ:
            preds[y].add(x)
    live = set(B.accepting)
    stack = list(live)
    while stack:
        y = stack.pop()
        for x in preds[y]:
            if x not in live:
                live.add(x)
                stack.append(x)
    return [x in live for x in B.states]


def determinize(B: CoBuchiAutomaton, K: int, reduce: bool = True) -> SafetyAutomaton:
    """Counter-map subset construction for the K-bounded language of ``B``.

    Any map with a counter above K collapses into the absorbing sink.  With
    ``reduce`` (default) two language-preserving simplifications apply:
    counters of states that can no longer reach an accepting state are reset
    to -1, and maps from which every word leads to the sink are merged into
    it.  States are numbered in breadth-first order; the sink comes last.
    """
    if K < 0:
        raise AutomatonError(f"K must be non-negative, got {K}")
    if not B.is_complete():
        raise AutomatonError("cBA is not complete")
    live = _live_states(B)

    def norm(F: CounterMap) -> CounterMap:
        return tuple(c if ok else -1 for c, ok in zip(F, live)) if reduce else F

    SINK = None
    F0 = counter_initial(B)
    start = SINK if max(F0) > K else norm(F0)
    index: dict = {start: 0}
    maps: list = [start]
    rows: list[list] = []
    queue = deque([start])
    while queue:
        F = queue.popleft()
        row = []
        for a in B.alphabet:
            if F is SINK:
                G = SINK
            else:
                G = counter_step(B, F, a, K)
                G = SINK if max(G) > K else norm(G)
            if G not in index:
                index[G] = len(maps)
                maps.append(G)
                queue.append(G)
            row.append(index[G])
        rows.append(row)
    if SINK not in index:
        index[SINK] = len(maps)
        maps.append(SINK)
        rows.append([index[SINK]] * len(B.alphabet))
    sink = index[SINK]

    doomed = {sink}
    if reduce:
        changed = True
        while changed:
            changed = False
            for q, row in enumerate(rows):
                if q not in doomed and all(t in doomed for t in row):
                    doomed.add(q)
                    changed = True

    # renumber: breadth-first from the initial state, sink last
    init = sink if 0 in doomed else 0
    order: list[int] = []
    if init != sink:
        order.append(init)
        seen = {init}
        queue = deque([init])
        while queue:
            q = queue.popleft()
            for t in rows[q]:
                if t not in doomed and t not in seen:
                    seen.add(t)
                    order.append(t)
                    queue.append(t)
    new = {q: i for i, q in enumerate(order)}
    new_sink = len(order)
    for q in doomed:
        new[q] = new_sink
    counters = tuple(maps[q] for q in order) + (None,)
    delta = tuple(tuple(new[t] for t in rows[q]) for q in order) + (
        tuple([new_sink] * len(B.alphabet)),
    )
    return SafetyAutomaton(
        source=B, K=K, counters=counters, delta=delta, initial=new[init], sink=new_sink
    )


# ------------------------------------------------------ acceptance oracles


def _run_graph(B: CoBuchiAutomaton, w: Lasso):
    """Reachable part of the product of ``B`` with the lasso positions."""
    letters = w.letters()
    start = (0, B.initial)
    nodes = {start: 0}
    order = [start]
    edges: list[tuple[int, int]] = []
    stack = [start]
    while stack:
        node = stack.pop()
        i, x = node
        letter = letters[i]
        if letter not in B.alphabet:
            raise AutomatonError(f"letter {format_letter(letter)} not in alphabet")
        j = w.successor(i)
        for y in B.successors(x, letter):
            nxt = (j, y)
            if nxt not in nodes:
                nodes[nxt] = len(order)
                order.append(nxt)
                stack.append(nxt)
            edges.append((nodes[node], nodes[nxt]))
    n = len(order)
    rows = [e[0] for e in edges]
    cols = [e[1] for e in edges]
    adj = csr_matrix((np.ones(len(edges)), (rows, cols)), shape=(n, n))
    weight = [1 if x in B.accepting else 0 for _, x in order]
    return order, edges, adj, weight


def _accepting_cycle(order, edges, adj, weight):
    n = len(order)
    _, comp = connected_components(adj, directed=True, connection="strong")
    size = np.bincount(comp, minlength=n)
    self_loop = np.zeros(n, dtype=bool)
    for u, v in edges:
        if u == v:
            self_loop[u] = True
    for v in range(n):
        if weight[v] and (size[comp[v]] > 1 or self_loop[v]):
            return True, comp
    return False, comp


def accepts_ucba(B: CoBuchiAutomaton, w: Lasso) -> bool:
    """Universal co-Buchi acceptance: no run visits Acc infinitely often."""
    order, edges, adj, weight = _run_graph(B, w)
    bad, _ = _accepting_cycle(order, edges, adj, weight)
    return not bad


def accepts_kcba(B: CoBuchiAutomaton, K: int, w: Lasso) -> bool:
    """K-bounded acceptance: every run visits Acc at most K times in total.

    Decided on the lasso run graph: an accepting node on a reachable cycle
    means unbounded visits; otherwise the answer is the heaviest path in the
    acyclic condensation.
    """
    if K < 0:
        raise AutomatonError(f"K must be non-negative, got {K}")
    if not B.is_complete():
        raise AutomatonError("cBA is not complete")
    order, edges, adj, weight = _run_graph(B, w)
    bad, comp = _accepting_cycle(order, edges, adj, weight)
    if bad:
        return False
    n_comp = int(comp.max()) + 1
    cw = [0] * n_comp
    for v, c in enumerate(comp):
        cw[c] += weight[v]
    succ: list[set[int]] = [set() for _ in range(n_comp)]
    indeg = [0] * n_comp
    for u, v in edges:
        cu, cv = comp[u], comp[v]
        if cu != cv and cv not in succ[cu]:
            succ[cu].add(cv)
            indeg[cv] += 1
    best = [0] * n_comp
    start = comp[0]
    best[start] = cw[start]
    reached = [False] * n_comp
    reached[start] = True
    ready = [c for c in range(n_comp) if indeg[c] == 0]
    while ready:
        c = ready.pop()
        for d in succ[c]:
            if reached[c] and best[c] + cw[d] > best[d]:
                best[d] = best[c] + cw[d]
            reached[d] = reached[d] or reached[c]
            indeg[d] -= 1
            if indeg[d] == 0:
                ready.append(d)
    return max(b for b, r in zip(best, reached) if r) <= K


# ----------------------------------------------------------- text format


def format_letter(letter: Iterable[str]) -> str:
    return "[" + ",".join(sorted(letter)) + "]"


def _parse_letter(text: str) -> Letter:
    text = text.strip()
    if not (text.startswith("[") and text.endswith("]")):
        raise AutomatonError(f"bad letter {text!r}")
    inner = text[1:-1].strip()
    return frozenset(p.strip() for p in inner.split(",")) if inner else frozenset()


def _format(states, alphabet, initial, accepting, lines, comments=()) -> str:
    head = [f"# {c}" for c in comments]
    head += [
        "states: " + " ".join(states),
        "alphabet: " + " ".join(format_letter(a) for a in alphabet),
        "initial: " + initial,
        "accepting: " + " ".join(accepting),
    ]
    return "\n".join(head + sorted(lines)) + "\n"


def format_automaton(B: CoBuchiAutomaton) -> str:
    lines = [
        f"{x} ; {format_letter(a)} ; {','.join(succ)}"
        for (x, a), succ in B.delta.items()
        if succ
    ]
    acc = [x for x in B.states if x in B.accepting]
    return _format(B.states, B.alphabet, B.initial, acc, lines)


def format_safety_automaton(S: SafetyAutomaton) -> str:
    names = [S.name(q) for q in range(S.n_states)]
    lines = [
        f"{names[q]} ; {format_letter(a)} ; {names[S.delta[q][j]]}"
        for q in range(S.n_states)
        for j, a in enumerate(S.alphabet)
    ]
    comments = [f"K = {S.K}; counter maps over {' '.join(S.source.states)}"]
    comments += [f"{names[q]} = {S.describe(q)}" for q in range(S.n_states) if q != S.sink]
    return _format(names, S.alphabet, names[S.initial], [names[S.sink]], lines, comments)


def parse_automaton(text: str) -> CoBuchiAutomaton:
    """Read the line format written by :func:`format_automaton`."""
    header: dict[str, str] = {}
    delta: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if ";" in line:
            parts = [p.strip() for p in line.split(";")]
            if len(parts) != 3:
                raise AutomatonError(f"line {lineno}: expected 'from ; letter ; to'")
            key = (parts[0], _parse_letter(parts[1]))
            succ = tuple(t.strip() for t in parts[2].split(",") if t.strip())
            delta[key] = tuple(dict.fromkeys(delta.get(key, ()) + succ))
            continue
        name, sep, value = line.partition(":")
        if not sep or name.strip() not in ("states", "alphabet", "initial", "accepting"):
            raise AutomatonError(f"line {lineno}: unrecognised line {line!r}")
        header[name.strip()] = value.strip()
    for k in ("states", "alphabet", "initial"):
        if k not in header:
            raise AutomatonError(f"missing header {k!r}")

    letters = tuple(_parse_letter(m) for m in re.findall(r"\[[^\]]*\]", header["alphabet"]))
    return CoBuchiAutomaton(
        states=tuple(header["states"].split()),
        alphabet=letters,
        initial=header["initial"],
        accepting=frozenset(header.get("accepting", "").split()),
        delta=delta,
    )


def full_alphabet(props: Iterable[str]) -> tuple[Letter, ...]:
    return tuple(letters_over(tuple(sorted(set(props)))))
