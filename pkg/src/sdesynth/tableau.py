"""LTL to state-based Buchi automaton via an expansion tableau.

Formulas are first put in negation normal form over literals, and/or, X,
U and R.  Each tableau node is the set of obligations that must hold from
the current position on.  Expanding a node yields *covers*: literals that
must hold now, obligations for the next position, and the set of Until
formulas whose fulfilment was postponed.  A transition is good for an Until
when it did not postpone it; generalized acceptance is then degeneralized
with a round-robin level counter.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from itertools import product as iproduct

from .ltl import (
    Always,
    And,
    Atom,
    Eventually,
    Formula,
    Implies,
    Next,
    Not,
    Or,
    TrueF,
    Until,
)

# NNF terms are plain tuples so they hash cheaply:
#   ("tt",) ("ff",) ("lit", name, positive) ("and", a, b) ("or", a, b)
#   ("X", a) ("U", a, b) ("R", a, b)
TT = ("tt",)
FF = ("ff",)


def nnf(f: Formula, negate: bool = False) -> tuple:
    if isinstance(f, TrueF):
        return FF if negate else TT
    if isinstance(f, Atom):
        return ("lit", f.name, not negate)
    if isinstance(f, Not):
        return nnf(f.arg, not negate)
    if isinstance(f, And):
        return (("or" if negate else "and"), nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Or):
        return (("and" if negate else "or"), nnf(f.left, negate), nnf(f.right, negate))
    if isinstance(f, Implies):
        if negate:
            return ("and", nnf(f.left), nnf(f.right, True))
        return ("or", nnf(f.left, True), nnf(f.right))
    if isinstance(f, Next):
        return ("X", nnf(f.arg, negate))
    if isinstance(f, Until):
        if negate:
            return ("R", nnf(f.left, True), nnf(f.right, True))
        return ("U", nnf(f.left), nnf(f.right))
    if isinstance(f, Eventually):
        # F a = true U a ; !F a = false R !a
        return ("R", FF, nnf(f.arg, True)) if negate else ("U", TT, nnf(f.arg))
    if isinstance(f, Always):
        return ("U", TT, nnf(f.arg, True)) if negate else ("R", FF, nnf(f.arg))
    raise TypeError(f"not a formula: {f!r}")


def _untils(term: tuple, acc: set) -> None:
    tag = term[0]
    if tag == "U":
        acc.add(term)
    if tag in ("and", "or", "U", "R"):
        _untils(term[1], acc)
        _untils(term[2], acc)
    elif tag == "X":
        _untils(term[1], acc)


@dataclass(frozen=True)
class Cover:
    pos: frozenset
    neg: frozenset
    nxt: frozenset
    postponed: frozenset


def expand(node: frozenset) -> list[Cover]:
    """All covers of a set of obligations (contradictory branches dropped)."""
    out: dict[Cover, None] = {}

    def go(todo: list, pos: frozenset, neg: frozenset, nxt: frozenset, post: frozenset):
        if not todo:
            out.setdefault(Cover(pos, neg, nxt, post))
            return
        f, rest = todo[0], todo[1:]
        tag = f[0]
        if tag == "tt":
            go(rest, pos, neg, nxt, post)
        elif tag == "ff":
            return
        elif tag == "lit":
            if f[2]:
                if f[1] not in neg:
                    go(rest, pos | {f[1]}, neg, nxt, post)
            elif f[1] not in pos:
                go(rest, pos, neg | {f[1]}, nxt, post)
        elif tag == "and":
            go([f[1], f[2]] + rest, pos, neg, nxt, post)
        elif tag == "or":
            go([f[1]] + rest, pos, neg, nxt, post)
            go([f[2]] + rest, pos, neg, nxt, post)
        elif tag == "X":
            go(rest, pos, neg, nxt if f[1] == TT else nxt | {f[1]}, post)
        elif tag == "U":
            go([f[2]] + rest, pos, neg, nxt, post)
            go([f[1]] + rest, pos, neg, nxt | {f}, post | {f})
        elif tag == "R":
            go([f[1], f[2]] + rest, pos, neg, nxt, post)
            go([f[2]] + rest, pos, neg, nxt | {f}, post)
        else:
            raise ValueError(f"bad term {f!r}")

    go(sorted(node, key=repr), frozenset(), frozenset(), frozenset(), frozenset())
    return list(out)


def letters_over(ap: tuple[str, ...]) -> list[frozenset[str]]:
    """All subsets of ``ap`` in canonical order (by sorted member tuple)."""
    subsets = [frozenset(a for a, bit in zip(ap, bits) if bit) for bits in iproduct((0, 1), repeat=len(ap))]
    return sorted(set(subsets), key=lambda s: (tuple(sorted(s))))


def build_buchi(term: tuple, ap: tuple[str, ...]):
    """Explore the degeneralized tableau for an NNF term.

    Returns ``(states, initial, accepting, delta)`` where states are opaque
    hashable keys and ``delta[(state, letter)]`` is a set of successors.
    """
    uset: set = set()
    _untils(term, uset)
    untils = sorted(uset, key=repr)
    n_u = len(untils)
    letters = letters_over(ap)
    cover_cache: dict[frozenset, list[Cover]] = {}

    init = (frozenset([term]), 0, False)
    states = [init]
    seen = {init}
    delta: dict = {}
    queue = deque([init])
    while queue:
        st = queue.popleft()
        node, level, _ = st
        covers = cover_cache.get(node)
        if covers is None:
            covers = cover_cache[node] = expand(node)
        for cov in covers:
            if n_u == 0:
                new_level, acc = 0, True
            else:
                new_level = level
                while new_level < n_u and untils[new_level] not in cov.postponed:
                    new_level += 1
                acc = new_level == n_u
                if acc:
                    new_level = 0
            succ = (cov.nxt, new_level, acc)
            if succ not in seen:
                seen.add(succ)
                states.append(succ)
                queue.append(succ)
            for letter in letters:
                if cov.pos <= letter and not (cov.neg & letter):
                    delta.setdefault((st, letter), set()).add(succ)
    accepting = {s for s in states if s[2]}
    return states, init, accepting, delta, letters
