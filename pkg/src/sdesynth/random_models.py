"""Seeded generators of small random instances for cross-checking."""

from __future__ import annotations

import itertools
import random

from .automata import CoBuchiAutomaton, full_alphabet
from .ltl import Always, And, Atom, Eventually, Formula, Lasso, Next, Not, Or, TrueF, Until
from .sdes import Sdes

__all__ = [
    "SUITE_FORMULAS",
    "random_sdes",
    "random_cba",
    "random_formula",
    "random_lasso",
    "random_problem",
]

SUITE_FORMULAS = ("G F a", "G !b", "G F a & G !b")


def _grid_split(rng: random.Random, k: int) -> list[float]:
    """``k`` positive probabilities on the 0.1 grid summing to 1."""
    cuts = sorted(rng.sample(range(1, 10), k - 1))
    parts = [b - a for a, b in zip([0] + cuts, cuts + [10])]
    return [p / 10 for p in parts]


def random_sdes(
    rng: random.Random,
    max_states: int = 6,
    max_events: int = 4,
    props=("a", "b"),
    label_odds=(0.6, 0.2),
) -> Sdes:
    """At most ``max_states`` states and ``max_events`` events, every state
    enabled for at least one event, probabilities on the 0.1 grid.
    Proposition ``props[k]`` holds in a state with chance ``label_odds[k]``."""
    n = rng.randint(2, max_states)
    m = rng.randint(2, max_events)
    states = [f"s{i}" for i in range(n)]
    events = [(f"e{k}", rng.random() < 0.65) for k in range(m)]
    trans = []
    for s in states:
        enabled = [e for e, _ in events if rng.random() < 0.7] or [rng.choice(events)[0]]
        for e in enabled:
            k = 1 if rng.random() < 0.5 else rng.randint(2, min(3, n))
            targets = rng.sample(states, k)
            for t, p in zip(targets, _grid_split(rng, k)):
                trans.append((s, e, t, p))
    labels = {s: [p for p, odd in zip(props, label_odds) if rng.random() < odd] for s in states}
    return Sdes(states, events, states[0], labels, trans)


def random_cba(rng: random.Random, max_states: int = 4, props=("p",)) -> CoBuchiAutomaton:
    """A complete automaton with 1..``max_states`` states."""
    n = rng.randint(1, max_states)
    states = tuple(f"x{i}" for i in range(n))
    alphabet = full_alphabet(props)
    delta = {}
    for x, a in itertools.product(states, alphabet):
        k = rng.randint(1, min(2, n))
        delta[(x, a)] = tuple(sorted(rng.sample(states, k)))
    acc = frozenset(x for x in states if rng.random() < 0.4)
    return CoBuchiAutomaton(states, alphabet, states[0], acc, delta)


def random_formula(rng: random.Random, depth: int = 3, props=("a", "b")) -> Formula:
    if depth == 0 or rng.random() < 0.25:
        return TrueF() if rng.random() < 0.1 else Atom(rng.choice(props))
    kind = rng.choice(["not", "and", "or", "X", "U", "F", "G"])
    sub = lambda: random_formula(rng, depth - 1, props)  # noqa: E731
    if kind == "not":
        return Not(sub())
    if kind == "X":
        return Next(sub())
    if kind == "F":
        return Eventually(sub())
    if kind == "G":
        return Always(sub())
    cls = {"and": And, "or": Or, "U": Until}[kind]
    return cls(sub(), sub())


def random_lasso(rng: random.Random, props=("a", "b"), max_prefix: int = 3, max_cycle: int = 4) -> Lasso:
    def letter():
        return frozenset(p for p in props if rng.random() < 0.5)

    prefix = [letter() for _ in range(rng.randint(0, max_prefix))]
    cycle = [letter() for _ in range(rng.randint(1, max_cycle))]
    return Lasso.of(prefix, cycle)


def random_problem(rng: random.Random) -> tuple[Sdes, str, int]:
    """A random model, one of the suite formulas and a bound K <= 2."""
    model = random_sdes(rng)
    return model, rng.choice(SUITE_FORMULAS), rng.randint(0, 2)
