"""LTL formulas: AST, parser, printer and evaluation on lasso words.

Grammar (tightest binding first)::

    unary   !  X  F  G
    binary  U        (right associative)
            &        (left associative)
            |        (left associative)
            ->       (right associative)

Atoms are identifiers such as ``r1`` or ``busy``.  Runs of the capital
letters ``X``, ``F`` and ``G`` are split into separate operators, so ``GF a``
reads as ``G F a``.  ``true`` and ``false`` are constants (``false`` parses
to ``!true``).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Sequence, Union

__all__ = [
    "TrueF",
    "Atom",
    "Not",
    "And",
    "Or",
    "Implies",
    "Next",
    "Until",
    "Eventually",
    "Always",
    "Formula",
    "LtlSyntaxError",
    "Lasso",
    "parse_ltl",
    "format_ltl",
    "atoms",
    "eval_ltl_on_lasso",
]


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Next:
    arg: "Formula"


@dataclass(frozen=True)
class Until:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Eventually:
    arg: "Formula"


@dataclass(frozen=True)
class Always:
    arg: "Formula"


Formula = Union[TrueF, Atom, Not, And, Or, Implies, Next, Until, Eventually, Always]

_UNARY = {"!": Not, "X": Next, "F": Eventually, "G": Always}
_BINARY_SYMBOL = {And: "&", Or: "|", Implies: "->", Until: "U"}


class LtlSyntaxError(ValueError):
    """Raised on malformed formula text; ``position`` is a 0-based offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


_TOKEN_RE = re.compile(r"\s*(?:(->)|([!&|()])|([A-Za-z_][A-Za-z0-9_]*))")


def _tokenize(text: str) -> list[tuple[str, int]]:
    tokens: list[tuple[str, int]] = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bad = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise LtlSyntaxError(f"unexpected character {text[bad]!r}", bad)
        start = m.start(m.lastindex)
        word = m.group(m.lastindex)
        if m.lastindex == 3 and re.fullmatch(r"[XFG]+", word):
            tokens.extend((ch, start + i) for i, ch in enumerate(word))
        else:
            tokens.append((word, start))
        pos = m.end()
    tokens.append(("<end>", len(text)))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self) -> str:
        return self.tokens[self.i][0]

    def take(self) -> tuple[str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message: str):
        tok, pos = self.tokens[self.i]
        raise LtlSyntaxError(f"{message}, found {tok!r}", pos)

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek() != "<end>":
            self.fail("expected end of formula")
        return f

    def implies(self) -> Formula:
        left = self.disj()
        if self.peek() == "->":
            self.take()
            return Implies(left, self.implies())
        return left

    def disj(self) -> Formula:
        f = self.conj()
        while self.peek() == "|":
            self.take()
            f = Or(f, self.conj())
        return f

    def conj(self) -> Formula:
        f = self.until()
        while self.peek() == "&":
            self.take()
            f = And(f, self.until())
        return f

    def until(self) -> Formula:
        left = self.unary()
        if self.peek() == "U":
            self.take()
            return Until(left, self.until())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok in _UNARY:
            self.take()
            return _UNARY[tok](self.unary())
        if tok == "(":
            self.take()
            f = self.implies()
            if self.peek() != ")":
                self.fail("expected ')'")
            self.take()
            return f
        if tok == "true":
            self.take()
            return TrueF()
        if tok == "false":
            self.take()
            return Not(TrueF())
        if tok in ("U", "->", "&", "|", ")", "<end>"):
            self.fail("expected a formula")
        self.take()
        return Atom(tok)


def parse_ltl(text: str) -> Formula:
    """Parse formula text into an AST.

    >>> parse_ltl("G F r")
    Always(arg=Eventually(arg=Atom(name='r')))
    """
    return _Parser(text).parse()


def format_ltl(f: Formula) -> str:
    """Render a formula; binary subformulas are parenthesized so that
    ``parse_ltl(format_ltl(f)) == f``."""

    def sub(g: Formula) -> str:
        s = format_ltl(g)
        return f"({s})" if type(g) in _BINARY_SYMBOL else s

    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Not):
        return "!" + sub(f.arg)
    for cls, sym in ((Next, "X"), (Eventually, "F"), (Always, "G")):
        if isinstance(f, cls):
            return f"{sym} {sub(f.arg)}"
    sym = _BINARY_SYMBOL[type(f)]
    return f"{sub(f.left)} {sym} {sub(f.right)}"


def atoms(f: Formula) -> frozenset[str]:
    """Atomic propositions occurring in ``f``."""
    if isinstance(f, Atom):
        return frozenset([f.name])
    if isinstance(f, TrueF):
        return frozenset()
    if isinstance(f, (Not, Next, Eventually, Always)):
        return atoms(f.arg)
    return atoms(f.left) | atoms(f.right)


@dataclass(frozen=True)
class Lasso:
    """The infinite word ``prefix . cycle^omega``; letters are sets of atoms."""

    prefix: tuple[frozenset[str], ...]
    cycle: tuple[frozenset[str], ...]

    def __post_init__(self):
        if not self.cycle:
            raise ValueError("lasso cycle must be non-empty")

    @classmethod
    def of(cls, prefix: Iterable[Iterable[str]], cycle: Iterable[Iterable[str]]) -> "Lasso":
        return cls(tuple(frozenset(x) for x in prefix), tuple(frozenset(x) for x in cycle))

    def __len__(self) -> int:
        return len(self.prefix) + len(self.cycle)

    def letter(self, i: int) -> frozenset[str]:
        n = len(self.prefix)
        return self.prefix[i] if i < n else self.cycle[i - n]

    def successor(self, i: int) -> int:
        return i + 1 if i + 1 < len(self) else len(self.prefix)

    def letters(self) -> Sequence[frozenset[str]]:
        return self.prefix + self.cycle


def eval_ltl_on_lasso(f: Formula, w: Lasso) -> bool:
    """Decide ``w |= f`` exactly by labelling the finitely many suffixes."""
    return _truth(f, w, {})[0]


def _truth(f: Formula, w: Lasso, memo: dict) -> list[bool]:
    if f in memo:
        return memo[f]
    n = len(w)
    nxt = [w.successor(i) for i in range(n)]
    if isinstance(f, TrueF):
        val = [True] * n
    elif isinstance(f, Atom):
        val = [f.name in w.letter(i) for i in range(n)]
    elif isinstance(f, Not):
        val = [not v for v in _truth(f.arg, w, memo)]
    elif isinstance(f, And):
        a, b = _truth(f.left, w, memo), _truth(f.right, w, memo)
        val = [x and y for x, y in zip(a, b)]
    elif isinstance(f, Or):
        a, b = _truth(f.left, w, memo), _truth(f.right, w, memo)
        val = [x or y for x, y in zip(a, b)]
    elif isinstance(f, Implies):
        a, b = _truth(f.left, w, memo), _truth(f.right, w, memo)
        val = [(not x) or y for x, y in zip(a, b)]
    elif isinstance(f, Next):
        a = _truth(f.arg, w, memo)
        val = [a[nxt[i]] for i in range(n)]
    elif isinstance(f, (Until, Eventually)):
        if isinstance(f, Until):
            hold, goal = _truth(f.left, w, memo), _truth(f.right, w, memo)
        else:
            hold, goal = [True] * n, _truth(f.arg, w, memo)
        # least fixpoint of  v = goal | (hold & X v)
        val = list(goal)
        changed = True
        while changed:
            changed = False
            for i in range(n - 1, -1, -1):
                if not val[i] and hold[i] and val[nxt[i]]:
                    val[i] = True
                    changed = True
    elif isinstance(f, Always):
        # greatest fixpoint of  v = a & X v
        val = list(_truth(f.arg, w, memo))
        changed = True
        while changed:
            changed = False
            for i in range(n - 1, -1, -1):
                if val[i] and not val[nxt[i]]:
                    val[i] = False
                    changed = True
    else:
        raise TypeError(f"not a formula: {f!r}")
    memo[f] = val
    return val
