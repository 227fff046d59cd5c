"""Stochastic discrete event systems (SDES).

A model has labelled states, controllable and uncontrollable events, a
transition kernel ``P_T(s' | s, e)`` and an event-occurrence distribution
``P_E(e | s, pattern)`` that depends on which events the supervisor allows.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Mapping, NamedTuple, Sequence

__all__ = [
    "Sdes",
    "EventProb",
    "DirectedPattern",
    "Violation",
    "ModelError",
    "validate",
    "load_model",
    "model_from_dict",
    "model_to_dict",
    "dump_model",
    "TOL",
]

TOL = 1e-9


class ModelError(ValueError):
    """Invalid model; ``violations`` lists every problem found."""

    def __init__(self, violations: Sequence["Violation"] | str):
        if isinstance(violations, str):
            violations = [Violation("format", "", violations)]
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class Violation(NamedTuple):
    kind: str
    where: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} at {self.where}: {self.message}" if self.where else f"{self.kind}: {self.message}"


class DirectedPattern(NamedTuple):
    """A control pattern allowing at most one controllable event.

    ``tag`` is that controllable event, or ``None`` for the pattern made of
    the uncontrollable events only.
    """

    tag: str | None
    events: frozenset[str]


@dataclass(frozen=True)
class EventProb:
    """Event-occurrence rule.

    ``mode`` is ``"uniform"`` (1/|pattern|), ``"weights"`` (per-state event
    weights renormalised within the pattern; missing weights count as 1) or
    ``"explicit"`` (uniform fallback).  Explicit ``(state, pattern)`` tables
    override the rule in every mode.
    """

    mode: str = "uniform"
    weights: Mapping[str, Mapping[str, float]] = field(default_factory=dict)
    explicit: Mapping[tuple[str, frozenset[str]], Mapping[str, float]] = field(default_factory=dict)


def _freeze(d: Mapping) -> Mapping:
    return MappingProxyType(dict(d))


class Sdes:
    """Immutable SDES.  Event order is declaration order and is canonical."""

    def __init__(
        self,
        states: Sequence[str],
        events: Sequence[tuple[str, bool]],
        initial: str,
        labels: Mapping[str, Iterable[str]],
        transitions: Iterable[tuple[str, str, str, float]],
        event_prob: EventProb | None = None,
    ):
        self.states: tuple[str, ...] = tuple(states)
        self.events: tuple[str, ...] = tuple(e for e, _ in events)
        self.controllable: frozenset[str] = frozenset(e for e, c in events if c)
        self.initial = initial
        self.labels: Mapping[str, frozenset[str]] = _freeze(
            {s: frozenset(labels.get(s, ())) for s in self.states} | {s: frozenset(v) for s, v in labels.items()}
        )
        kernel: dict[tuple[str, str], dict[str, float]] = {}
        for s, e, t, p in transitions:
            row = kernel.setdefault((s, e), {})
            row[t] = row.get(t, 0.0) + float(p)
        self.transitions: Mapping[tuple[str, str], Mapping[str, float]] = _freeze(
            {k: _freeze(v) for k, v in kernel.items()}
        )
        self.event_prob = event_prob or EventProb()
        self._event_rank = {e: i for i, e in enumerate(self.events)}
        self._enabled: dict[str, tuple[str, ...]] = {}
        for s in self.states:
            self._enabled[s] = tuple(
                e for e in self.events if sum(self.transitions.get((s, e), {}).values()) > 0.5
            )
        self._patterns: dict[str, tuple[DirectedPattern, ...]] = {}

    # ------------------------------------------------------------ structure

    @property
    def ap(self) -> frozenset[str]:
        return frozenset().union(*self.labels.values()) if self.labels else frozenset()

    def label(self, s: str) -> frozenset[str]:
        return self.labels.get(s, frozenset())

    def is_controllable(self, e: str) -> bool:
        return e in self.controllable

    def enabled(self, s: str) -> tuple[str, ...]:
        """Events with a (unit-mass) transition out of ``s``."""
        return self._enabled[s]

    def controllable_at(self, s: str) -> tuple[str, ...]:
        return tuple(e for e in self._enabled[s] if e in self.controllable)

    def uncontrollable_at(self, s: str) -> frozenset[str]:
        return frozenset(e for e in self._enabled[s] if e not in self.controllable)

    def sort_events(self, events: Iterable[str]) -> tuple[str, ...]:
        return tuple(sorted(events, key=self._event_rank.__getitem__))

    def directed_patterns(self, s: str) -> tuple[DirectedPattern, ...]:
        """``{e} | Euc(s)`` for each controllable ``e`` (canonical order), then
        ``Euc(s)`` alone when it is non-empty."""
        cached = self._patterns.get(s)
        if cached is None:
            unc = self.uncontrollable_at(s)
            cached = tuple(DirectedPattern(e, unc | {e}) for e in self.controllable_at(s))
            if unc:
                cached += (DirectedPattern(None, unc),)
            self._patterns[s] = cached
        return cached

    def check_pattern(self, s: str, pattern: Iterable[str]) -> frozenset[str]:
        xi = frozenset(pattern)
        if not xi:
            raise ModelError(f"empty control pattern at {s}")
        extra = xi - set(self._enabled[s])
        if extra:
            raise ModelError(f"pattern at {s} contains events not enabled there: {sorted(extra)}")
        missing = self.uncontrollable_at(s) - xi
        if missing:
            raise ModelError(f"pattern at {s} omits uncontrollable events {sorted(missing)}")
        return xi

    # -------------------------------------------------------- probabilities

    def event_distribution(self, s: str, pattern: Iterable[str]) -> dict[str, float]:
        """``P_E(. | s, pattern)`` as an event -> probability dict in
        canonical event order."""
        xi = frozenset(pattern)
        table = self.event_prob.explicit.get((s, xi))
        order = self.sort_events(xi)
        if table is not None:
            return {e: float(table[e]) for e in order}
        if self.event_prob.mode == "weights":
            w = self.event_prob.weights.get(s, {})
            raw = [float(w.get(e, 1.0)) for e in order]
            total = math.fsum(raw)
            return {e: x / total for e, x in zip(order, raw)}
        return {e: 1.0 / len(order) for e in order}

    def controlled_prob(self, s: str, pattern: Iterable[str]) -> dict[str, float]:
        """``P(s' | s, pattern) = sum_e P_E(e | s, pattern) P_T(s' | s, e)``."""
        out: dict[str, float] = {}
        for e, pe in self.event_distribution(s, pattern).items():
            for t, pt in self.transitions.get((s, e), {}).items():
                out[t] = out.get(t, 0.0) + pe * pt
        return out

    def sample_step(self, s: str, pattern: Iterable[str], rng) -> tuple[str, str]:
        """Draw ``(event, next_state)``; ``rng`` needs a ``random()`` method."""
        xi = self.check_pattern(s, pattern)
        e = _draw(self.event_distribution(s, xi), rng.random())
        t = _draw(self.transitions[(s, e)], rng.random())
        return e, t


def _draw(dist: Mapping[str, float], u: float) -> str:
    acc = 0.0
    last = None
    for k, p in dist.items():
        if p <= 0:
            continue
        acc += p
        last = k
        if u < acc:
            return k
    return last


# ------------------------------------------------------------ validation


def validate(model: Sdes) -> list[Violation]:
    """All well-formedness violations of ``model`` (empty when valid)."""
    out: list[Violation] = []
    states = set(model.states)
    events = set(model.events)
    if len(states) != len(model.states):
        out.append(Violation("duplicate", "states", "state names must be unique"))
    if len(events) != len(model.events):
        out.append(Violation("duplicate", "events", "event names must be unique"))
    if model.initial not in states:
        out.append(Violation("unknown-state", "init", f"initial state {model.initial!r} not declared"))
    for s in model.labels:
        if s not in states:
            out.append(Violation("unknown-state", f"labels/{s}", "label for undeclared state"))
    for (s, e), row in model.transitions.items():
        where = f"transitions/{s},{e}"
        if s not in states:
            out.append(Violation("unknown-state", where, f"source {s!r} not declared"))
        if e not in events:
            out.append(Violation("unknown-event", where, f"event {e!r} not declared"))
        for t, p in row.items():
            if t not in states:
                out.append(Violation("unknown-state", where, f"target {t!r} not declared"))
            if not (0.0 <= p <= 1.0 + TOL) or math.isnan(p):
                out.append(Violation("probability", where, f"P_T={p!r} outside [0,1]"))
        mass = math.fsum(row.values())
        if abs(mass) > TOL and abs(mass - 1.0) > TOL:
            out.append(Violation("mass", where, f"outgoing mass {mass!r} is neither 0 nor 1"))
    for s in model.states:
        if not model.enabled(s):
            out.append(Violation("deadlock", s, "no enabled event"))
    ep = model.event_prob
    if ep.mode not in ("uniform", "weights", "explicit"):
        out.append(Violation("event-prob", "mode", f"unknown mode {ep.mode!r}"))
    for s, w in ep.weights.items():
        if s not in states:
            out.append(Violation("unknown-state", f"event_prob/weights/{s}", "undeclared state"))
            continue
        for e, x in w.items():
            if e not in events:
                out.append(Violation("unknown-event", f"event_prob/weights/{s}", f"event {e!r}"))
            elif not (x > 0 and math.isfinite(x)):
                out.append(Violation("event-prob", f"event_prob/weights/{s}", f"weight of {e} must be positive"))
    for (s, xi), table in ep.explicit.items():
        where = f"event_prob/explicit/{s},{{{','.join(sorted(xi))}}}"
        if s not in states:
            out.append(Violation("unknown-state", where, "undeclared state"))
            continue
        enabled = set(model.enabled(s))
        if not xi or not xi <= enabled or not model.uncontrollable_at(s) <= xi:
            out.append(Violation("pattern", where, "not a control pattern at this state"))
        if set(table) != set(xi):
            out.append(Violation("event-prob", where, "table must give exactly the pattern's events"))
        if any(not (0.0 < p <= 1.0 + TOL) for p in table.values()):
            out.append(Violation("event-prob", where, "probabilities must be positive"))
        total = math.fsum(table.values())
        if abs(total - 1.0) > TOL:
            out.append(Violation("event-prob", where, f"probabilities sum to {total!r}"))
    return out


# ------------------------------------------------------------ file format

_TOP_KEYS = {"states", "events", "init", "labels", "transitions", "event_prob"}
_EP_KEYS = {"mode", "weights", "explicit"}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ModelError(message)


def model_from_dict(data: Mapping[str, Any]) -> Sdes:
    """Build and validate a model from its JSON-shaped description."""
    _require(isinstance(data, Mapping), "model must be a JSON object")
    unknown = set(data) - _TOP_KEYS
    _require(not unknown, f"unknown model fields {sorted(unknown)}")
    for k in ("states", "events", "init", "transitions"):
        _require(k in data, f"missing model field {k!r}")
    events = []
    for ev in data["events"]:
        _require(isinstance(ev, Mapping) and set(ev) <= {"name", "controllable"} and "name" in ev,
                 f"bad event entry {ev!r}")
        events.append((str(ev["name"]), bool(ev.get("controllable", True))))
    trans = []
    for t in data["transitions"]:
        if isinstance(t, Mapping):
            _require(set(t) == {"from", "event", "to", "prob"}, f"bad transition entry {t!r}")
            t = (t["from"], t["event"], t["to"], t["prob"])
        _require(len(t) == 4, f"bad transition entry {t!r}")
        trans.append((str(t[0]), str(t[1]), str(t[2]), float(t[3])))
    ep_data = data.get("event_prob", {"mode": "uniform"})
    _require(isinstance(ep_data, Mapping), "event_prob must be an object")
    unknown = set(ep_data) - _EP_KEYS
    _require(not unknown, f"unknown event_prob fields {sorted(unknown)}")
    explicit = {}
    for entry in ep_data.get("explicit", []):
        _require(isinstance(entry, Mapping) and set(entry) == {"state", "pattern", "probs"},
                 f"bad explicit entry {entry!r}")
        explicit[(str(entry["state"]), frozenset(entry["pattern"]))] = {
            str(e): float(p) for e, p in entry["probs"].items()
        }
    ep = EventProb(
        mode=str(ep_data.get("mode", "uniform")),
        weights={str(s): {str(e): float(x) for e, x in w.items()} for s, w in ep_data.get("weights", {}).items()},
        explicit=explicit,
    )
    model = Sdes(
        states=[str(s) for s in data["states"]],
        events=events,
        initial=str(data["init"]),
        labels={str(s): [str(p) for p in v] for s, v in data.get("labels", {}).items()},
        transitions=trans,
        event_prob=ep,
    )
    violations = validate(model)
    if violations:
        raise ModelError(violations)
    return model


def model_to_dict(model: Sdes) -> dict[str, Any]:
    rank = {s: i for i, s in enumerate(model.states)}
    trans = [
        [s, e, t, p]
        for (s, e), row in model.transitions.items()
        for t, p in row.items()
    ]
    trans.sort(key=lambda r: (rank[r[0]], model.events.index(r[1]), rank[r[2]]))
    ep: dict[str, Any] = {"mode": model.event_prob.mode}
    if model.event_prob.weights:
        ep["weights"] = {s: dict(w) for s, w in model.event_prob.weights.items()}
    if model.event_prob.explicit:
        ep["explicit"] = [
            {"state": s, "pattern": list(model.sort_events(xi)), "probs": dict(t)}
            for (s, xi), t in model.event_prob.explicit.items()
        ]
    return {
        "states": list(model.states),
        "events": [{"name": e, "controllable": e in model.controllable} for e in model.events],
        "init": model.initial,
        "labels": {s: sorted(v) for s, v in model.labels.items() if v},
        "transitions": trans,
        "event_prob": ep,
    }


def load_model(path) -> Sdes:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelError(f"invalid JSON: {exc}") from None
    return model_from_dict(data)


def dump_model(model: Sdes, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)
        fh.write("\n")
