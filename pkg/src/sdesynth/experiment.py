"""Building problems from inputs and running learning sessions."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .automata import CoBuchiAutomaton, SafetyAutomaton, determinize, ltl_to_ucba, parse_automaton
from .evaluate import Ind2Scorer, ind1
from .fixtures import FIXTURES
from .ltl import atoms, parse_ltl
from .params import Params
from .product import ProductSdes, build_product
from .rl import ProductEnv, Stage1Result, Stage2Result, session_seeds, stage1_learn, stage2_learn
from .sdes import Sdes, load_model
from .synth import QTable, build_supervisor, value_iterate, winning_region

__all__ = [
    "Problem",
    "GroundTruth",
    "SessionResult",
    "load_problem",
    "build_problem",
    "ground_truth",
    "run_session",
    "write_csv",
]


@dataclass
class Problem:
    model: Sdes
    cba: CoBuchiAutomaton
    safety: SafetyAutomaton
    prod: ProductSdes
    params: Params


def _read_spec(spec: str) -> str:
    path = Path(spec)
    if path.is_file():
        return path.read_text(encoding="utf-8")
    if os.sep in spec or spec.endswith((".ltl", ".txt", ".aut")):
        raise FileNotFoundError(spec)
    return spec


def make_cba(spec_text: str, ap: Iterable[str]) -> CoBuchiAutomaton:
    """A cBA from formula text or from the automaton line format."""
    if any(line.strip().startswith("states:") for line in spec_text.splitlines()):
        return parse_automaton(spec_text)
    lines = [ln for ln in spec_text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    formula = parse_ltl(" ".join(lines))
    return ltl_to_ucba(formula, sorted(set(ap) | atoms(formula)))


def build_problem(model: Sdes, spec_text: str, params: Params) -> Problem:
    cba = make_cba(spec_text, model.ap)
    safety = determinize(cba, params.K)
    return Problem(model, cba, safety, build_product(model, safety), params)


def load_problem(model: str, spec: str | None, params: Params | None) -> Problem:
    """``model`` is a bundled fixture name or a JSON path; ``spec`` a file
    or inline formula (defaults to the fixture's)."""
    if model in FIXTURES:
        builder, fx_spec, fx_k = FIXTURES[model]
        sdes = builder()
        params = params or Params(K=fx_k)
        spec_text = _read_spec(spec) if spec else fx_spec
    else:
        sdes = load_model(model)
        params = params or Params()
        if not spec:
            raise ValueError("--spec is required for model files")
        spec_text = _read_spec(spec)
    return build_problem(sdes, spec_text, params)


@dataclass
class GroundTruth:
    q: QTable
    winning: frozenset[int]
    supervisor: object
    ind1_numerator: int


def ground_truth(problem: Problem) -> GroundTruth:
    q = value_iterate(problem.prod, problem.params)
    W = winning_region(q)
    sv = build_supervisor(q)
    prod = problem.prod
    num = sum(len(sv[i] - prod.uncontrollable_at(i)) for i in W)
    return GroundTruth(q, W, sv, num)


@dataclass
class SessionResult:
    seed: int
    stage1: Stage1Result
    stage2: Stage2Result
    supervisor: object
    ind1: float | None = None
    ind2: float | None = None
    extra: dict = field(default_factory=dict)


def run_session(
    problem: Problem,
    seed: int,
    truth: GroundTruth | None = None,
    scorer: Ind2Scorer | None = None,
    log_every: int = 100,
) -> SessionResult:
    """Stage 1 then Stage 2 with seeds derived from ``seed``."""
    prod, params = problem.prod, problem.params
    env_seed, agent_seed = session_seeds(seed)
    env = ProductEnv(prod, env_seed)
    t = (truth.winning, truth.ind1_numerator) if truth is not None else None
    s1 = stage1_learn(env, prod, params, seed=agent_seed, truth=t)
    if truth is not None and scorer is None:
        scorer = Ind2Scorer(truth.q, s1.winning)
    s2 = stage2_learn(env, prod, s1.q, s1.winning, params, seed=agent_seed + 1, ind2=scorer, log_every=log_every)
    sv = build_supervisor(s2.q)
    res = SessionResult(seed, s1, s2, sv)
    if truth is not None:
        res.ind1 = ind1(prod, truth.supervisor, sv, truth.winning)
        res.ind2 = scorer(s2.q.values) if not s2.skipped else None
    return res


def _fmt(x) -> str:
    if isinstance(x, float):
        return "" if np.isnan(x) else format(x, ".17g")
    if isinstance(x, (np.floating,)):
        return _fmt(float(x))
    return str(x)


def write_csv(path, header: list[str], rows: Iterable[Iterable]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
