import random

import pytest

from sdesynth.automata import (
    AutomatonError,
    CoBuchiAutomaton,
    accepts_kcba,
    accepts_ucba,
    counter_initial,
    counter_step,
    determinize,
    format_automaton,
    format_safety_automaton,
    ltl_to_ucba,
    parse_automaton,
)
from sdesynth.ltl import Lasso, parse_ltl
from sdesynth.random_models import random_cba, random_lasso

NONE, R = frozenset(), frozenset({"r"})


@pytest.fixture(scope="module")
def gfr():
    return ltl_to_ucba(parse_ltl("G F r"))


def test_gfr_structure(gfr):
    # x0 waits, x1 is the accepting "no r since" state, x2 the dead completion
    assert gfr.states == ("x0", "x1", "x2")
    assert gfr.initial == "x0" and gfr.accepting == {"x1"}
    assert gfr.is_complete()
    assert gfr.successors("x0", NONE) == ("x0", "x1")
    assert gfr.successors("x1", R) == ("x2",)


def test_counter_initial(gfr):
    assert counter_initial(gfr) == (0, -1, -1)
    B = CoBuchiAutomaton(("y",), (NONE,), "y", frozenset({"y"}), {("y", NONE): ("y",)})
    assert counter_initial(B) == (1,)


def test_counter_step_examples(gfr):
    assert counter_step(gfr, (0, -1, -1), NONE, 1) == (0, 1, -1)
    assert counter_step(gfr, (0, 1, -1), NONE, 1) == (0, 2, -1)
    # raw step keeps the dead completion state alive; determinize drops it
    assert counter_step(gfr, (0, 1, -1), R, 1) == (0, -1, 1)


def test_counter_saturates(gfr):
    assert counter_step(gfr, (0, 2, -1), NONE, 1) == (0, 2, -1)


def test_determinize_gfr(gfr):
    S = determinize(gfr, 1)
    assert S.counters == ((0, -1, -1), (0, 1, -1), None)
    assert [S.describe(q) for q in range(3)] == ["{(x0,0)}", "{(x0,0),(x1,1)}", "sink"]
    assert S.step(0, NONE) == 1 and S.step(0, R) == 0
    assert S.step(1, NONE) == S.sink and S.step(1, R) == 0
    assert all(t == S.sink for t in S.delta[S.sink])


def test_determinize_k0_gfr(gfr):
    S = determinize(gfr, 0)
    assert S.n_states == 2
    assert S.step(S.initial, NONE) == S.sink


def test_determinize_errors(gfr):
    with pytest.raises(AutomatonError):
        determinize(gfr, -1)
    partial = CoBuchiAutomaton(("y",), (NONE, R), "y", frozenset(), {("y", NONE): ("y",)})
    with pytest.raises(AutomatonError):
        determinize(partial, 1)


def test_unknown_letter(gfr):
    S = determinize(gfr, 1)
    with pytest.raises(AutomatonError):
        S.step(0, frozenset({"zz"}))


def test_true_has_no_reachable_sink():
    S = determinize(ltl_to_ucba(parse_ltl("true")), 0)
    q = S.initial
    assert q != S.sink and all(S.step(q, a) == q for a in S.alphabet)


@pytest.mark.parametrize(
    "cycle, k, expected",
    [([R], 1, True), ([NONE], 1, False), ([NONE, R], 0, False), ([NONE, R], 1, True), ([R, R, NONE], 5, True)],
)
def test_kcba_examples(gfr, cycle, k, expected):
    w = Lasso((), tuple(cycle))
    assert accepts_kcba(gfr, k, w) is expected
    assert determinize(gfr, k).accepts(w) is expected


def test_prefix_counts_toward_bound(gfr):
    # each run enters x1 at most once per gap, so only consecutive gaps add up
    assert accepts_kcba(gfr, 1, Lasso((NONE, R, NONE, R), (R,)))
    w = Lasso((NONE, NONE, R), (R,))
    assert not accepts_kcba(gfr, 1, w)
    assert accepts_kcba(gfr, 2, w)
    assert accepts_ucba(gfr, w)


@pytest.mark.parametrize("seed", range(40))
def test_random_det_language_and_monotonicity(seed):
    rng = random.Random(seed)
    B = random_cba(rng, props=("p",))
    dets = {k: determinize(B, k) for k in range(4)}
    raw = {k: determinize(B, k, reduce=False) for k in range(3)}
    for _ in range(60):
        w = random_lasso(rng, props=("p",))
        acc = [accepts_kcba(B, k, w) for k in range(4)]
        for k in range(4):
            assert dets[k].accepts(w) == acc[k]
        for k in range(3):
            assert raw[k].accepts(w) == acc[k]
            assert not acc[k] or acc[k + 1]
        if acc[0]:
            assert accepts_ucba(B, w)


def test_format_parse_round_trip(gfr):
    text = format_automaton(gfr)
    back = parse_automaton(text)
    assert back.states == gfr.states and back.initial == gfr.initial
    assert back.accepting == gfr.accepting
    assert {k: set(v) for k, v in back.delta.items()} == {k: set(v) for k, v in gfr.delta.items()}
    assert format_automaton(back) == text


def test_safety_export_is_stable(gfr):
    assert format_safety_automaton(determinize(gfr, 2)) == format_safety_automaton(determinize(gfr, 2))


def test_parse_rejects_garbage():
    with pytest.raises(AutomatonError):
        parse_automaton("states: x0\ninitial: x9\nalphabet: []\naccepting:\n")
