import random

import numpy as np
import pytest

from sdesynth.automata import determinize, ltl_to_ucba
from sdesynth.evaluate import brute_force_max_sat, qualitative_winning
from sdesynth.experiment import build_problem, load_problem
from sdesynth.ltl import parse_ltl
from sdesynth.params import Params, ParamsError
from sdesynth.product import build_product, supervisor_from_mapping
from sdesynth.random_models import random_problem
from sdesynth.sdes import Sdes
from sdesynth.synth import (
    NonConvergenceError,
    build_supervisor,
    discounts,
    max_reach_prob,
    rewards,
    sat_prob_under,
    value_iterate,
    winning_pairs,
    winning_region,
)


@pytest.fixture(scope="module")
def three():
    prod = load_problem("three-state", None, None).prod
    return prod, value_iterate(prod)


def coin_flip_product():
    """From ``s`` one event leads to a safe absorbing state or a bad one."""
    m = Sdes(
        ["s", "ok", "bad"],
        [("go", True), ("stay", True)],
        "s",
        {"bad": ["b"]},
        [("s", "go", "ok", 0.5), ("s", "go", "bad", 0.5), ("ok", "stay", "ok", 1.0), ("bad", "stay", "bad", 1.0)],
    )
    return build_product(m, determinize(ltl_to_ucba(parse_ltl("G !b")), 0))


def test_reward_and_discount(three):
    prod, _ = three
    p = Params()
    assert rewards(prod, p).tolist() == [0.0, 0.0, 0.0, pytest.approx(-0.1)]
    assert discounts(prod, p).tolist() == [0.9999, 0.9999, 0.9999, 0.9]
    assert rewards(prod, p)[prod.sink] + p.gamma_acc * p.r_n == pytest.approx(p.r_n)


def test_half_to_sink_is_minus_half():
    prod = coin_flip_product()
    q = value_iterate(prod)
    s = prod.initial
    assert q.at(s)[0] == pytest.approx(-0.5, abs=1e-9)
    assert q.state_values()[prod.sink] == pytest.approx(-1.0, abs=1e-6)
    assert winning_region(q) == {prod.index[("ok", prod.keys[s][1])]}


def test_three_state_winning_region(three):
    prod, q = three
    assert sorted(prod.name(i) for i in winning_region(q)) == ["(s1,q1)", "(s2,q0)"]
    assert prod.initial in winning_region(q)
    assert prod.sink not in winning_region(q)


def test_three_state_supervisor(three):
    prod, q = three
    sv = build_supervisor(q)
    assert sv[prod.lookup("(s1,q1)")] == {"b"}
    assert sv[prod.lookup("(s2,q0)")] == {"a", "c"}
    assert sat_prob_under(prod, sv) == 1.0


def test_three_state_values_match_reference_up_to_one_discount(three):
    # the reference rows discount the entered state once more than we do
    prod, q = three
    g = Params().gamma
    reference = {
        "(s1,q1)": [-0.9999, 0.0],
        "(s2,q0)": [0.0, -0.4999, 0.0],
        "(s0,q1)": [-0.49995, -0.74992, -0.9999],
    }
    for name, row in reference.items():
        assert g * q.at(prod.lookup(name)) == pytest.approx(row, abs=1e-4)
    assert q.at(prod.sink)[0] == pytest.approx(-1.0, abs=1e-6)


def test_winning_pairs_exact_zero(three):
    prod, q = three
    mask = winning_pairs(q)
    assert mask.sum() == 3
    assert all(q.values[mask] == 0.0)
    assert np.all(q.values <= 0.0) and np.all(q.values >= -1.0)


def test_non_convergence_reported(three):
    prod, _ = three
    with pytest.raises(NonConvergenceError) as err:
        value_iterate(prod, Params(max_sweeps=3))
    assert err.value.sweeps == 3 and err.value.residual > 0


def test_params_validation():
    for bad in ({"gamma": 1.0}, {"gamma_acc": 0.0}, {"r_n": 0.0}, {"tol": 0.0}, {"K": -1}, {"alpha": 1.5}, {"epsilon": 0.0}):
        with pytest.raises(ParamsError):
            Params(**bad)
    with pytest.raises(ParamsError):
        Params.from_dict({"gama": 0.5})


def _random(seed):
    m, f, k = random_problem(random.Random(seed))
    return build_problem(m, f, Params(K=k)).prod


@pytest.mark.parametrize("seed", range(30))
def test_dp_agrees_with_fixpoint_and_reach_prob(seed):
    prod = _random(seed)
    q = value_iterate(prod)
    W = winning_region(q)
    Wq, pairs = qualitative_winning(prod)
    assert W == Wq
    assert (winning_pairs(q) == pairs).all()
    sv = build_supervisor(q)
    best = max_reach_prob(prod, W)
    assert sat_prob_under(prod, sv) == pytest.approx(best[prod.initial], abs=1e-9)


@pytest.mark.parametrize("seed", range(30))
def test_outside_w_supervisor_picks_an_argmax(seed):
    prod = _random(seed)
    q = value_iterate(prod)
    W = winning_region(q)
    sv = build_supervisor(q)
    for i in range(prod.n):
        if i in W or i == prod.sink:
            continue
        k = [x.events for x in prod.patterns[i]].index(sv[i])
        assert q.at(i)[k] == q.at(i).max()


@pytest.mark.parametrize("seed", range(30))
def test_maximal_permissiveness_in_w(seed):
    prod = _random(seed)
    q = value_iterate(prod)
    W = winning_region(q)
    sv = build_supervisor(q)
    for i in W:
        for p, xi in zip(prod.pair_range(i), prod.patterns[i]):
            leaves = any(j not in W for j in prod.pairs[p].succ)
            # a pattern is allowed exactly when it cannot leave W in one step
            assert (xi.events <= sv[i]) == (not leaves) or xi.tag is None


@pytest.mark.parametrize("seed", range(10))
def test_brute_force_matches_on_small_products(seed):
    for s in range(seed * 50, seed * 50 + 50):
        prod = _random(s)
        if 2 <= prod.n <= 5:
            break
    q = value_iterate(prod)
    assert brute_force_max_sat(prod) == pytest.approx(sat_prob_under(prod, build_supervisor(q)), abs=1e-9)


def test_sure_failure_gives_zero():
    m = Sdes(["s", "bad"], [("go", True)], "s", {"bad": ["b"]}, [("s", "go", "bad", 1.0), ("bad", "go", "bad", 1.0)])
    prod = build_product(m, determinize(ltl_to_ucba(parse_ltl("G !b")), 0))
    q = value_iterate(prod)
    assert sat_prob_under(prod, build_supervisor(q)) == 0.0
    assert winning_region(q) == frozenset()


def test_sat_prob_of_fixed_supervisor(three):
    prod, _ = three
    sv = supervisor_from_mapping(prod, {0: {"a"}, 1: {"b"}, 2: {"b", "err"}})
    assert sat_prob_under(prod, sv) == 0.0
