import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdesynth.fixtures import three_state, two_robot
from sdesynth.random_models import random_sdes
from sdesynth.sdes import EventProb, ModelError, Sdes, dump_model, load_model, model_from_dict, model_to_dict, validate


def kinds(model):
    return {v.kind for v in validate(model)}


def test_fixtures_validate():
    assert validate(three_state()) == []
    assert validate(two_robot()) == []


def test_mass_violation():
    m = Sdes(["s"], [("a", True)], "s", {}, [("s", "a", "s", 0.9)])
    assert "mass" in kinds(m)


def test_deadlock_violation():
    m = Sdes(["s", "t"], [("a", True)], "s", {}, [("s", "a", "t", 1.0)])
    v = [x for x in validate(m) if x.kind == "deadlock"]
    assert [x.where for x in v] == ["t"]


def test_unknown_names():
    m = Sdes(["s"], [("a", True)], "s", {"zz": ["p"]}, [("s", "a", "s", 1.0), ("s", "b", "q", 1.0)])
    assert {"unknown-state", "unknown-event"} <= kinds(m)


def test_explicit_table_checked():
    bad = EventProb("explicit", explicit={("s", frozenset({"a", "u"})): {"a": 0.7, "u": 0.7}})
    m = Sdes(["s"], [("a", True), ("u", False)], "s", {}, [("s", "a", "s", 1.0), ("s", "u", "s", 1.0)], bad)
    assert "event-prob" in kinds(m)
    not_pattern = EventProb("explicit", explicit={("s", frozenset({"a"})): {"a": 1.0}})
    m = Sdes(["s"], [("a", True), ("u", False)], "s", {}, [("s", "a", "s", 1.0), ("s", "u", "s", 1.0)], not_pattern)
    assert "pattern" in kinds(m)


def test_directed_patterns_three_state():
    m = three_state()
    assert [x.events for x in m.directed_patterns("s0")] == [{"a", "err"}, {"b", "err"}, {"err"}]
    assert [x.tag for x in m.directed_patterns("s0")] == ["a", "b", None]
    assert [x.events for x in m.directed_patterns("s1")] == [{"a"}, {"b"}]
    assert [x.events for x in m.directed_patterns("s2")] == [{"a"}, {"b"}, {"c"}]


def test_controlled_prob_examples():
    m = three_state()
    assert m.controlled_prob("s2", {"c"}) == pytest.approx({"s1": 0.7, "s2": 0.3})
    assert m.controlled_prob("s1", {"b"}) == {"s2": 1.0}
    assert m.controlled_prob("s0", {"b", "err"}) == pytest.approx({"s1": 0.25, "s2": 0.25, "s0": 0.5})
    assert m.controlled_prob("s0", {"a", "b", "err"}) == pytest.approx({"s2": 0.6, "s1": 0.2, "s0": 0.2})


def test_uniform_split():
    m = Sdes(["s", "t1", "t2"], [("c1", True), ("c2", True)], "s", {},
             [("s", "c1", "t1", 1.0), ("s", "c2", "t2", 1.0), ("t1", "c1", "t1", 1.0), ("t2", "c1", "t2", 1.0)])
    assert m.controlled_prob("s", {"c1", "c2"}) == {"t1": 0.5, "t2": 0.5}


def test_weights_mode():
    ep = EventProb("weights", weights={"s": {"a": 3.0}})
    m = Sdes(["s"], [("a", True), ("b", True), ("u", False)], "s", {},
             [("s", e, "s", 1.0) for e in "abu"], ep)
    assert m.event_distribution("s", {"a", "b", "u"}) == pytest.approx({"a": 0.6, "b": 0.2, "u": 0.2})
    assert m.event_distribution("s", {"b", "u"}) == pytest.approx({"b": 0.5, "u": 0.5})


def test_check_pattern():
    m = three_state()
    with pytest.raises(ModelError):
        m.check_pattern("s0", {"a"})  # omits err
    with pytest.raises(ModelError):
        m.check_pattern("s1", {"c"})
    with pytest.raises(ModelError):
        m.check_pattern("s1", set())


def test_sample_frequency():
    m = three_state()
    rng = random.Random(7)
    n = 100_000
    hits = sum(m.sample_step("s2", {"c"}, rng)[1] == "s1" for _ in range(n))
    assert abs(hits / n - 0.7) < 0.01


def test_sampling_is_seeded():
    m = three_state()

    def run(seed):
        rng = random.Random(seed)
        s, out = "s1", []
        for _ in range(1000):
            pats = m.directed_patterns(s)
            e, s = m.sample_step(s, pats[-1].events, rng)
            out.append((e, s))
        return out

    assert run(3) == run(3)


def test_deterministic_step_ignores_seed():
    m = three_state()
    assert {m.sample_step("s1", {"b"}, random.Random(k)) for k in range(20)} == {("b", "s2")}


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10_000))
def test_controlled_prob_sums_to_one(seed):
    m = random_sdes(random.Random(seed))
    assert validate(m) == []
    for s in m.states:
        unc = m.uncontrollable_at(s)
        for x in m.directed_patterns(s):
            assert len(x.events & m.controllable) <= 1 and unc <= x.events
            assert sum(m.controlled_prob(s, x.events).values()) == pytest.approx(1.0, abs=1e-12)
        assert sum(m.controlled_prob(s, m.enabled(s)).values()) == pytest.approx(1.0, abs=1e-12)


def test_json_round_trip(tmp_path):
    m = three_state()
    path = tmp_path / "m.json"
    dump_model(m, path)
    back = load_model(path)
    assert model_to_dict(back) == model_to_dict(m)
    for s in m.states:
        for x in m.directed_patterns(s):
            assert back.controlled_prob(s, x.events) == m.controlled_prob(s, x.events)


def test_json_rejects_unknown_fields():
    d = model_to_dict(three_state())
    with pytest.raises(ModelError):
        model_from_dict({**d, "comment": "x"})
    with pytest.raises(ModelError):
        model_from_dict({**d, "event_prob": {"mode": "uniform", "extra": 1}})


def test_json_reports_violations():
    d = json.loads(json.dumps(model_to_dict(three_state())))
    d["transitions"] = [t for t in d["transitions"] if t[0] != "s1"]
    with pytest.raises(ModelError) as err:
        model_from_dict(d)
    assert any(v.kind == "deadlock" for v in err.value.violations)
