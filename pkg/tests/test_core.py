import json
import random

import pytest
from hypothesis import given, strategies as st

from popcomp import core, qfpa, synth
from popcomp.core import Configuration, Consensus, MarkedConsensus, Transition


@pytest.fixture
def mod11():
    return synth.remainder_sub(11, 4)


def naive_enabled(p, c):
    return sorted((Transition(l, r) for l, r in p.delta.items() if c.contains(l)),
                  key=lambda t: t.lhs)


def test_enabled_examples(mod11, toy):
    got = core.enabled(mod11, Configuration({"1": 2}))
    assert [(t.lhs, t.rhs) for t in got] == [(("1", "1"), ("0", "2"))]
    assert core.enabled(mod11, Configuration()) == []
    assert len(core.enabled(toy, Configuration({"q1": 2, "q2": 1}))) == 2
    assert len(core.enabled(toy, Configuration({"q1": 1}))) == 0


def test_step_examples(mod11):
    c = core.step(Configuration({"1": 2}), Transition(("1", "1"), ("0", "2")))
    assert c == Configuration({"2": 1, "0": 1})
    fast = Transition(("16",) * 4, mod11.delta[("16",) * 4])
    assert core.step(Configuration({"16": 4}), fast) == Configuration({"8": 1, "1": 1, "0": 2})
    same = Transition(("a", "b"), ("a", "b"))
    c = Configuration({"a": 1, "b": 3})
    assert core.step(c, same) == c
    with pytest.raises(ValueError):
        core.step(Configuration({"1": 1}), Transition(("1", "1"), ("0", "2")))


def test_output_examples(mod11):
    assert core.output(mod11, Configuration({"4": 1, "0": 12})) == 1
    cons = Consensus(frozenset({"a"}), frozenset({"b"}))
    assert cons({"a", "b"}) is None
    assert cons({"b"}) == 1
    marked = MarkedConsensus(frozenset({"a"}), frozenset({"b"}))
    assert marked({"c"}) is None
    assert marked({"a", "c"}) == 0
    assert marked({"a", "b"}) is None


def test_validate_examples(mod11):
    assert core.validate(mod11) == []
    bad = core.make_computer(["p", "q", "o"], [(["p", "q", "o"], ["p", "p", "q"])], ["p"],
                             Consensus(frozenset({"p", "q", "o"}), frozenset()))
    problems = core.validate(bad)
    assert len(problems) == 1 and "two distinct" in problems[0]
    with pytest.raises(ValueError, match="nondeterministic"):
        core.make_computer(["p", "q"], [(["q", "q"], ["q", "q"]), (["q", "q"], ["p", "p"])], ["q"],
                           Consensus(frozenset({"q"}), frozenset({"p"})))


def test_validate_arity_and_helpers():
    out = Consensus(frozenset({"a", "b"}), frozenset())
    p = core.PopulationComputer(("a", "b"), {("a", "b"): ("a",)}, ("a",), out, {"a": 1})
    problems = core.validate(p)
    assert any("differs" in s for s in problems)
    assert any("input state" in s for s in problems)


def test_initial_examples(mod11):
    full = synth.compile(qfpa.parse("8x + 2y + z = 4 mod 11"))
    c = core.initial(full, synth.input_config(full, {"x": 1, "y": 0, "z": 0}))
    assert c["X:x"] == 1 and c.n == 1 + full.helper_count()
    assert core.initial(mod11, {}) == Configuration(mod11.helpers)
    c = core.initial(mod11, {}, {"0": 2})
    assert c["0"] == 14
    with pytest.raises(ValueError):
        core.initial(mod11, {}, {"1": 1})
    with pytest.raises(ValueError):
        core.initial(mod11, {"0": 1})


def test_fig1_initial_after_distribution(mod11):
    # x = 1 distributes a single agent into state 8 next to 12 reservoir helpers
    p = synth.compile(qfpa.parse("8x + 2y + z = 4 mod 11"))
    c = core.initial(p, synth.input_config(p, {"x": 1, "y": 0, "z": 0}))
    t = core.enabled(p, c)
    dist = [u for u in t if "X:x" in u.lhs]
    assert len(dist) == 1
    after = core.step(c, dist[0])
    assert after["r1:8"] == 1


def test_serialization_round_trip(mod11, tmp_path):
    path = tmp_path / "mod11.json"
    core.to_file(mod11, path)
    back = core.from_file(path)
    assert back.delta == mod11.delta
    assert back.states == mod11.states and back.helpers == mod11.helpers
    assert back.output == mod11.output
    assert core.to_json(back) == core.to_json(mod11)


def test_load_rejects_arity_mismatch(tmp_path):
    doc = {"states": ["a", "b"], "inputs": ["a"], "helpers": {},
           "transitions": [{"lhs": {"a": 2}, "rhs": {"b": 1}}],
           "output": {"kind": "consensus", "q0": ["a"], "q1": ["b"]}}
    with pytest.raises(ValueError):
        core.from_json(json.dumps(doc))
    with pytest.raises(ValueError):
        core.from_json(json.dumps({"states": ["a"]}))


def test_toy_fixture_validates(toy):
    assert core.validate(toy) == []
    assert toy.inputs == ("q1",)


@given(st.integers(0, 10**6))
def test_enabled_and_step_agree_with_naive(seed):
    rng = random.Random(seed)
    p = synth.compile(qfpa.parse("x - 2y >= 1 || x = 2 mod 5"))
    c = Configuration({q: rng.choice([0, 0, 1, 2, 4]) for q in p.states})
    got = sorted(core.enabled(p, c), key=lambda t: t.lhs)
    assert got == naive_enabled(p, c)
    for t in got:
        nxt = core.step(c, t)
        assert nxt.n == c.n
        assert all(k >= 0 for _, k in nxt.items())


def _value(c):
    return sum(int(q) * k for q, k in c.items())


@pytest.mark.parametrize("theta", [2, 3, 11, 19])
def test_remainder_value_invariant_on_random_runs(theta):
    p = synth.remainder_sub(theta)
    rng = random.Random(theta)
    for _ in range(30):
        c = Configuration({q: rng.randint(0, 5) for q in p.states})
        v = _value(c) % theta
        for _ in range(50):
            ts = core.enabled(p, c)
            if not ts:
                break
            c = core.step(c, rng.choice(ts))
            assert _value(c) % theta == v


@pytest.mark.parametrize("c0,d", [(5, 4), (-3, 3), (0, 2)])
def test_threshold_value_invariant_on_random_runs(c0, d):
    p = synth.threshold_sub(c0, d)
    rng = random.Random(d)
    for _ in range(30):
        c = Configuration({q: rng.randint(0, 4) for q in p.states})
        v = _value(c)
        for _ in range(50):
            ts = core.enabled(p, c)
            if not ts:
                break
            c = core.step(c, rng.choice(ts))
            assert _value(c) == v
