from fractions import Fraction

import pytest

from popcomp import circuit, core, exactlp, qfpa, synth, verify
from popcomp.core import Configuration, Consensus, make_computer

from conftest import FAMILY


def toy_graph(toy, n):
    return verify.explore(toy, Configuration({"q1": n}))


def naive_reach(p, c0):
    seen = {c0}
    todo = [c0]
    while todo:
        c = todo.pop()
        for t in core.enabled(p, c):
            d = core.step(c, t)
            if d not in seen:
                seen.add(d)
                todo.append(d)
    return seen


def test_explore_toy_two_agents(toy):
    g = toy_graph(toy, 2)
    configs = {g.config(i) for i in range(len(g.nodes))}
    assert configs == {Configuration({"q1": 2}), Configuration({"q2": 2})}
    assert [g.config(i) for i in g.terminal] == [Configuration({"q2": 2})]


def test_explore_toy_cycle(toy):
    g = toy_graph(toy, 3)
    index = {g.config(i): i for i in range(len(g.nodes))}
    a, b, c = (index[Configuration(d)] for d in ({"q1": 3}, {"q1": 1, "q2": 2}, {"q1": 2, "q2": 1}))
    assert b in {v for v, _ in g.succ[a]}
    assert c in {v for v, _ in g.succ[b]}
    assert a in {v for v, _ in g.succ[c]}
    assert not verify.check_bounded(g)
    assert verify.check_terminating_fair(g)


def test_explore_edges_are_steps(toy):
    g = toy_graph(toy, 6)
    for u, out in enumerate(g.succ):
        for v, ti in out:
            t = g.transitions[ti]
            assert core.step(g.config(u), core.Transition(*t)) == g.config(v)
    for i in g.terminal:
        assert core.enabled(toy, g.config(i)) == []


def test_explore_terminal_root():
    p = synth.remainder_sub(11)
    g = verify.explore(p, Configuration({"0": 12, "4": 1}))
    assert len(g.nodes) == 1 and g.terminal == {0}
    assert verify.check_bounded(g) and verify.check_terminating_fair(g)


@pytest.mark.parametrize("text", ["x = 1 mod 3", "2x + y = 3 mod 5", "x - y >= 0"])
def test_explore_matches_naive_reference(text):
    pred = qfpa.parse(text)
    p = synth.compile(pred)
    for x in list(verify.inputs_up_to(pred.variables, 4))[-4:]:
        c0 = core.initial(p, synth.input_config(p, x))
        g = verify.explore(p, c0)
        assert {g.config(i) for i in range(len(g.nodes))} == naive_reach(p, c0)


def test_pure_cycle_is_not_terminating():
    p = make_computer(["a", "b"], [(["a", "a"], ["b", "b"]), (["b", "b"], ["a", "a"])], ["a"],
                      Consensus(frozenset({"a"}), frozenset({"b"})))
    g = verify.explore(p, Configuration({"a": 2}))
    assert not verify.check_terminating_fair(g)
    assert not verify.check_bounded(g)


def test_truncated_graph_is_indeterminate(toy):
    g = verify.explore(toy, Configuration({"q1": 20}), cap=5)
    assert g.truncated
    with pytest.raises(verify.Indeterminate):
        verify.check_bounded(g)
    with pytest.raises(verify.Indeterminate):
        verify.check_terminating_fair(g)


def test_compiled_remainder_bounded_on_small_inputs():
    p = synth.compile(qfpa.parse("x = 1 mod 3"))
    for x in verify.inputs_up_to(["x"], 5):
        g = verify.explore(p, core.initial(p, synth.input_config(p, x)))
        assert verify.check_bounded(g)


def test_check_correct_examples():
    pred = qfpa.parse("2x + y = 3 mod 5")
    p = synth.compile(pred)
    for x in verify.inputs_up_to(pred.variables, 4):
        assert verify.check_correct(p, pred, x, helper_slack=2).ok is True
    pred = qfpa.parse("x - y >= 2")
    p = synth.compile(pred, {0: 3})
    for x in verify.inputs_up_to(pred.variables, 5):
        assert verify.check_correct(p, pred, x, helper_slack=2).ok is True


def test_check_correct_negative_control():
    pred = qfpa.parse("x = 1 mod 3")
    p = synth.compile(pred)
    wrong = circuit.rewire(circuit.build_remainder_output(2, 3, 2), lambda b, q: b.input("r1:" + q))
    bad = core.PopulationComputer(p.states, p.delta, p.inputs, core.CircuitOutput(wrong),
                                  p.helpers, p.meta)
    verdicts = [verify.check_correct(bad, pred, x) for x in verify.inputs_up_to(["x"], 4)]
    assert any(v.ok is False for v in verdicts)
    failing = next(v for v in verdicts if v.ok is False)
    assert "expected" in failing.reason


def test_check_correct_truncation_is_indeterminate():
    pred = qfpa.parse("x >= 2")
    p = synth.compile(pred)
    v = verify.check_correct(p, pred, {"x": 4}, cap=3)
    assert v.ok is None and "truncated" in v.reason


def test_helper_extras_bound():
    p = synth.remainder_sub(11)
    assert verify.helper_extras(p, 2) == [{}, {"0": 1}, {"0": 2}]


def test_synthesize_potential_toy_witness(toy):
    w = verify.synthesize_potential(toy)
    assert isinstance(w, verify.UnboundedWitness)
    assert w.check(toy)
    y = {l: v for (l, _), v in w.counts.items()}
    assert y[("q1", "q1")] * 2 == y[("q1", "q2")]
    assert set(y) == {("q1", "q1"), ("q1", "q2")}


def test_synthesize_potential_sink():
    p = make_computer(["a", "b", "c"], [(["a", "b"], ["c", "c"])], ["a", "b"],
                      Consensus(frozenset({"a", "b"}), frozenset({"c"})))
    w = verify.synthesize_potential(p)
    assert isinstance(w, dict)
    assert synth.check_potential(p, w) is None


def test_witness_check_rejects_bogus_counts(toy):
    assert not verify.UnboundedWitness({(("q1", "q1"), ("q2", "q2")): Fraction(1)}).check(toy)
    assert not verify.UnboundedWitness({}).check(toy)


@pytest.mark.parametrize("text", FAMILY)
def test_synthesized_weights_agree_with_elimination(text):
    p = synth.compile(qfpa.parse(text))
    w = verify.synthesize_potential(p)
    assert isinstance(w, dict)
    assert synth.check_potential(p, w) is None


@pytest.mark.parametrize("text", ["x = 1 mod 3", "x >= 2", "2x + y = 3 mod 5"])
def test_fourier_motzkin_route_agrees(text):
    p = synth.compile(qfpa.parse(text))
    assert verify.potential_feasible_fm(p) is True
    assert isinstance(verify.synthesize_potential(p), dict)


def test_fourier_motzkin_detects_loop(toy):
    assert verify.potential_feasible_fm(toy) is False


def test_exactlp_small_systems():
    x = exactlp.feasible_eq([[1, 1], [1, -1]], [3, 1])
    assert x == [Fraction(2), Fraction(1)]
    assert exactlp.feasible_eq([[1, 1]], [-1]) is None
    assert exactlp.feasible_leq_nonneg([[1, -1]], [-1]) is not None
    assert exactlp.fourier_motzkin([[1], [-1]], [-1, -1]) is False


def test_boundedness_agrees_with_restricted_lp(toy):
    for n in (2, 3, 4):
        g = toy_graph(toy, n)
        used = {g.transitions[ti] for out in g.succ for _, ti in out}
        delta = dict(used)
        sub = core.PopulationComputer(toy.states, delta, toy.inputs, toy.output)
        witness = isinstance(verify.synthesize_potential(sub), verify.UnboundedWitness)
        assert verify.check_bounded(g) == (not witness)


def test_diagnostics():
    p = synth.remainder_sub(11)
    c = Configuration({"1": 2, "0": 12})
    assert verify.tmin_of(("1", "1"), c) == 2
    assert verify.speed_of(p, Configuration()) == 0
    bigger = Configuration({q: c[q] + 1 for q in p.states})
    assert verify.speed_of(p, bigger) >= verify.speed_of(p, c)
    q = synth.compile(qfpa.parse("x = 1 mod 3"))
    n = 3 * q.helper_count()
    assert verify.check_well_initialised(q, Configuration({"0": n}))
    # boundary: C(I) + |H| == 2n/3
    assert verify.check_well_initialised(q, Configuration({"0": 7, "X:x": 7, "r1:1": 7}))
    assert not verify.check_well_initialised(q, Configuration({"X:x": 8}))


def test_rapid_syntactic():
    assert verify.check_rapid_syntactic(synth.compile(qfpa.parse("x = 1 mod 3")))
    out = Consensus(frozenset("pqrsuv"), frozenset())
    two_heavy = make_computer("pqrsuv", [(["q", "q"], ["p", "p"]), (["q", "p"], ["r", "r"]),
                                         (["q", "r"], ["s", "s"]), (["u", "u"], ["s", "s"]),
                                         (["u", "p"], ["s", "s"]), (["u", "r"], ["s", "s"])],
                              ["v"], out)
    assert not verify.check_rapid_syntactic(two_heavy)
    feeds = make_computer("pqv", [(["p", "q"], ["v", "q"])], ["v"], Consensus(frozenset("pqv"), frozenset()))
    assert not verify.check_rapid_syntactic(feeds)


def test_rapid_syntactic_threshold_out_degree():
    # threshold states carry combine, cancel and cancel-second transitions
    p = synth.compile(qfpa.parse("x >= 2"))
    problems = verify.rapid_syntactic_violations(p)
    assert len(problems) == 1 and "out-degree" in problems[0]
