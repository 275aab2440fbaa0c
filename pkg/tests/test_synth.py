import pytest

from popcomp import core, qfpa, synth, verify
from popcomp.core import ms

from conftest import FAMILY

TWO_ATOM = "8x + 5y = 4 mod 11 || -2x + y >= 5"


def test_remainder_sub_theta11():
    p = synth.remainder_sub(11, 4)
    assert set(p.states) == {"0", "1", "2", "4", "8", "16"}
    assert p.helpers == {"0": 12}
    assert p.delta[ms(["16", "0"])] == ms(["4", "1"])
    assert p.delta[ms(["16"] * 4)] == ms(["8", "1", "0", "0"])
    combine = [l for l in p.delta if len(set(l)) == 1 and len(l) == 2]
    assert len(combine) == 4
    assert p.n_transitions() == 6


def test_remainder_sub_theta19_modulo():
    p = synth.remainder_sub(19)
    assert p.delta[ms(["32", "0", "0"])] == ms(["8", "4", "1"])


def test_remainder_sub_theta2():
    p = synth.remainder_sub(2)
    assert p.delta == {ms(["1", "1"]): ms(["0", "2"]), ms(["2", "0"]): ms(["0", "0"])}
    assert p.helpers == {"0": 3}


def test_remainder_sub_rejects_small_theta():
    with pytest.raises(ValueError):
        synth.remainder_sub(1)


def test_threshold_sub_c5_d4():
    p = synth.threshold_sub(5, 4)
    assert len(p.states) == 11
    assert p.helpers == {"0": 4}
    kinds = {"combine": 0, "cancel": 0, "second": 0}
    for l, r in p.delta.items():
        if l[0] == l[1]:
            kinds["combine"] += 1
        elif set(r) == {"0"}:
            kinds["cancel"] += 1
        else:
            kinds["second"] += 1
    assert kinds == {"combine": 8, "cancel": 5, "second": 2}
    assert p.delta[ms(["16", "-8"])] == ms(["0", "8"])
    assert p.delta[ms(["-16", "8"])] == ms(["0", "-8"])


def test_threshold_sub_rejects_low_degree():
    with pytest.raises(ValueError):
        synth.threshold_sub(100, 2)


def test_threshold_non_well_supported_witness_is_not_terminal():
    p = synth.threshold_sub(5, 4)
    c = core.Configuration({"8": 2, "-4": 1, "-2": 1})
    assert sum(int(q) * k for q, k in c.items()) >= 5
    assert core.output(p, c) == 0
    assert any(t.lhs == ("8", "8") for t in core.enabled(p, c))


def _canonical_conditions(c: core.Configuration, d: int) -> bool:
    """Terminal threshold configurations: no doubled nonzero state, no opposite
    pair, and the two largest magnitudes do not have opposite signs."""
    nz = {int(q) for q, k in c.items() if k and q != "0"}
    if any(c[q] > 1 for q in c.support() if q != "0"):
        return False
    if any(-v in nz for v in nz):
        return False
    top = sorted(nz, key=abs, reverse=True)[:2]
    return not (len(top) == 2 and abs(top[0]) == 1 << d and top[0] * top[1] < 0)


def test_threshold_terminal_configurations_are_canonical():
    p = synth.compile(qfpa.parse("x - y >= 1"), {0: 3})
    for x in verify.inputs_up_to(["x", "y"], 6):
        g = verify.explore(p, core.initial(p, synth.input_config(p, x)))
        for i in g.terminal:
            c = g.config(i)
            sub = core.Configuration({q.split(":")[1]: k for q, k in c.items() if q.startswith("t")})
            assert _canonical_conditions(sub, 3)


def test_two_atom_compile_with_override():
    p = synth.compile(qfpa.parse(TWO_ATOM), {1: 4})
    assert p.delta[ms(["X:x", "0"])] == ms(["r1:8", "t2:-2"])
    assert p.delta[ms(["X:y", "0", "0"])] == ms(["r1:1", "r1:4", "t2:1"])
    assert p.helper_count() == 18
    assert p.meta["plan"]["L"] == 3
    assert core.validate(p) == []


def test_two_atom_default_degree():
    atom = qfpa.parse("-2x + y >= 5").root
    assert synth.default_threshold_degree(atom, 2) == 8
    p = synth.compile(qfpa.parse(TWO_ATOM))
    assert p.meta["plan"]["atoms"][1]["d"] == 8


def test_single_remainder_atom():
    p = synth.compile(qfpa.parse("x = 1 mod 3"))
    assert p.delta[ms(["X:x", "0"])] == ms(["r1:1", "0"])
    assert p.helper_count() == 7


def test_zero_coefficient_variable_drains():
    p = synth.compile(qfpa.parse("0x + y >= 1"))
    assert p.delta[ms(["X:x", "0"])] == ("0", "0")


def test_compile_rejects_constant_predicate():
    with pytest.raises(ValueError):
        synth.compile(qfpa.Predicate(("x",), qfpa.Const(True)))


def test_two_atom_potential():
    p = synth.compile(qfpa.parse(TWO_ATOM), {1: 4})
    w = synth.potential(p)
    assert w["0"] == 0
    assert w["r1:8"] == 9
    assert w["X:x"] == 11
    assert all(w[q] == 1 for q in p.states if q.startswith("t2:"))
    assert synth.check_potential(p, w) is None


def test_check_potential_failures(toy):
    p = synth.remainder_sub(11)
    assert synth.check_potential(p, {q: 0 for q in p.states}) is not None
    bad = synth.check_potential(toy, {"q1": 1, "q2": 0})
    assert bad is not None and bad.lhs == ("q1", "q2")


@pytest.mark.parametrize("text", FAMILY + ["x = 1 mod 2", "5x - 3y + z >= -4", "!(x >= 3) && y = 0 mod 4"])
def test_compiled_computers_are_valid_and_certified(text):
    p = synth.compile(qfpa.parse(text))
    assert core.validate(p) == []
    assert synth.check_potential(p, synth.potential(p)) is None
    plan = p.meta["plan"]
    assert p.helper_count() == max(plan["L"], 2) - 1 + sum(
        (3 * a["d"] if a["kind"] == "remainder" else a["d"]) for a in plan["atoms"])


@pytest.mark.parametrize("theta", [2, 3, 5, 11, 19, 33])
def test_remainder_transitions_preserve_value_mod_theta(theta):
    p = synth.remainder_sub(theta)
    for l, r in p.delta.items():
        assert (sum(map(int, l)) - sum(map(int, r))) % theta == 0


@pytest.mark.parametrize("c,d", [(5, 4), (-7, 4), (0, 2), (100, 8)])
def test_threshold_transitions_preserve_value(c, d):
    p = synth.threshold_sub(c, d)
    for l, r in p.delta.items():
        assert sum(map(int, l)) == sum(map(int, r))


@pytest.mark.parametrize("text", ["x >= 2", "2x + y = 3 mod 5", "x - 2y >= -1"])
def test_terminal_configurations_drain_inputs_and_decide(text):
    pred = qfpa.parse(text)
    p = synth.compile(pred)
    for x in verify.inputs_up_to(pred.variables, 5):
        g = verify.explore(p, core.initial(p, synth.input_config(p, x)))
        want = int(qfpa.evaluate(pred, x))
        for i in g.terminal:
            c = g.config(i)
            assert not any(c[q] for q in p.inputs)
            assert core.output(p, c) == want
