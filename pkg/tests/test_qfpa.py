import itertools
import random

import pytest
from hypothesis import given, strategies as st

from popcomp import qfpa
from popcomp.qfpa import And, Not, Or, Remainder, Threshold


def test_parse_remainder_atom():
    p = qfpa.parse("8x + 2y + z = 4 mod 11")
    assert p.variables == ("x", "y", "z")
    assert p.root == Remainder((8, 2, 1), 11, 4)


def test_parse_threshold_atom():
    p = qfpa.parse("-2x + y >= 5")
    assert p.root == Threshold((-2, 1), 5)


def test_parse_normalises_remainder():
    p = qfpa.parse("7x - 2y = 11 mod 7")
    assert p.root == Remainder((0, 5), 7, 4)


def test_parse_connectives_and_precedence():
    p = qfpa.parse("x >= 1 || !(y >= 2) && x = 0 mod 2")
    assert isinstance(p.root, Or)
    assert isinstance(p.root.children[1], And)
    assert isinstance(p.root.children[1].children[0], Not)


def test_parse_le_becomes_ge():
    assert qfpa.parse("2x <= 3").root == Threshold((-2,), -3)


def test_parse_star_optional():
    assert qfpa.parse("3*x >= 1").root == qfpa.parse("3x >= 1").root


@pytest.mark.parametrize("text,pos", [("x >= ", 5), ("x >= 1 &&", 9), ("x # 1", 2)])
def test_parse_error_positions(text, pos):
    with pytest.raises(qfpa.ParseError) as e:
        qfpa.parse(text)
    assert e.value.pos == pos


def test_parse_rejects_zero_modulus():
    with pytest.raises(qfpa.ParseError):
        qfpa.parse("x = 1 mod 0")


def test_parse_rejects_repeated_variable_in_atom():
    with pytest.raises(qfpa.ParseError):
        qfpa.parse("x + x >= 1")


def test_eval_examples():
    assert qfpa.evaluate(qfpa.parse("8x+2y+z = 4 mod 11"), {"x": 0, "y": 2, "z": 0})
    assert qfpa.evaluate(qfpa.parse("-2x+y >= 5"), {"x": 0, "y": 5})
    two_atom = qfpa.parse("8x + 5y = 4 mod 11 || -2x + y >= 5")
    assert not qfpa.evaluate(two_atom, {"x": 1, "y": 3})


def test_eval_domain_mismatch():
    p = qfpa.parse("x >= 1")
    with pytest.raises(ValueError):
        qfpa.evaluate(p, {"y": 1})
    with pytest.raises(ValueError):
        qfpa.evaluate(p, {"x": -1})


def test_eval_large_integers():
    p = qfpa.parse("3x - 5y >= 1")
    big = 10**30
    assert qfpa.evaluate(p, {"x": 2 * big, "y": big})


def test_double_examples():
    d = qfpa.double(qfpa.parse("x - y >= 0"))
    assert d.variables == ("x", "y", "x'", "y'")
    assert d.root == Threshold((1, -1, 2, -2), 0)
    d = qfpa.double(qfpa.parse("x = 1 mod 3"))
    assert d.root == Remainder((1, 2), 3, 1)


def test_double_renormalises():
    d = qfpa.double(qfpa.parse("2x = 1 mod 3"))
    assert d.root == Remainder((2, 1), 3, 1)


def test_bin_decompose_examples():
    assert qfpa.bin_decompose(-13) == [-8, -4, -1]
    assert sorted(qfpa.bin_decompose(10)) == [2, 8]
    assert qfpa.bin_decompose(0) == []


def test_size_bits_examples():
    assert qfpa.size_bits(qfpa.parse("x >= 1")) == 3
    sizes = [qfpa.size_bits(qfpa.parse(f"x >= {2 ** k}")) for k in range(1, 20)]
    assert all(b - a == 1 for a, b in zip(sizes, sizes[1:]))


def test_json_round_trip():
    p = qfpa.parse("8x + 5y = 4 mod 11 || !(-2x + y >= 5)")
    assert qfpa.from_json(qfpa.to_json(p)) == p


# ---------------------------------------------------------------- properties

coef = st.integers(-9, 9)


@st.composite
def predicates(draw):
    nv = draw(st.integers(1, 3))
    variables = tuple("xyz"[:nv])

    def atom():
        coeffs = tuple(draw(st.lists(coef, min_size=nv, max_size=nv)))
        if draw(st.booleans()):
            return Threshold(coeffs, draw(st.integers(-20, 20)))
        theta = draw(st.integers(2, 13))
        return qfpa.normalize_remainder(coeffs, theta, draw(st.integers(0, 30)))

    def node(depth):
        kind = draw(st.integers(0, 3 if depth < 2 else 0))
        if kind == 0:
            return atom()
        if kind == 1:
            return Not(node(depth + 1))
        kids = tuple(node(depth + 1) for _ in range(draw(st.integers(2, 3))))
        return And(kids) if kind == 2 else Or(kids)

    return qfpa.Predicate(variables, node(0))


@given(predicates())
def test_print_parse_round_trip(p):
    assert qfpa.parse(qfpa.to_text(p)) == p


@given(predicates(), st.lists(st.integers(0, 40), min_size=3, max_size=3),
       st.lists(st.integers(0, 20), min_size=3, max_size=3))
def test_double_agrees_on_splits(p, xs, primes):
    d = qfpa.double(p)
    n = len(p.variables)
    x = dict(zip(p.variables, xs))
    zero = dict(x, **{v: 0 for v in d.variables[n:]})
    assert qfpa.evaluate(d, zero) == qfpa.evaluate(p, x)
    # any split x_i = u_i + 2 u_i'
    split = {}
    for v, vp, k, u in zip(p.variables, d.variables[n:], xs, primes):
        up = min(u, k // 2)
        split[v], split[vp] = k - 2 * up, up
    assert qfpa.evaluate(d, split) == qfpa.evaluate(p, x)


@given(st.lists(st.integers(-50, 50), min_size=1, max_size=3), st.integers(1, 40), st.integers(-100, 100))
def test_normalize_remainder_preserves_eval(coeffs, theta, c):
    raw = Remainder(tuple(coeffs), theta, c)
    norm = qfpa.normalize_remainder(coeffs, theta, c)
    assert all(0 <= a < theta for a in norm.coeffs) and 0 <= norm.c < theta
    rng = random.Random(sum(coeffs) + theta + c)
    for _ in range(1000):
        xs = tuple(rng.randint(0, 10**6) for _ in coeffs)
        lin = sum(a * x for a, x in zip(raw.coeffs, xs))
        assert ((lin - raw.c) % theta == 0) == qfpa.eval_node(norm, xs)


@given(st.integers(-10**6, 10**6))
def test_bin_decompose_properties(x):
    parts = qfpa.bin_decompose(x)
    assert sum(parts) == x
    assert len(set(abs(v) for v in parts)) == len(parts)
    assert all(v * x > 0 and abs(v) & (abs(v) - 1) == 0 for v in parts)
    assert len(parts) <= max(1, (abs(x)).bit_length())


def test_size_bits_monotone_in_coefficients():
    for a, b in itertools.combinations(range(1, 64), 2):
        assert qfpa.size_bits(qfpa.parse(f"{a}x >= 1")) <= qfpa.size_bits(qfpa.parse(f"{b}x >= 1"))
