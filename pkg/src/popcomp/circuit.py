"""NAND-only circuits over state-presence bits.

A circuit reads one bit per state label (is the state populated?) and
computes a single output bit through a topologically ordered list of NAND
gates.  Circuits are built through :class:`Builder`, which folds constants
and shares structurally identical gates.

A reference is either ``("in", label)``, ``("g", index)`` or, only while
building or for a circuit that folded to a constant, ``("const", bit)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

Ref = tuple

TRUE: Ref = ("const", 1)
FALSE: Ref = ("const", 0)


@dataclass(frozen=True)
class Circuit:
    inputs: tuple[str, ...]
    gates: tuple[tuple[Ref, Ref], ...]
    out: Ref

    @property
    def is_constant(self) -> bool:
        return self.out[0] == "const"

    def size(self) -> int:
        return len(self.gates)

    def used_inputs(self) -> list[str]:
        """Input labels actually read by some gate, in first-use order."""
        seen: dict[str, None] = {}
        for a, b in self.gates:
            for r in (a, b):
                if r[0] == "in":
                    seen.setdefault(r[1], None)
        if self.out[0] == "in":
            seen.setdefault(self.out[1], None)
        return list(seen)

    def gate_values(self, support: Iterable[str]) -> list[int]:
        present = set(support)
        vals: list[int] = []

        def get(r: Ref) -> int:
            if r[0] == "in":
                return 1 if r[1] in present else 0
            if r[0] == "g":
                return vals[r[1]]
            return r[1]

        for a, b in self.gates:
            vals.append(0 if get(a) and get(b) else 1)
        return vals

    def eval(self, support: Iterable[str]) -> int:
        present = set(support)
        vals = self.gate_values(present)
        kind, x = self.out
        if kind == "g":
            return vals[x]
        if kind == "in":
            return 1 if x in present else 0
        return x

    def materialize(self, anchor: str) -> "Circuit":
        """Return an equivalent circuit whose output is a gate.

        A constant output becomes a tautology gadget on ``anchor``
        (``NAND(a, NAND(a, a))`` is always 1); a bare input is wrapped in two
        inverters.
        """
        if self.out[0] == "g":
            return self
        b = Builder(self.inputs if anchor in self.inputs else self.inputs + (anchor,))
        sub = b.embed(self)
        if sub[0] == "const":
            a = b.input(anchor)
            one = b.raw_nand(a, b.raw_nand(a, a))
            out = one if sub[1] == 1 else b.raw_nand(one, one)
        else:
            inv = b.raw_nand(sub, sub)
            out = b.raw_nand(inv, inv)
        return b.finish(out)

    def to_dict(self) -> dict:
        return {
            "inputs": list(self.inputs),
            "gates": [{"a": _ref_json(a), "b": _ref_json(b)} for a, b in self.gates],
            "out": _ref_json(self.out),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @staticmethod
    def from_dict(doc: dict) -> "Circuit":
        gates = tuple((_ref_load(g["a"]), _ref_load(g["b"])) for g in doc["gates"])
        c = Circuit(tuple(doc["inputs"]), gates, _ref_load(doc["out"]))
        problems = check_structure(c)
        if problems:
            raise ValueError("; ".join(problems))
        return c

    @staticmethod
    def from_json(text: str) -> "Circuit":
        return Circuit.from_dict(json.loads(text))


def _ref_json(r: Ref) -> dict:
    if r[0] == "in":
        return {"in": r[1]}
    if r[0] == "g":
        return {"g": r[1]}
    return {"const": r[1]}


def _ref_load(d: dict) -> Ref:
    (k, v), = d.items()
    if k not in ("in", "g", "const"):
        raise ValueError(f"bad circuit reference {d!r}")
    return (k, v)


def check_structure(c: Circuit) -> list[str]:
    """Structural problems: forward references, unknown inputs, stray constants."""
    problems = []
    inputs = set(c.inputs)
    for i, (a, b) in enumerate(c.gates):
        for r in (a, b):
            if r[0] == "g" and not 0 <= r[1] < i:
                problems.append(f"gate {i} references gate {r[1]} that is not earlier")
            elif r[0] == "in" and r[1] not in inputs:
                problems.append(f"gate {i} reads undeclared input {r[1]!r}")
            elif r[0] == "const":
                problems.append(f"gate {i} has a constant operand")
    if c.out[0] == "g" and not 0 <= c.out[1] < len(c.gates):
        problems.append("output references a missing gate")
    if c.out[0] == "in" and c.out[1] not in inputs:
        problems.append("output reads an undeclared input")
    return problems


class Builder:
    """Incremental NAND netlist with constant folding and hash-consing."""

    def __init__(self, inputs: Sequence[str] = ()):
        self.inputs: list[str] = list(dict.fromkeys(inputs))
        self.gates: list[tuple[Ref, Ref]] = []
        self._memo: dict[tuple[Ref, Ref], Ref] = {}

    def input(self, label: str) -> Ref:
        if label not in self.inputs:
            self.inputs.append(label)
        return ("in", label)

    def raw_nand(self, a: Ref, b: Ref) -> Ref:
        key = (a, b) if a <= b else (b, a)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        self.gates.append(key)
        ref = ("g", len(self.gates) - 1)
        self._memo[key] = ref
        return ref

    def nand(self, a: Ref, b: Ref) -> Ref:
        if a == FALSE or b == FALSE:
            return TRUE
        if a == TRUE and b == TRUE:
            return FALSE
        if a == TRUE:
            return self.raw_nand(b, b)
        if b == TRUE:
            return self.raw_nand(a, a)
        return self.raw_nand(a, b)

    def not_(self, a: Ref) -> Ref:
        return self.nand(a, a)

    def and_(self, a: Ref, b: Ref) -> Ref:
        return self.not_(self.nand(a, b))

    def or_(self, a: Ref, b: Ref) -> Ref:
        return self.nand(self.not_(a), self.not_(b))

    def xor(self, a: Ref, b: Ref) -> Ref:
        t = self.nand(a, b)
        return self.nand(self.nand(a, t), self.nand(b, t))

    def all_(self, refs: Iterable[Ref]) -> Ref:
        acc = TRUE
        for r in refs:
            if r == FALSE or acc == FALSE:
                acc = FALSE
            elif acc == TRUE:
                acc = r
            elif r != TRUE:
                acc = self.and_(acc, r)
        return acc

    def any_(self, refs: Iterable[Ref]) -> Ref:
        acc = FALSE
        for r in refs:
            if r == TRUE or acc == TRUE:
                acc = TRUE
            elif acc == FALSE:
                acc = r
            elif r != FALSE:
                acc = self.or_(acc, r)
        return acc

    def full_adder(self, a: Ref, b: Ref, cin: Ref) -> tuple[Ref, Ref]:
        """Nine-NAND full adder (fewer after folding); returns (sum, carry)."""
        t1 = self.nand(a, b)
        h = self.nand(self.nand(a, t1), self.nand(b, t1))
        t2 = self.nand(h, cin)
        s = self.nand(self.nand(h, t2), self.nand(cin, t2))
        carry = self.nand(t1, t2)
        return s, carry

    def embed(self, c: Circuit) -> Ref:
        """Copy ``c`` into this builder and return the ref of its output."""
        for label in c.inputs:
            self.input(label)
        mapped: list[Ref] = []

        def m(r: Ref) -> Ref:
            return mapped[r[1]] if r[0] == "g" else r

        for a, b in c.gates:
            mapped.append(self.nand(m(a), m(b)))
        return m(c.out)

    def finish(self, out: Ref) -> Circuit:
        """Freeze the netlist, dropping gates the output does not depend on."""
        if out[0] != "g":
            return Circuit(tuple(self.inputs), (), out)
        live = set()
        stack = [out[1]]
        while stack:
            i = stack.pop()
            if i in live:
                continue
            live.add(i)
            for r in self.gates[i]:
                if r[0] == "g":
                    stack.append(r[1])
        order = sorted(live)
        new_index = {old: new for new, old in enumerate(order)}

        def m(r: Ref) -> Ref:
            return ("g", new_index[r[1]]) if r[0] == "g" else r

        gates = tuple((m(a), m(b)) for a, b in (self.gates[i] for i in order))
        return Circuit(tuple(self.inputs), gates, m(out))


def power_label(i: int) -> str:
    return str(1 << i)


def build_remainder_output(d: int, theta: int, c: int,
                           label: Callable[[int], str] = power_label) -> Circuit:
    """Circuit over presence bits of 2^0..2^d accepting supports with sum = c mod theta.

    A support holds each power at most once, so its sum is the (d+1)-bit
    number whose bits are the presence bits.  The circuit ORs one equality
    comparator per value v <= 2^(d+1) - 1 with v = c (mod theta); there are at
    most five such values because theta > 2^(d-1).
    """
    if theta < 2 or d != (theta - 1).bit_length() or not 0 <= c < theta:
        raise ValueError(f"need theta >= 2, d = ceil(log2 theta), 0 <= c < theta; got d={d}, theta={theta}, c={c}")
    b = Builder([label(i) for i in range(d + 1)])
    bits = [b.input(label(i)) for i in range(d + 1)]
    nbits = [b.not_(x) for x in bits]
    terms = []
    for v in range(c, 1 << (d + 1), theta):
        terms.append(b.all_(bits[i] if v >> i & 1 else nbits[i] for i in range(d + 1)))
    return b.finish(b.any_(terms))


def signed_label(v: int) -> str:
    return str(v)


def build_threshold_output(d: int, c: int,
                           label: Callable[[int], str] = signed_label) -> Circuit:
    """Circuit over presence bits of +-2^0..+-2^d accepting supports with P - N >= c.

    P and N are the (d+1)-bit numbers formed by the positive and negative
    presence bits.  A ripple adder computes E = P + ~N = P - N + 2^(d+1) - 1
    on d+2 bits and a constant comparator checks E >= c + 2^(d+1) - 1.
    """
    if d < 1:
        raise ValueError("threshold degree must be at least 1")
    labels = [label(1 << i) for i in range(d + 1)] + [label(-(1 << i)) for i in range(d + 1)]
    b = Builder(labels)
    pos = [b.input(label(1 << i)) for i in range(d + 1)]
    neg = [b.not_(b.input(label(-(1 << i)))) for i in range(d + 1)]
    e = []
    carry = FALSE
    for i in range(d + 1):
        s, carry = b.full_adder(pos[i], neg[i], carry)
        e.append(s)
    e.append(carry)
    k = c + (1 << (d + 1)) - 1
    if k <= 0:
        return b.finish(TRUE)
    if k >= 1 << (d + 2):
        return b.finish(FALSE)
    ge = TRUE
    for i in range(d + 2):
        if k >> i & 1:
            ge = b.all_([e[i], ge])
        else:
            ge = b.any_([e[i], ge])
    return b.finish(ge)


def combine(expr, subs: Sequence[Circuit]) -> Circuit:
    """Boolean combination of sub-circuits.

    ``expr`` is a tuple tree: ``("slot", i)``, ``("and", [..])``,
    ``("or", [..])``, ``("not", e)`` or ``("const", bit)``.
    """
    inputs: list[str] = []
    for s in subs:
        inputs.extend(s.inputs)
    b = Builder(inputs)
    outs = [b.embed(s) for s in subs]

    def walk(e) -> Ref:
        tag = e[0]
        if tag == "slot":
            return outs[e[1]]
        if tag == "const":
            return TRUE if e[1] else FALSE
        if tag == "not":
            return b.not_(walk(e[1]))
        kids = [walk(k) for k in e[1]]
        return b.all_(kids) if tag == "and" else b.any_(kids)

    return b.finish(walk(expr))


def constant(value: bool) -> Circuit:
    return Circuit((), (), TRUE if value else FALSE)


def rewire(c: Circuit, f: Callable[[Builder, str], Ref]) -> Circuit:
    """Replace every input label q by the sub-circuit ``f(builder, q)``."""
    b = Builder()
    cache: dict[str, Ref] = {}

    def m(r: Ref) -> Ref:
        if r[0] == "in":
            if r[1] not in cache:
                cache[r[1]] = f(b, r[1])
            return cache[r[1]]
        return mapped[r[1]] if r[0] == "g" else r

    mapped: list[Ref] = []
    for a, bb in c.gates:
        mapped.append(b.nand(m(a), m(bb)))
    return b.finish(m(c.out))
