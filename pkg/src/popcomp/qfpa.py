"""Quantifier-free Presburger predicates: parsing, normalisation, evaluation.

A predicate is a boolean combination of two kinds of atoms over a shared,
ordered list of variables:

* threshold atoms  ``a_1 x_1 + ... + a_v x_v >= c``
* remainder atoms  ``a_1 x_1 + ... + a_v x_v = c mod theta``

Surface grammar::

    expr    := disj
    disj    := conj ('||' conj)*
    conj    := unary ('&&' unary)*
    unary   := '!' unary | '(' expr ')' | atom
    atom    := linear ('>=' | '<=') INT
             | linear '=' INT 'mod' INT
    linear  := ['+'|'-'] term (('+'|'-') term)*
    term    := INT ['*'] VAR | VAR

Variables are identifiers (letters, digits, ``_`` and ``'``), ordered by
first appearance.  ``<=`` atoms are rewritten to ``>=`` by negating both
sides; remainder atoms are reduced into ``[0, theta)``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Mapping, Union


class ParseError(ValueError):
    """Syntax error carrying the character offset of the problem."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} at position {pos}")
        self.pos = pos


@dataclass(frozen=True)
class Threshold:
    coeffs: tuple[int, ...]
    c: int


@dataclass(frozen=True)
class Remainder:
    coeffs: tuple[int, ...]
    theta: int
    c: int


@dataclass(frozen=True)
class Const:
    value: bool


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Not:
    child: "Node"


Node = Union[Threshold, Remainder, Const, And, Or, Not]
Atom = Union[Threshold, Remainder]


@dataclass(frozen=True)
class Predicate:
    variables: tuple[str, ...]
    root: Node

    def atoms(self) -> list[Atom]:
        """Atoms in depth-first, left-to-right order (duplicates kept)."""
        out: list[Atom] = []

        def walk(node: Node) -> None:
            if isinstance(node, (Threshold, Remainder)):
                out.append(node)
            elif isinstance(node, (And, Or)):
                for ch in node.children:
                    walk(ch)
            elif isinstance(node, Not):
                walk(node.child)

        walk(self.root)
        return out

    def __str__(self) -> str:
        return to_text(self)


def normalize_remainder(coeffs, theta: int, c: int) -> Remainder:
    if theta <= 0:
        raise ValueError(f"modulus must be positive, got {theta}")
    return Remainder(tuple(a % theta for a in coeffs), theta, c % theta)


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<var>[A-Za-z_][A-Za-z0-9_']*)|"
    r"(?P<op>>=|<=|&&|\|\||[-+*=!()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        group = m.lastgroup
        val = m.group(group)
        kind = "mod" if group == "var" and val == "mod" else group
        toks.append((kind, val, m.start(group)))
        pos = m.end()
    toks.append(("end", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0
        self.order: list[str] = []

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.i]

    def take(self, kind: str, val: str | None = None) -> tuple[str, str, int]:
        tok = self.peek()
        if tok[0] != kind or (val is not None and tok[1] != val):
            want = val if val is not None else kind
            got = tok[1] if tok[0] != "end" else "end of input"
            raise ParseError(f"expected {want!r}, found {got!r}", tok[2])
        self.i += 1
        return tok

    def at(self, kind: str, val: str | None = None) -> bool:
        tok = self.peek()
        return tok[0] == kind and (val is None or tok[1] == val)

    def parse(self):
        node = self.disj()
        self.take("end")
        return node

    def disj(self):
        kids = [self.conj()]
        while self.at("op", "||"):
            self.i += 1
            kids.append(self.conj())
        return kids[0] if len(kids) == 1 else ("or", kids)

    def conj(self):
        kids = [self.unary()]
        while self.at("op", "&&"):
            self.i += 1
            kids.append(self.unary())
        return kids[0] if len(kids) == 1 else ("and", kids)

    def unary(self):
        if self.at("op", "!"):
            self.i += 1
            return ("not", self.unary())
        if self.at("op", "("):
            self.i += 1
            node = self.disj()
            self.take("op", ")")
            return node
        return self.atom()

    def integer(self) -> int:
        sign = 1
        if self.at("op", "-"):
            self.i += 1
            sign = -1
        elif self.at("op", "+"):
            self.i += 1
        return sign * int(self.take("int")[1])

    def atom(self):
        start = self.peek()[2]
        coeffs = self.linear()
        tok = self.peek()
        if self.at("op", ">=") or self.at("op", "<="):
            self.i += 1
            c = self.integer()
            if tok[1] == "<=":
                coeffs = {v: -a for v, a in coeffs.items()}
                c = -c
            return ("thr", coeffs, c)
        if self.at("op", "="):
            self.i += 1
            c = self.integer()
            self.take("mod")
            mtok = self.peek()
            theta = self.integer()
            if theta <= 0:
                raise ParseError(f"modulus must be positive, got {theta}", mtok[2])
            return ("rem", coeffs, theta, c)
        got = tok[1] if tok[0] != "end" else "end of input"
        raise ParseError(f"expected '>=', '<=' or '=' after linear term starting at {start}, found {got!r}", tok[2])

    def linear(self) -> dict[str, int]:
        coeffs: dict[str, int] = {}
        first = True
        while True:
            sign = 1
            if self.at("op", "-") or self.at("op", "+"):
                sign = -1 if self.peek()[1] == "-" else 1
                self.i += 1
            elif not first:
                break
            first = False
            tok = self.peek()
            if tok[0] == "int":
                self.i += 1
                k = int(tok[1])
                if self.at("op", "*"):
                    self.i += 1
                if not self.at("var"):
                    raise ParseError("constant terms are not allowed on the left-hand side", tok[2])
                var_tok = self.take("var")
            elif tok[0] == "var":
                k = 1
                var_tok = self.take("var")
            else:
                got = tok[1] if tok[0] != "end" else "end of input"
                raise ParseError(f"expected a term, found {got!r}", tok[2])
            name = var_tok[1]
            if name in coeffs:
                raise ParseError(f"variable {name!r} declared twice in one atom", var_tok[2])
            coeffs[name] = sign * k
            if name not in self.order:
                self.order.append(name)
        return coeffs


def parse(text: str) -> Predicate:
    """Parse a formula; raises ParseError with a character offset."""
    p = _Parser(text)
    raw = p.parse()
    variables = tuple(p.order)
    index = {v: i for i, v in enumerate(variables)}

    def build(r) -> Node:
        tag = r[0]
        if tag in ("thr", "rem"):
            vec = [0] * len(variables)
            for v, a in r[1].items():
                vec[index[v]] = a
            if tag == "thr":
                return Threshold(tuple(vec), r[2])
            return normalize_remainder(vec, r[2], r[3])
        if tag == "not":
            return Not(build(r[1]))
        kids = tuple(build(k) for k in r[1])
        return And(kids) if tag == "and" else Or(kids)

    return Predicate(variables, build(raw))


# ------------------------------------------------------------- evaluation

def _linear(coeffs, values) -> int:
    return sum(a * x for a, x in zip(coeffs, values))


def eval_node(node: Node, values: tuple[int, ...]) -> bool:
    if isinstance(node, Threshold):
        return _linear(node.coeffs, values) >= node.c
    if isinstance(node, Remainder):
        return _linear(node.coeffs, values) % node.theta == node.c
    if isinstance(node, Const):
        return node.value
    if isinstance(node, And):
        return all(eval_node(ch, values) for ch in node.children)
    if isinstance(node, Or):
        return any(eval_node(ch, values) for ch in node.children)
    if isinstance(node, Not):
        return not eval_node(node.child, values)
    raise TypeError(node)


def evaluate(p: Predicate, x: Mapping[str, int]) -> bool:
    """Exact truth value of ``p`` at the input vector ``x``."""
    if set(x) != set(p.variables):
        raise ValueError(f"input variables {sorted(x)} do not match {list(p.variables)}")
    values = tuple(x[v] for v in p.variables)
    if any(v < 0 for v in values):
        raise ValueError("input counts must be non-negative")
    return eval_node(p.root, values)


# ----------------------------------------------------------- transforms

def primed_name(var: str, taken) -> str:
    name = var + "'"
    while name in taken:
        name += "'"
    return name


def double(p: Predicate) -> Predicate:
    """Replace every x_i by x_i + 2 x_i' (primed copies appended)."""
    taken = set(p.variables)
    primes = []
    for v in p.variables:
        name = primed_name(v, taken)
        taken.add(name)
        primes.append(name)

    def walk(node: Node) -> Node:
        if isinstance(node, Threshold):
            return Threshold(node.coeffs + tuple(2 * a for a in node.coeffs), node.c)
        if isinstance(node, Remainder):
            return normalize_remainder(node.coeffs + tuple(2 * a for a in node.coeffs), node.theta, node.c)
        if isinstance(node, And):
            return And(tuple(walk(ch) for ch in node.children))
        if isinstance(node, Or):
            return Or(tuple(walk(ch) for ch in node.children))
        if isinstance(node, Not):
            return Not(walk(node.child))
        return node

    return Predicate(p.variables + tuple(primes), walk(p.root))


def _bits(k: int) -> int:
    return max(1, abs(k).bit_length()) + (1 if k < 0 else 0)


def size_bits(p: Predicate) -> int:
    """Proxy for formula length in bits.

    Per atom: binary length of every coefficient, of c and of theta (one extra
    bit for a negative sign), plus one per variable with a nonzero
    coefficient.  Plus one per boolean connective (an n-ary and/or counts
    n - 1, a negation counts 1).  Example: ``x >= 1`` has size 3.
    """
    total = 0

    def walk(node: Node) -> None:
        nonlocal total
        if isinstance(node, (Threshold, Remainder)):
            nz = [a for a in node.coeffs if a != 0]
            total += sum(_bits(a) for a in nz) + _bits(node.c) + len(nz)
            if isinstance(node, Remainder):
                total += _bits(node.theta)
        elif isinstance(node, (And, Or)):
            total += len(node.children) - 1
            for ch in node.children:
                walk(ch)
        elif isinstance(node, Not):
            total += 1
            walk(node.child)
        else:
            total += 1

    walk(p.root)
    return total


def bin_decompose(x: int) -> list[int]:
    """Signed powers of two summing to x, largest magnitude first.

    >>> bin_decompose(-13)
    [-8, -4, -1]
    """
    sign = -1 if x < 0 else 1
    m = abs(x)
    return [sign * (1 << i) for i in reversed(range(m.bit_length())) if m >> i & 1]


# -------------------------------------------------------- printing / json

def _linear_text(variables, coeffs, keep_zeros: bool) -> str:
    parts = []
    for v, a in zip(variables, coeffs):
        if a == 0 and not keep_zeros:
            continue
        mag = "" if abs(a) == 1 else f"{abs(a)}"
        if not parts:
            parts.append(("-" if a < 0 else "") + mag + v)
        else:
            parts.append(("- " if a < 0 else "+ ") + mag + v)
    if not parts:
        parts.append(f"0{variables[0]}")
    return " ".join(parts)


def to_text(p: Predicate) -> str:
    """Render a predicate in the surface grammar.

    The first atom lists every variable (zeros included) so that reparsing
    recovers the same variable order and hence an equal AST.
    """
    first = [True]

    def atom_lhs(node) -> str:
        text = _linear_text(p.variables, node.coeffs, first[0])
        first[0] = False
        return text

    def walk(node: Node, top: bool) -> str:
        if isinstance(node, Threshold):
            return f"{atom_lhs(node)} >= {node.c}"
        if isinstance(node, Remainder):
            return f"{atom_lhs(node)} = {node.c} mod {node.theta}"
        if isinstance(node, Not):
            return "!" + walk(node.child, False)
        if isinstance(node, (And, Or)):
            sep = " && " if isinstance(node, And) else " || "
            body = sep.join(walk(ch, False) for ch in node.children)
            return body if top else f"({body})"
        raise ValueError("constants have no surface syntax")

    return walk(p.root, True)


def node_to_json(node: Node) -> dict:
    if isinstance(node, Threshold):
        return {"threshold": {"coeffs": list(node.coeffs), "c": node.c}}
    if isinstance(node, Remainder):
        return {"remainder": {"coeffs": list(node.coeffs), "theta": node.theta, "c": node.c}}
    if isinstance(node, Const):
        return {"const": node.value}
    if isinstance(node, And):
        return {"and": [node_to_json(ch) for ch in node.children]}
    if isinstance(node, Or):
        return {"or": [node_to_json(ch) for ch in node.children]}
    return {"not": node_to_json(node.child)}


def node_from_json(doc: dict) -> Node:
    (key, val), = doc.items()
    if key == "threshold":
        return Threshold(tuple(val["coeffs"]), val["c"])
    if key == "remainder":
        return normalize_remainder(val["coeffs"], val["theta"], val["c"])
    if key == "const":
        return Const(bool(val))
    if key == "and":
        return And(tuple(node_from_json(v) for v in val))
    if key == "or":
        return Or(tuple(node_from_json(v) for v in val))
    if key == "not":
        return Not(node_from_json(val))
    raise ValueError(f"unknown predicate node {key!r}")


def to_json(p: Predicate) -> str:
    return json.dumps({"variables": list(p.variables), "formula": node_to_json(p.root)})


def from_json(text: str) -> Predicate:
    doc = json.loads(text)
    p = Predicate(tuple(doc["variables"]), node_from_json(doc["formula"]))
    for atom in p.atoms():
        if len(atom.coeffs) != len(p.variables):
            raise ValueError("atom arity does not match the variable list")
    return p
