"""Population computers: configurations, transitions, outputs, serialization.

Multisets are sorted tuples of state labels, so ``("0", "1", "1")`` is the
multiset {0, 1, 1}.  A computer maps each left-hand side to exactly one
right-hand side, which makes the transition relation deterministic by
construction.  For binary transitions the i-th agent of the (sorted) lhs
becomes the i-th agent of the rhs.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping

from .circuit import Circuit

Multiset = tuple


def ms(items: Iterable[str] | Mapping[str, int]) -> Multiset:
    """Canonical multiset: a sorted tuple."""
    if isinstance(items, Mapping):
        return tuple(sorted(q for q, k in items.items() for _ in range(k)))
    return tuple(sorted(items))


def ms_counts(m: Multiset) -> dict[str, int]:
    return dict(Counter(m))


@dataclass(frozen=True)
class Transition:
    lhs: Multiset
    rhs: Multiset

    def __str__(self) -> str:
        return f"{', '.join(self.lhs)} -> {', '.join(self.rhs)}"

    @property
    def arity(self) -> int:
        return len(self.lhs)


# ---------------------------------------------------------------- outputs

@dataclass(frozen=True)
class CircuitOutput:
    circuit: Circuit

    def __call__(self, support) -> int:
        return self.circuit.eval(support)


@dataclass(frozen=True)
class MarkedConsensus:
    q0: frozenset
    q1: frozenset

    def __call__(self, support):
        s = set(support)
        hit0, hit1 = bool(s & self.q0), bool(s & self.q1)
        if hit1 and not hit0:
            return 1
        if hit0 and not hit1:
            return 0
        return None


@dataclass(frozen=True)
class Consensus:
    q0: frozenset
    q1: frozenset

    def __call__(self, support):
        s = set(support)
        if s and s <= self.q1:
            return 1
        if s and s <= self.q0:
            return 0
        return None


Output = CircuitOutput | MarkedConsensus | Consensus


# --------------------------------------------------------- configurations

class Configuration:
    """Sparse count map over states with a cached population size."""

    __slots__ = ("_c", "n")

    def __init__(self, counts: Mapping[str, int] | Iterable[str] = ()):
        if isinstance(counts, Mapping):
            c = {q: k for q, k in counts.items() if k}
        else:
            c = dict(Counter(counts))
        if any(k < 0 for k in c.values()):
            raise ValueError("negative count in configuration")
        self._c = c
        self.n = sum(c.values())

    def __getitem__(self, q: str) -> int:
        return self._c.get(q, 0)

    def items(self):
        return self._c.items()

    def support(self) -> set[str]:
        return set(self._c)

    def as_dict(self) -> dict[str, int]:
        return dict(self._c)

    def contains(self, m: Multiset) -> bool:
        need = Counter(m)
        return all(self._c.get(q, 0) >= k for q, k in need.items())

    def key(self) -> tuple:
        return tuple(sorted(self._c.items()))

    def __eq__(self, other) -> bool:
        return isinstance(other, Configuration) and self._c == other._c

    def __hash__(self) -> int:
        return hash(self.key())

    def __add__(self, other: "Configuration") -> "Configuration":
        c = dict(self._c)
        for q, k in other.items():
            c[q] = c.get(q, 0) + k
        return Configuration(c)

    def __repr__(self) -> str:
        body = ", ".join(f"{k}*{q}" for q, k in sorted(self._c.items()))
        return f"Configuration({{{body}}})"


# ---------------------------------------------------------------- computer

@dataclass
class PopulationComputer:
    """A population computer (Q, delta, I, O, H).

    ``delta`` maps a sorted lhs tuple to a sorted rhs tuple.  ``meta`` holds
    provenance (e.g. the synthesis plan) and is carried through JSON.
    """

    states: tuple[str, ...]
    delta: Mapping[Multiset, Multiset]
    inputs: tuple[str, ...]
    output: Output
    helpers: dict[str, int] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def transitions(self) -> Iterator[Transition]:
        for lhs, rhs in self.delta.items():
            yield Transition(lhs, rhs)

    def n_transitions(self) -> int:
        return len(self.delta)

    def helper_count(self) -> int:
        return sum(self.helpers.values())

    def is_binary(self) -> bool:
        return all(len(lhs) == 2 for lhs in self.delta)

    def size(self) -> int:
        """|Q| + |H| + sum of transition arities."""
        return len(self.states) + self.helper_count() + sum(len(l) for l in self.delta)

    def size2(self) -> int:
        """Adjusted size: size plus output gate count (0 for consensus outputs)."""
        gates = self.output.circuit.size() if isinstance(self.output, CircuitOutput) else 0
        return self.size() + gates

    def out_degree(self) -> Counter:
        """Number of transitions whose lhs contains each state."""
        deg: Counter = Counter()
        for lhs in self.delta:
            for q in set(lhs):
                deg[q] += 1
        return deg


def enabled(p: PopulationComputer, c: Configuration) -> list[Transition]:
    if not isinstance(p.delta, dict):
        # transition map computed on demand: scan pairs of populated states
        supp = sorted(c.support())
        out = []
        for i, a in enumerate(supp):
            for b in supp[i:]:
                if a == b and c[a] < 2:
                    continue
                r = p.delta.get((a, b))
                if r is not None:
                    out.append(Transition((a, b), r))
        return out
    index = p.__dict__.get("_by_state")
    if index is None or index[0] != len(p.delta):
        by_state: dict[str, list] = {}
        for l, r in p.delta.items():
            by_state.setdefault(l[0], []).append((l, r))
        index = p.__dict__["_by_state"] = (len(p.delta), by_state)
    out = []
    for q in sorted(c.support()):
        for l, r in index[1].get(q, ()):
            if len(l) == 2:
                k = c[l[1]]
                if k >= 2 or (k == 1 and l[0] != l[1]):
                    out.append(Transition(l, r))
            elif c.contains(l):
                out.append(Transition(l, r))
    return out


def step(c: Configuration, t: Transition) -> Configuration:
    if not c.contains(t.lhs):
        raise ValueError(f"transition {t} not enabled at {c}")
    d = c.as_dict()
    for q in t.lhs:
        d[q] -= 1
    for q in t.rhs:
        d[q] = d.get(q, 0) + 1
    return Configuration(d)


def output(p: PopulationComputer, c: Configuration):
    """Output of a configuration: 0, 1 or None for undefined."""
    return p.output(c.support())


def initial(p: PopulationComputer, x: Mapping[str, int],
            extra_helpers: Mapping[str, int] | None = None) -> Configuration:
    """C_I + H + extra helpers; ``x`` maps input states to counts."""
    bad = [q for q, k in x.items() if k and q not in p.inputs]
    if bad:
        raise ValueError(f"not input states: {bad}")
    counts = Counter({q: k for q, k in x.items() if k})
    counts.update(p.helpers)
    for q, k in (extra_helpers or {}).items():
        if k and q not in p.helpers:
            raise ValueError(f"extra helper state {q!r} outside the helper support")
        counts[q] += k
    return Configuration(counts)


def validate(p: PopulationComputer) -> list[str]:
    """All violated model invariants, each naming the offending object."""
    problems: list[str] = []
    Q = set(p.states)
    if len(Q) != len(p.states):
        problems.append("duplicate state labels")
    for lhs, rhs in p.delta.items():
        t = Transition(lhs, rhs)
        if tuple(sorted(lhs)) != lhs or tuple(sorted(rhs)) != rhs:
            problems.append(f"transition {t}: multisets not in canonical order")
        if len(lhs) != len(rhs):
            problems.append(f"transition {t}: |lhs| = {len(lhs)} differs from |rhs| = {len(rhs)}")
        if len(lhs) < 2:
            problems.append(f"transition {t}: arity below 2")
        if len(set(lhs)) > 2:
            problems.append(f"transition {t}: lhs has more than two distinct states")
        for q in (*lhs, *rhs):
            if q not in Q:
                problems.append(f"transition {t}: unknown state {q!r}")
                break
    for q in p.inputs:
        if q not in Q:
            problems.append(f"input {q!r} is not a state")
    for q, k in p.helpers.items():
        if q not in Q:
            problems.append(f"helper state {q!r} is not a state")
        if k < 0:
            problems.append(f"helper state {q!r} has negative count")
        if q in p.inputs and k:
            problems.append(f"helper state {q!r} is an input state")
    o = p.output
    if isinstance(o, CircuitOutput):
        for q in o.circuit.inputs:
            if q not in Q:
                problems.append(f"circuit reads unknown state {q!r}")
    elif isinstance(o, MarkedConsensus):
        if o.q0 & o.q1:
            problems.append(f"marked sets overlap on {sorted(o.q0 & o.q1)}")
        if not (o.q0 | o.q1) <= Q:
            problems.append("marked sets mention unknown states")
    elif isinstance(o, Consensus):
        if o.q0 & o.q1 or (o.q0 | o.q1) != Q:
            problems.append("consensus sets do not partition the states")
    return problems


def make_computer(states, transitions: Iterable[tuple[Iterable[str], Iterable[str]]],
                  inputs, output: Output, helpers=None, meta=None) -> PopulationComputer:
    """Build a computer from (lhs, rhs) pairs, rejecting conflicting lhs."""
    delta: dict[Multiset, Multiset] = {}
    for lhs, rhs in transitions:
        l, r = ms(lhs), ms(rhs)
        if l in delta and delta[l] != r:
            raise ValueError(f"nondeterministic: {', '.join(l)} has two right-hand sides")
        delta[l] = r
    return PopulationComputer(tuple(sorted(set(states))), delta, tuple(inputs), output,
                              dict(helpers or {}), dict(meta or {}))


# ---------------------------------------------------------- serialization

def output_to_dict(o: Output) -> dict:
    if isinstance(o, CircuitOutput):
        return {"kind": "circuit", "circuit": o.circuit.to_dict()}
    kind = "marked" if isinstance(o, MarkedConsensus) else "consensus"
    return {"kind": kind, "q0": sorted(o.q0), "q1": sorted(o.q1)}


def output_from_dict(d: dict) -> Output:
    kind = d.get("kind")
    if kind == "circuit":
        return CircuitOutput(Circuit.from_dict(d["circuit"]))
    if kind == "marked":
        return MarkedConsensus(frozenset(d["q0"]), frozenset(d["q1"]))
    if kind == "consensus":
        return Consensus(frozenset(d["q0"]), frozenset(d["q1"]))
    raise ValueError(f"unknown output kind {kind!r}")


def to_dict(p: PopulationComputer) -> dict:
    if hasattr(p, "to_dict"):
        return p.to_dict()
    doc = {
        "states": sorted(p.states),
        "inputs": sorted(p.inputs),
        "helpers": {q: p.helpers[q] for q in sorted(p.helpers) if p.helpers[q]},
        "transitions": [{"lhs": ms_counts(l), "rhs": ms_counts(r)} for l, r in sorted(p.delta.items())],
        "output": output_to_dict(p.output),
    }
    if p.meta:
        doc["meta"] = p.meta
    return doc


def from_dict(doc: dict) -> PopulationComputer:
    if "layering" in doc:
        from .convert import LayeredProtocol
        return LayeredProtocol.from_dict(doc)
    try:
        states = doc["states"]
        pairs = []
        for t in doc["transitions"]:
            pairs.append((ms(t["lhs"]), ms(t["rhs"])))
        p = make_computer(states, pairs, doc["inputs"], output_from_dict(doc["output"]),
                          doc.get("helpers", {}), doc.get("meta", {}))
    except (KeyError, TypeError, AttributeError) as e:
        raise ValueError(f"malformed computer document: {e}") from e
    problems = validate(p)
    if problems:
        raise ValueError("invalid computer: " + "; ".join(problems))
    return p


def to_json(p: PopulationComputer) -> str:
    return json.dumps(to_dict(p), indent=1, sort_keys=False)


def from_json(text: str) -> PopulationComputer:
    return from_dict(json.loads(text))


def to_file(p: PopulationComputer, path) -> None:
    with open(path, "w") as f:
        f.write(to_json(p))


def from_file(path) -> PopulationComputer:
    with open(path) as f:
        return from_json(f.read())
