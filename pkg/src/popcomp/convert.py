"""Conversions from bounded computers to leaderless population protocols.

The pipeline applied to a computer deciding double(phi):

* ``preprocess``  starred copies of inputs released by a flag helper;
* ``binarise``    multiway transitions simulated by binary commit/execute chains;
* ``focalise``    the output circuit evaluated by helper agents (marked consensus);
* ``autarkify``   helpers liberated from pairs of input agents;
* ``distribute``  opinion and token bits turning marked consensus into consensus.

Each conversion except ``autarkify`` also returns a :class:`Refinement`, an
affine map from new configurations to old ones used for spot checks.
"""

from __future__ import annotations

import random
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, field
from typing import Iterator

from . import core
from .circuit import Builder, Circuit, rewire
from .core import (CircuitOutput, Configuration, Consensus, MarkedConsensus, PopulationComputer,
                   Transition, make_computer, ms, validate)


class ConversionError(ValueError):
    """A conversion precondition does not hold."""


@dataclass
class Refinement:
    """pi(C)(q) = offset(q) + sum over q' of C(q') * map[q'][q]."""

    map: dict[str, dict[str, int]]
    offset: dict[str, int] = field(default_factory=dict)

    def apply(self, c: Configuration) -> Configuration:
        out: Counter = Counter(self.offset)
        for q, k in c.items():
            for q0, a in self.map[q].items():
                out[q0] += a * k
        if any(v < 0 for v in out.values()):
            raise ValueError(f"refinement map yields a negative count at {c}")
        return Configuration(dict(out))

    def to_dict(self) -> dict:
        doc = {"map": {q: dict(sorted(m.items())) for q, m in sorted(self.map.items())}}
        if self.offset:
            doc["offset"] = dict(sorted(self.offset.items()))
        return doc

    @staticmethod
    def from_dict(doc: dict) -> "Refinement":
        return Refinement({q: dict(m) for q, m in doc["map"].items()}, dict(doc.get("offset", {})))


class Labels:
    """Injective map from structured state names to printable labels."""

    def __init__(self, reserved=()):
        self.by_key: dict = {}
        self.used: dict[str, object] = {q: ("reserved", q) for q in reserved}

    def __call__(self, key, text: str) -> str:
        if key in self.by_key:
            return self.by_key[key]
        if text in self.used and self.used[text] != key:
            raise ConversionError(f"label collision on {text!r}")
        self.by_key[key] = text
        self.used[text] = key
        return text


def _stage_meta(p: PopulationComputer, stage: str, **extra) -> dict:
    meta = {k: v for k, v in p.meta.items() if k in ("variables", "predicate")}
    meta["stages"] = list(p.meta.get("stages", [])) + [stage]
    meta.update(extra)
    return meta


# ------------------------------------------------------------- preprocess

def preprocess(p: PopulationComputer) -> tuple[PopulationComputer, Refinement]:
    """Starred input copies that are released one by one by a flag helper h."""
    if isinstance(p.output, Consensus):
        raise ConversionError("preprocess needs a circuit or marked-consensus output")
    lab = Labels(p.states)
    h = lab(("h",), "*h")
    star = {x: lab(("star", x), f"*{x}") for x in p.inputs}
    trans = [(l, r) for l, r in p.delta.items()]
    trans += [((star[x], h), (x, h)) for x in p.inputs]
    helpers = dict(p.helpers)
    helpers[h] = 1
    var_map = {v: star[q] for v, q in p.meta.get("variables", {}).items()}
    meta = _stage_meta(p, "preprocess")
    meta["variables"] = var_map
    new = make_computer(list(p.states) + [h] + list(star.values()), trans, sorted(star.values()),
                        p.output, helpers, meta)
    pi = {q: {q: 1} for q in p.states}
    pi[h] = {}
    for x, s in star.items():
        pi[s] = {x: 1}
    return new, Refinement(pi)


# --------------------------------------------------------------- binarise

def binarise(p: PopulationComputer) -> tuple[PopulationComputer, Refinement]:
    """Binary computer simulating each multiway transition by a chain.

    An agent in (q, i) owns i agents of q (itself and i - 1 waiting in
    (q, 0)); (q, 1) is q itself.  Two owners with enough agents commit to a
    transition t, the primary one walks through the chain (t, 1), (t, 2), ...
    moving waiting agents into the successor states.
    """
    lab = Labels(p.states)
    ts = sorted(p.delta.items())
    tname = {l: f"t{k}" for k, (l, _) in enumerate(ts)}
    mult: dict[str, int] = {}
    for l, _ in ts:
        for q, k in Counter(l).items():
            mult[q] = max(mult.get(q, 0), k)

    def own(q: str, i: int) -> str:
        return q if i == 1 else lab(("own", q, i), f"{q}~{i}")

    def chain(l, i: int) -> str:
        r = p.delta[l]
        if i == len(r):
            return own(r[-1], 1)
        return lab(("chain", l, i), f"{tname[l]}~{i}")

    def busy(q: str, i: int, l) -> str:
        return chain(l, 1) if i == 0 else lab(("busy", q, i, l), f"{q}~{i}~{tname[l]}")

    # primary agents: avoid the busiest state, then balance, then by name
    deg = p.out_degree()
    busiest = min(deg, key=lambda q: (-deg[q], q)) if deg else None
    load: Counter = Counter()
    primary = {}
    for l, _ in ts:
        supp = sorted(set(l))
        if len(supp) == 1:
            primary[l] = supp[0]
        else:
            cands = [q for q in supp if q != busiest] or supp
            primary[l] = min(cands, key=lambda q: (load[q], q))
        load[primary[l]] += 1

    rules: dict[tuple, tuple[tuple, int]] = {}   # lhs -> (rhs, priority)
    kinds: dict[tuple, str] = {}

    def add(lhs, rhs, priority: int, kind: str):
        key, val = ms(lhs), ms(rhs)
        if key == val:
            return
        old = rules.get(key)
        if old is None or priority > old[1] or (priority == old[1] and val < old[0]):
            rules[key] = (val, priority)
            kinds[key] = kind

    # commit: priority by arity so that larger transitions win ties
    for l, r in ts:
        need = Counter(l)
        q = primary[l]
        others = [x for x in need if x != q]
        rq = need[q]
        if others:
            pp = others[0]
            rp = need[pp]
            for i in range(rq, mult[q] + 1):
                for j in range(rp, mult[pp] + 1):
                    add((own(q, i), own(pp, j)), (busy(q, i - rq, l), own(pp, j - rp)), 100 + len(l), "commit")
        else:
            m = mult[q]
            for i in range(0, m + 1):
                for j in range(i, m + 1):
                    if i + j < rq:
                        continue
                    rest = i + j - rq
                    if rest <= m:
                        rhs = (busy(q, rest, l), own(q, 0))
                    else:
                        rhs = (busy(q, rest - m, l), own(q, m))
                    add((own(q, i), own(q, j)), rhs, 100 + len(l), "commit")
        # transfer ownership of leftover agents, then execute the chain
        for i in range(1, mult[q] - rq + 1):
            add((busy(q, i, l), own(q, 0)), (busy(q, 0, l), own(q, i)), 50, "transfer")
        sec = others[0] if others else q
        rsec = need[sec] if others else 0
        for i in range(1, len(r)):
            x = sec if i <= rsec else q
            add((chain(l, i), own(x, 0)), (chain(l, i + 1), own(r[i - 1], 1)), 50, "execute")

    for q, m in mult.items():
        for i in range(1, m):
            for j in range(i, m):
                if i + j <= m:
                    rhs = (own(q, i + j), own(q, 0))
                else:
                    rhs = (own(q, m), own(q, i + j - m))
                add((own(q, i), own(q, j)), rhs, 10, "stack")

    trans = [(l, v[0]) for l, v in rules.items()]
    states = set(p.states)
    for l, r in trans:
        states.update(l)
        states.update(r)

    # refinement map
    pi: dict[str, dict[str, int]] = {}
    for key, text in lab.by_key.items():
        if key[0] == "own":
            pi[text] = {key[1]: key[2]} if key[2] else {}
        elif key[0] == "busy":
            d = Counter({key[1]: key[2]})
            d.update(p.delta[key[3]])
            pi[text] = dict(d)
        elif key[0] == "chain":
            pi[text] = dict(Counter(p.delta[key[1]][key[2] - 1:]))
    for q in p.states:
        pi[q] = {q: 1}

    def forms(q: str) -> list[str]:
        # a waiting (q, 0) agent always has an owner, but owners may sit in (q, i >= 2)
        zero = lab.by_key.get(("own", q, 0))
        return [q, zero] if zero in states else [q]

    output = _lift_output(p.output, forms)
    meta = _stage_meta(p, "binarise", primary_load=max(load.values(), default=0))
    new = make_computer(states, trans, p.inputs, output, p.helpers, meta)
    return new, Refinement({q: pi[q] for q in new.states})


def _lift_output(o, forms):
    """Output over new states where old state q is present iff one of forms(q) is."""
    if isinstance(o, CircuitOutput):
        def f(b: Builder, q: str):
            return b.any_([b.input(x) for x in forms(q)])
        return CircuitOutput(rewire(o.circuit, f))
    if isinstance(o, MarkedConsensus):
        return MarkedConsensus(frozenset(x for q in o.q0 for x in forms(q)),
                               frozenset(x for q in o.q1 for x in forms(q)))
    raise ConversionError("unsupported output kind")


# --------------------------------------------------------------- focalise

def _bit(v) -> str:
    return "_" if v is None else str(v)


def focalise(p: PopulationComputer) -> tuple[PopulationComputer, Refinement]:
    """Marked-consensus computer evaluating the output circuit with helper agents.

    Original states carry a flag (q is (q, -), "q+" is (q, +)); one tracker
    helper per state read by the circuit records presence; one helper per
    gate computes it; a reset helper walks through trackers and gates in
    order whenever something changed.  The output is read off the last gate.
    """
    if not isinstance(p.output, CircuitOutput):
        raise ConversionError("focalise needs a circuit output")
    if not p.is_binary():
        raise ConversionError("focalise needs a binary computer")
    support_h = sorted(q for q, k in p.helpers.items() if k)
    if not support_h:
        raise ConversionError("focalise needs at least one helper state")
    qh = support_h[0]
    circ = p.output.circuit.materialize(qh)
    lab = Labels(p.states)
    tracked = circ.used_inputs()
    G = len(circ.gates)
    T = len(tracked)
    R = T + G

    def plus(q):
        return lab(("+", q), f"{q}+")

    def trk(q, b):
        return lab(("trk", q, b), f"{q}?{b}")

    def gate(k, out, i1, i2):
        return lab(("gate", k, out, i1, i2), f"g{k + 1}[{_bit(out)}{_bit(i1)}{_bit(i2)}]")

    def reset(i):
        return lab(("reset", i), f"R{i}")

    def nand(i, j):
        return 0 if i and j else 1

    gate_forms = {}
    for k in range(G):
        forms = [(None, None, None), (None, 0, None), (None, 1, None)]
        forms += [(nand(i, j), i, j) for i in (0, 1) for j in (0, 1)]
        gate_forms[k] = [gate(k, *f) for f in forms]

    def showing(ref, b) -> list[str]:
        """Agents certifying that wire ``ref`` has value b."""
        if ref[0] == "in":
            return [trk(ref[1], b)]
        k = ref[1]
        return [gate(k, nand(i, j), i, j) for i in (0, 1) for j in (0, 1) if nand(i, j) == b]

    base = dict(p.delta)
    incoming_plus = {r[0] for r in base.values()}
    rules: dict[tuple, tuple] = {}

    def add(lhs, rhs, overwrite=False):
        key, val = ms(lhs), ms(rhs)
        if key == val:
            return
        if key in rules and not overwrite:
            return
        rules[key] = val

    # execute: every flag combination; the first successor raises its flag
    for (q, pp), (q2, p2) in base.items():
        qs = [q] + ([plus(q)] if q in incoming_plus else [])
        ps = [pp] + ([plus(pp)] if pp in incoming_plus else [])
        for a in qs:
            for b in ps:
                add((a, b), (plus(q2), p2))
    # gate transitions
    for k, (e1, e2) in enumerate(circ.gates):
        for b in (0, 1):
            for s in showing(e1, b):
                add((gate(k, None, None, None), s), (gate(k, None, b, None), s))
        for i in (0, 1):
            for b in (0, 1):
                for s in showing(e2, b):
                    add((gate(k, None, i, None), s), (gate(k, nand(i, b), i, b), s))
    # reset walks trackers then gates in index (topological) order
    for idx, q in enumerate(tracked):
        for b in (0, 1, "!"):
            add((reset(idx), trk(q, b)), (reset(idx + 1), trk(q, 0)))
    for k in range(G):
        for f in gate_forms[k]:
            add((reset(T + k), f), (reset(T + k + 1), gate(k, None, None, None)))
    # detect presence
    for q in tracked:
        add((trk(q, 0), q), (trk(q, "!"), q))
    # init-reset (reset transitions above take precedence)
    plus_states = sorted(q for q in p.states if q in incoming_plus)
    for i in range(R + 1):
        for q in plus_states:
            add((plus(q), reset(i)), (q, reset(0)))
        for q in tracked:
            add((trk(q, "!"), reset(i)), (trk(q, 1), reset(min(i, T))))
        for j in range(i, R + 1):
            add((reset(i), reset(j)), (reset(0), qh))
    # leader election among trackers of one state and among forms of one gate
    for q in tracked:
        group = [trk(q, b) for b in (0, 1, "!")]
        for a in range(3):
            for b in range(a, 3):
                keep = min(group[a], group[b])
                add((group[a], group[b]), (keep, reset(0)))
    for k in range(G):
        forms = gate_forms[k]
        for a in range(len(forms)):
            for b in range(a, len(forms)):
                keep = min(forms[a], forms[b])
                add((forms[a], forms[b]), (keep, reset(0)))
    # denotify where nothing else applies
    for a in range(len(plus_states)):
        for b in range(a, len(plus_states)):
            x, y = plus(plus_states[a]), plus(plus_states[b])
            first, second = sorted((plus_states[a], plus_states[b]))
            add((x, y), (plus(first), second))

    states = set(p.states)
    for l, r in rules.items():
        states.update(l)
        states.update(r)
    helpers = dict(p.helpers)
    for q in tracked:
        helpers[trk(q, 0)] = 1
    for k in range(G):
        helpers[gate(k, None, None, None)] = 1
    helpers[reset(0)] = 1
    last = G - 1
    q0 = frozenset(f for f in gate_forms[last] if lab.used[f][2] == 0)
    q1 = frozenset(f for f in gate_forms[last] if lab.used[f][2] == 1)
    meta = _stage_meta(p, "focalise", gadget_helpers=T + G + 1)
    new = make_computer(states, rules.items(), p.inputs, MarkedConsensus(q0, q1), helpers, meta)
    pi = {}
    for q in new.states:
        key = lab.used.get(q)
        if key is None or key[0] == "reserved":
            pi[q] = {q: 1}
        elif key[0] == "+":
            pi[q] = {key[1]: 1}
        else:
            pi[q] = {qh: 1}
    return new, Refinement(pi, {qh: -(T + G + 1)})


# -------------------------------------------------------------- autarkify

def autarkify(p: PopulationComputer) -> PopulationComputer:
    """Helper-free computer for phi from one deciding double(phi).

    Two agents in input x turn into one agent in x' and one liberated agent;
    liberated agents stack up to |H| and then dispatch a full helper batch.
    """
    if not isinstance(p.output, MarkedConsensus):
        raise ConversionError("autarkify needs a marked-consensus output")
    if not p.is_binary():
        raise ConversionError("autarkify needs a binary computer")
    inputs = set(p.inputs)
    pairs = {}
    for x in sorted(inputs):
        if x + "'" in inputs:
            pairs[x] = x + "'"
    primed = set(pairs.values())
    if set(pairs) | primed != inputs:
        raise ConversionError(f"inputs not paired: {sorted(inputs - set(pairs) - primed)}")
    for l, r in p.delta.items():
        if inputs & set(r):
            raise ConversionError("an input state has incoming transitions")
        if set(l) <= inputs:
            raise ConversionError("a transition is enabled on input states alone")
    lab = Labels(p.states)
    hs = [q for q in sorted(p.helpers) for _ in range(p.helpers[q])]
    m = len(hs)
    trans = list(p.delta.items())
    if m == 0:
        lib = None
    elif m == 1:
        lib = hs[0]
    else:
        def up(i):
            return lab(("up", i), f"A^{i}")

        def down(i):
            return hs[0] if i == 1 else lab(("down", i), f"Av{i}")

        lib = up(1)
        for i in range(1, m):
            for j in range(i, m):
                if i + j < m:
                    trans.append(((up(i), up(j)), (up(i + j), up(0))))
                else:
                    trans.append(((up(i), up(j)), (down(m), up(i + j - m))))
        for i in range(1, m):
            trans.append(((down(i + 1), up(0)), (down(i), hs[i])))
    if lib is not None:
        for x, xp in pairs.items():
            trans.append(((x, x), (xp, lib)))
    states = set(p.states)
    for l, r in trans:
        states.update(l)
        states.update(r)
    var_map = {v: q for v, q in p.meta.get("variables", {}).items() if q in pairs}
    meta = _stage_meta(p, "autarkify", min_input=len(p.inputs) + 2 * m)
    meta["variables"] = var_map
    return make_computer(states, trans, sorted(pairs), p.output, {}, meta)


# ------------------------------------------------------------- distribute

def layer_label(q: str, o: int, t: int, inputs) -> str:
    if o == 0 and t == 0 and q in inputs:
        return q
    return f"{q}/{o}{t}"


class LayeredTransitions(Mapping):
    """Transition map of a distributed protocol, computed on demand."""

    def __init__(self, proto: "LayeredProtocol"):
        self.proto = proto

    def __getitem__(self, lhs):
        if len(lhs) != 2:
            raise KeyError(lhs)
        rhs = self.proto.fire(lhs[0], lhs[1])
        if rhs is None:
            raise KeyError(lhs)
        return rhs

    def get(self, lhs, default=None):
        try:
            return self[lhs]
        except KeyError:
            return default

    def __iter__(self) -> Iterator[tuple]:
        states = self.proto.states
        for i, a in enumerate(states):
            for b in states[i:]:
                if self.proto.fire(a, b) is not None:
                    yield (a, b) if a <= b else (b, a)

    def __len__(self) -> int:
        return self.proto.count_transitions()

    def __contains__(self, lhs) -> bool:
        return self.get(lhs) is not None


class LayeredProtocol(PopulationComputer):
    """Population protocol over Q x {opinion} x {token} built from a base computer.

    A pair of agents first applies the base transition (if any) to its base
    states, then updates the bits: meeting a marked agent sets both opinions
    to the marked value with tokens (certify); otherwise a token holder
    converts a token-less agent of the other opinion (convince) or two
    opposite tokens cancel (drop).
    """

    def __init__(self, base: PopulationComputer, meta=None):
        if not isinstance(base.output, MarkedConsensus):
            raise ConversionError("distribute needs a marked-consensus output")
        if base.helper_count():
            raise ConversionError("distribute needs a computer without helpers")
        if not base.is_binary():
            raise ConversionError("distribute needs a binary computer")
        self.base = base
        bin_ = set(base.inputs)
        self._decode = {}
        labels = []
        for q in base.states:
            for o in (0, 1):
                for t in (0, 1):
                    s = layer_label(q, o, t, bin_)
                    if s in self._decode:
                        raise ConversionError(f"label collision on {s!r}")
                    self._decode[s] = (q, o, t)
                    labels.append(s)
        self.base_index = {q: i for i, q in enumerate(base.states)}
        mark = {}
        for q in base.output.q0:
            mark[q] = 0
        for q in base.output.q1:
            mark[q] = 1
        self.mark = mark
        q0 = frozenset(s for s, (_, o, _) in self._decode.items() if o == 0)
        q1 = frozenset(s for s, (_, o, _) in self._decode.items() if o == 1)
        super().__init__(tuple(sorted(labels)), {}, tuple(sorted(base.inputs)), Consensus(q0, q1), {},
                         dict(meta or {}))
        self.delta = LayeredTransitions(self)
        self._count = None

    def label(self, q: str, o: int, t: int) -> str:
        return layer_label(q, o, t, self.base.inputs)

    def decode(self, s: str) -> tuple[str, int, int]:
        return self._decode[s]

    def base_step(self, q: str, p: str):
        """Successor base states in agent order, or None without a base transition."""
        lhs = (q, p) if q <= p else (p, q)
        rhs = self.base.delta.get(lhs)
        if rhs is None:
            return None
        return (rhs[0], rhs[1]) if q <= p else (rhs[1], rhs[0])

    def certify_opinion(self, q2: str, p2: str):
        hits = [(self.base_index[x], self.mark[x]) for x in (q2, p2) if x in self.mark]
        if not hits:
            return None
        return min(hits)[1]

    def fire(self, a: str, b: str):
        """Sorted rhs for the agent pair (a, b), or None if nothing changes."""
        if b < a:
            a, b = b, a
        (q, o1, t1), (p, o2, t2) = self._decode[a], self._decode[b]
        nxt = self.base_step(q, p)
        q2, p2 = nxt if nxt is not None else (q, p)
        i = self.certify_opinion(q2, p2)
        if i is not None:
            n1, n2 = (i, 1), (i, 1)
        elif t1 == 1 and o2 != o1 and t2 == 0:
            n1, n2 = (o1, 0), (o1, 0)
        elif t2 == 1 and o1 != o2 and t1 == 0:
            n1, n2 = (o2, 0), (o2, 0)
        elif t1 == 1 and t2 == 1 and o1 != o2:
            n1, n2 = (o1, 0), (o2, 0)
        else:
            n1, n2 = (o1, t1), (o2, t2)
        ra, rb = self.label(q2, *n1), self.label(p2, *n2)
        if (ra, rb) == (a, b) or (rb, ra) == (a, b):
            return None
        return (ra, rb) if ra <= rb else (rb, ra)

    def count_transitions(self) -> int:
        if self._count is not None:
            return self._count
        Q = self.base.states
        nq = len(Q)
        with_base = set(self.base.delta)
        marked = set(self.mark)
        n_base_pairs = nq * (nq + 1) // 2
        kind0_diag = sum(1 for l in with_base if l[0] == l[1])
        kind0_off = len(with_base) - kind0_diag
        # pairs without a base transition but with a marked state
        m_diag = sum(1 for q in marked if (q, q) not in with_base)
        m_off = 0
        for q in marked:
            for p in Q:
                if p != q and ((q, p) if q <= p else (p, q)) not in with_base:
                    if p in marked and p < q:
                        continue
                    m_off += 1
        rest_diag = nq - kind0_diag - m_diag
        rest_off = n_base_pairs - nq - kind0_off - m_off
        self._count = (16 * kind0_off + 10 * kind0_diag + 15 * m_off + 9 * m_diag
                       + 6 * rest_off + 3 * rest_diag)
        return self._count

    def n_transitions(self) -> int:
        return self.count_transitions()

    def is_binary(self) -> bool:
        return True

    def out_degree(self):
        raise NotImplementedError("out-degree of a layered protocol is not enumerated")

    def size(self) -> int:
        return len(self.states) + 2 * self.count_transitions()

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "inputs": list(self.inputs),
            "helpers": {},
            "layering": {"scheme": "opinion-token"},
            "base": core.to_dict(self.base),
            "output": core.output_to_dict(self.output),
            "meta": self.meta,
        }

    @staticmethod
    def from_dict(doc: dict) -> "LayeredProtocol":
        base = core.from_dict(doc["base"])
        proto = LayeredProtocol(base, doc.get("meta"))
        if list(doc["states"]) != list(proto.states):
            raise ValueError("layered state list does not match its base")
        return proto

    def validate_layered(self) -> list[str]:
        problems = [f"base: {m}" for m in validate(self.base)]
        if set(self.inputs) - set(self.states):
            problems.append("inputs missing from states")
        return problems


def distribute(p: PopulationComputer) -> tuple[LayeredProtocol, Refinement]:
    meta = _stage_meta(p, "distribute", min_input=p.meta.get("min_input", 0))
    proto = LayeredProtocol(p, meta)
    pi = {s: {proto.decode(s)[0]: 1} for s in proto.states}
    return proto, Refinement(pi)


# --------------------------------------------------------------- pipeline

def validate_any(p: PopulationComputer) -> list[str]:
    if isinstance(p, LayeredProtocol):
        return p.validate_layered()
    return validate(p)


def stage_row(name: str, p: PopulationComputer) -> dict:
    row = {
        "stage": name,
        "states": len(p.states),
        "transitions": p.n_transitions(),
        "helpers": p.helper_count(),
        "binary": p.is_binary(),
        "problems": validate_any(p),
    }
    if not isinstance(p, LayeredProtocol):
        row["size2"] = p.size2()
    return row


@dataclass
class PipelineReport:
    mode: str
    stages: list[dict] = field(default_factory=list)
    min_input: int = 0

    def ok(self) -> bool:
        return all(not s["problems"] for s in self.stages)

    def to_dict(self) -> dict:
        return {"mode": self.mode, "min_input": self.min_input, "stages": self.stages}


def pipeline(p: PopulationComputer, mode: str = "fast"):
    """Convert a computer for double(phi) into a protocol for phi.

    Returns (protocol, report, intermediates) where intermediates maps stage
    names to (computer, refinement) pairs.
    """
    if mode not in ("fast", "full"):
        raise ValueError(f"unknown pipeline mode {mode!r}")
    report = PipelineReport(mode)
    report.stages.append(stage_row("input", p))
    stages = {}
    cur = p
    if mode == "full":
        cur, pi = preprocess(cur)
        stages["preprocess"] = (cur, pi)
        report.stages.append(stage_row("preprocess", cur))
    for name, fn in (("binarise", binarise), ("focalise", focalise)):
        try:
            cur, pi = fn(cur)
        except ConversionError as e:
            raise ConversionError(f"{name}: {e}") from e
        stages[name] = (cur, pi)
        report.stages.append(stage_row(name, cur))
    try:
        cur = autarkify(cur)
    except ConversionError as e:
        raise ConversionError(f"autarkify: {e}") from e
    stages["autarkify"] = (cur, None)
    report.stages.append(stage_row("autarkify", cur))
    report.min_input = cur.meta["min_input"]
    proto, pi = distribute(cur)
    stages["distribute"] = (proto, pi)
    report.stages.append(stage_row("distribute", proto))
    return proto, report, stages


def build_protocol(predicate, mode: str = "fast", degree_override=None):
    """compile(double(phi)) followed by the conversion pipeline."""
    from . import qfpa, synth
    comp = synth.compile(qfpa.double(predicate), degree_override)
    return pipeline(comp, mode)


# ------------------------------------------------------------- refinement

@dataclass
class RefinementResult:
    ok: bool
    runs: int
    steps: int
    violations: list[str] = field(default_factory=list)


def _successor_set(p: PopulationComputer, c: Configuration) -> set:
    out = set()
    for t in core.enabled(p, c):
        out.add(core.step(c, t))
    return out


def check_refinement(old: PopulationComputer, new: PopulationComputer, pi: Refinement,
                     starts: list[Configuration], runs: int = 100, seed: int = 0,
                     max_steps: int = 100_000) -> RefinementResult:
    """Sample random runs of ``new`` and check pi step by step.

    Each step C -> D must map to a stutter pi(D) = pi(C) or to a single step
    of ``old``; each terminal C must map to a terminal configuration of
    ``old`` with the same output.
    """
    rng = random.Random(seed)
    res = RefinementResult(True, 0, 0)
    for k in range(runs):
        c = starts[k % len(starts)]
        try:
            pc = pi.apply(c)
        except (ValueError, KeyError) as e:
            res.violations.append(f"run {k}: cannot map initial configuration: {e}")
            res.ok = False
            continue
        for _ in range(max_steps):
            en = core.enabled(new, c)
            if not en:
                if core.enabled(old, pc):
                    res.violations.append(f"run {k}: terminal {c} maps to non-terminal {pc}")
                elif old.output(pc.support()) != new.output(c.support()):
                    res.violations.append(f"run {k}: outputs differ at terminal {c}")
                break
            d = core.step(c, rng.choice(en))
            res.steps += 1
            try:
                pd = pi.apply(d)
            except (ValueError, KeyError) as e:
                res.violations.append(f"run {k}: {e}")
                break
            if pd != pc and pd not in _successor_set(old, pc):
                res.violations.append(f"run {k}: step to {d} maps to {pd}, not a successor of {pc}")
                break
            c, pc = d, pd
        res.runs += 1
        if len(res.violations) > 20:
            break
    res.ok = not res.violations
    return res
