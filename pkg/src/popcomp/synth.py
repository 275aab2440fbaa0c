"""Compile predicates into succinct bounded population computers.

Every atom gets its own subcomputer over binary-weighted states sharing one
reservoir state ``"0"``:

* remainder atoms (mod theta) use states 2^0..2^d with d = ceil(log2 theta);
  agents merge pairwise and overflow at 2^d is folded back modulo theta;
* threshold atoms use states +-2^0..+-2^d; equal powers merge and opposite
  powers cancel.

Input agents are split over the subcomputers by one distribution transition
per variable.  Labels: ``"X:x"`` for the input of variable x, ``"r{j}:{v}"``
and ``"t{j}:{v}"`` for value v of the j-th atom (1-based), ``"0"`` for the
reservoir.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from . import qfpa
from .circuit import build_remainder_output, build_threshold_output, combine
from .core import CircuitOutput, PopulationComputer, Transition, make_computer

RESERVOIR = "0"


def clog2(x: int) -> int:
    """ceil(log2 x) for x >= 1."""
    return (x - 1).bit_length()


def remainder_degree(theta: int) -> int:
    return clog2(theta)


def _pad(items: list[str], k: int) -> list[str]:
    return items + [RESERVOIR] * (k - len(items))


def remainder_transitions(theta: int, lab) -> list[tuple[list[str], list[str]]]:
    """Combine, modulo and fast-modulo transitions; ``lab(v)`` names value v."""
    d = remainder_degree(theta)
    top = lab(1 << d)
    ts = []
    for i in range(d):
        ts.append(([lab(1 << i)] * 2, [lab(1 << (i + 1)), RESERVOIR]))
    rest = [lab(v) for v in qfpa.bin_decompose((1 << d) - theta)]
    if len(rest) >= 2:
        ts.append(([top] + [RESERVOIR] * (len(rest) - 1), rest))
    else:
        ts.append(([top, RESERVOIR], _pad(rest, 2)))
    if d >= 2:
        rest = [lab(v) for v in qfpa.bin_decompose(d * (1 << d) % theta)]
        ts.append(([top] * d, _pad(rest, d)))
    return ts


def threshold_min_degree(c: int) -> int:
    """Smallest degree for which the threshold output is sound for constant c."""
    if c > 0:
        return max(1, clog2(c) + 1)
    return max(1, (-c).bit_length() + 1)


def threshold_transitions(d: int, lab) -> list[tuple[list[str], list[str]]]:
    ts = []
    for i in range(d):
        for sg in (1, -1):
            ts.append(([lab(sg << i)] * 2, [lab(sg << (i + 1)), RESERVOIR]))
    for i in range(d + 1):
        ts.append(([lab(-(1 << i)), lab(1 << i)], [RESERVOIR, RESERVOIR]))
    if d >= 1:
        hi, lo = 1 << d, 1 << (d - 1)
        ts.append(([lab(hi), lab(-lo)], [RESERVOIR, lab(lo)]))
        ts.append(([lab(-hi), lab(lo)], [RESERVOIR, lab(-lo)]))
    return ts


def _single_power_inputs(inputs: Mapping[str, int] | None, lab, allowed) -> dict[str, str]:
    out = {}
    for var, a in (inputs or {}).items():
        if a not in allowed:
            raise ValueError(f"coefficient {a} of {var!r} is not a state value of this subcomputer")
        out[var] = lab(a)
    return out


def remainder_sub(theta: int, c: int = 0, inputs: Mapping[str, int] | None = None) -> PopulationComputer:
    """Standalone remainder computer for ``sum = c (mod theta)``.

    States are labelled by their values.  ``inputs`` optionally maps variable
    names to coefficients that are single powers of two; the matching states
    become input states (as in the three-variable mod-11 example, where x, y
    and z start in states 8, 2 and 1).
    """
    if theta < 2:
        raise ValueError("remainder subcomputer needs theta >= 2")
    d = remainder_degree(theta)
    lab = str
    states = [lab(1 << i) for i in range(d + 1)] + [RESERVOIR]
    var_map = _single_power_inputs(inputs, lab, {1 << i for i in range(d + 1)})
    circ = build_remainder_output(d, theta, c % theta, label=lambda i: lab(1 << i))
    return make_computer(states, remainder_transitions(theta, lab), sorted(set(var_map.values())),
                         CircuitOutput(circ), {RESERVOIR: 3 * d},
                         {"variables": var_map, "kind": "remainder", "theta": theta, "d": d})


def threshold_sub(c: int, d: int, inputs: Mapping[str, int] | None = None) -> PopulationComputer:
    """Standalone threshold computer for ``sum >= c`` with states +-2^0..+-2^d."""
    if d < threshold_min_degree(c):
        raise ValueError(f"degree {d} below the minimum {threshold_min_degree(c)} for c={c}")
    lab = str
    states = [lab(s << i) for i in range(d + 1) for s in (1, -1)] + [RESERVOIR]
    var_map = _single_power_inputs(inputs, lab, {s << i for i in range(d + 1) for s in (1, -1)})
    circ = build_threshold_output(d, c, label=lab)
    return make_computer(states, threshold_transitions(d, lab), sorted(set(var_map.values())),
                         CircuitOutput(circ), {RESERVOIR: d},
                         {"variables": var_map, "kind": "threshold", "c": c, "d": d})


# ------------------------------------------------------------- compile

@dataclass
class AtomPlan:
    kind: str          # "remainder" or "threshold"
    prefix: str        # label namespace, e.g. "r1"
    d: int
    c: int
    theta: int = 0
    coeffs: tuple = ()

    def label(self, v: int) -> str:
        return f"{self.prefix}:{v}"

    def helpers(self) -> int:
        return 3 * self.d if self.kind == "remainder" else self.d


def input_label(var: str) -> str:
    return f"X:{var}"


def default_threshold_degree(atom: qfpa.Threshold, s: int) -> int:
    a_max = max((abs(a) for a in atom.coeffs), default=0)
    base = max(clog2(max(abs(atom.c), 1)) + 1, clog2(max(s * a_max, 1))) + 4
    return max(base, min_threshold_degree(atom, s))


def min_threshold_degree(atom: qfpa.Threshold, s: int) -> int:
    a_max = max((abs(a) for a in atom.coeffs), default=0)
    top_bit = max(a_max.bit_length() - 1, 0)
    return max(threshold_min_degree(atom.c), clog2(max(s * a_max, 1)), top_bit)


def plan_atoms(p: qfpa.Predicate, degree_override: Mapping[int, int] | Sequence[int] | None = None):
    """Return (atom plans, boolean expression over slots).

    ``degree_override`` maps the index of a threshold atom among all atoms
    (0-based, depth-first order) to its degree; a sequence is applied to the
    threshold atoms in order.
    """
    atoms = p.atoms()
    s = len(atoms)
    if s == 0:
        raise ValueError("predicate has no atoms")
    if isinstance(degree_override, Sequence):
        thr_idx = [i for i, a in enumerate(atoms) if isinstance(a, qfpa.Threshold)]
        if len(degree_override) > len(thr_idx):
            raise ValueError("more degree overrides than threshold atoms")
        degree_override = dict(zip(thr_idx, degree_override))
    overrides = dict(degree_override or {})
    bad = [i for i in overrides if not (0 <= i < s and isinstance(atoms[i], qfpa.Threshold))]
    if bad:
        raise ValueError(f"degree overrides refer to non-threshold atoms: {sorted(bad)}")
    plans: list[AtomPlan] = []
    slot_of: dict[int, int] = {}
    for i, a in enumerate(atoms):
        if isinstance(a, qfpa.Remainder):
            if a.theta == 1:
                continue
            j = len(plans) + 1
            plans.append(AtomPlan("remainder", f"r{j}", remainder_degree(a.theta), a.c, a.theta, a.coeffs))
        else:
            j = len(plans) + 1
            if i in overrides:
                d = overrides[i]
                lo = min_threshold_degree(a, s)
                if d < lo:
                    raise ValueError(f"degree override {d} for atom {i} below the minimum {lo}")
            else:
                d = default_threshold_degree(a, s)
            plans.append(AtomPlan("threshold", f"t{j}", d, a.c, 0, a.coeffs))
        slot_of[i] = len(plans) - 1

    counter = iter(range(s))

    def expr(node):
        if isinstance(node, (qfpa.Threshold, qfpa.Remainder)):
            i = next(counter)
            return ("slot", slot_of[i]) if i in slot_of else ("const", 1)
        if isinstance(node, qfpa.Const):
            return ("const", int(node.value))
        if isinstance(node, qfpa.Not):
            return ("not", expr(node.child))
        kids = [expr(ch) for ch in node.children]
        return ("and" if isinstance(node, qfpa.And) else "or", kids)

    return plans, expr(p.root)


def compile(p: qfpa.Predicate, degree_override=None) -> PopulationComputer:
    """Bounded population computer deciding ``p``."""
    plans, bexpr = plan_atoms(p, degree_override)
    states = [RESERVOIR]
    trans: list = []
    subs = []
    helpers = 0
    for ap in plans:
        if ap.kind == "remainder":
            states += [ap.label(1 << i) for i in range(ap.d + 1)]
            trans += remainder_transitions(ap.theta, ap.label)
            subs.append(build_remainder_output(ap.d, ap.theta, ap.c, label=lambda i, ap=ap: ap.label(1 << i)))
        else:
            states += [ap.label(sg << i) for i in range(ap.d + 1) for sg in (1, -1)]
            trans += threshold_transitions(ap.d, ap.label)
            subs.append(build_threshold_output(ap.d, ap.c, label=ap.label))
        helpers += ap.helpers()

    dist = {}
    b = {}
    for vi, var in enumerate(p.variables):
        x = input_label(var)
        states.append(x)
        rhs = []
        for ap in plans:
            rhs += [ap.label(v) for v in qfpa.bin_decompose(ap.coeffs[vi])]
        b[var] = len(rhs)
        if len(rhs) >= 2:
            lhs = [x] + [RESERVOIR] * (len(rhs) - 1)
        elif len(rhs) == 1:
            lhs, rhs = [x, RESERVOIR], rhs + [RESERVOIR]
        else:
            lhs, rhs = [x, RESERVOIR], [RESERVOIR, RESERVOIR]
        trans.append((lhs, rhs))
        dist[var] = len(lhs)
    L = max(b.values(), default=0)
    helpers += max(L, 2) - 1

    circ = combine(bexpr, subs).materialize(RESERVOIR)
    meta = {
        "variables": {v: input_label(v) for v in p.variables},
        "plan": {
            "atoms": [{"kind": ap.kind, "prefix": ap.prefix, "d": ap.d, "c": ap.c, "theta": ap.theta}
                      for ap in plans],
            "b": b,
            "L": L,
            "dist_arity": dist,
            "helpers": helpers,
        },
        "predicate": qfpa.to_text(p) if _printable(p) else None,
    }
    return make_computer(states, trans, [input_label(v) for v in p.variables],
                         CircuitOutput(circ), {RESERVOIR: helpers}, meta)


def _printable(p: qfpa.Predicate) -> bool:
    try:
        qfpa.to_text(p)
        return True
    except ValueError:
        return False


def input_config(p: PopulationComputer, values: Mapping[str, int]) -> dict[str, int]:
    """Translate variable counts into input-state counts via the computer's metadata."""
    var_map = p.meta.get("variables")
    out: dict[str, int] = {}
    for var, k in values.items():
        if var_map and var in var_map:
            q = var_map[var]
        elif var in p.inputs:
            q = var
        else:
            raise ValueError(f"unknown variable {var!r}")
        out[q] = out.get(q, 0) + k
    return out


# ------------------------------------------------------------ potential

def potential(p: PopulationComputer) -> dict[str, int]:
    """Explicit potential weights for a compiled computer.

    Reservoir 0; threshold states 1; remainder state 2^i gets 2 below level
    d' = max(0, d - ceil(log2 6d)) and 2^(i-d') + 1 from there on; an input
    state gets (arity - 1) plus the weights its distribution transition emits.
    """
    plan = p.meta.get("plan")
    if plan is None:
        raise ValueError("computer carries no synthesis plan")
    w = {RESERVOIR: 0}
    for a in plan["atoms"]:
        d, pre = a["d"], a["prefix"]
        if a["kind"] == "threshold":
            for i in range(d + 1):
                w[f"{pre}:{1 << i}"] = 1
                w[f"{pre}:{-(1 << i)}"] = 1
        else:
            dp = max(0, d - clog2(6 * d))
            for i in range(d + 1):
                w[f"{pre}:{1 << i}"] = 2 if i < dp else (1 << (i - dp)) + 1
    for var, x in p.meta["variables"].items():
        lhs = next(l for l in p.delta if x in l)
        w[x] = len(lhs) - 1 + sum(w[q] for q in p.delta[lhs])
    missing = set(p.states) - set(w)
    if missing:
        raise ValueError(f"no weight rule for states {sorted(missing)}")
    return w


def check_potential(p: PopulationComputer, w: Mapping[str, int]) -> Transition | None:
    """None if every transition satisfies w(r) >= w(s) + |r| - 1, else a failing one."""
    if any(v < 0 for v in w.values()):
        raise ValueError("potential weights must be non-negative")
    for lhs, rhs in p.delta.items():
        if sum(w[q] for q in lhs) < sum(w[q] for q in rhs) + len(lhs) - 1:
            return Transition(lhs, rhs)
    return None


def total_size(p: PopulationComputer) -> int:
    """|Q| + |H| + sum of arities + gate count."""
    return p.size2()
