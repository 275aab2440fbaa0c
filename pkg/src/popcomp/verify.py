"""Exhaustive analysis of small instances and boundedness certificates.

Reachability graphs are explored breadth-first over count vectors.  Fair
termination holds on a finite graph exactly when a terminal configuration is
reachable from every node; the configurations a fair run visits forever
form a bottom strongly connected component, so stabilisation to b means
every bottom component outputs b throughout.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from math import lcm
from typing import Mapping

from . import exactlp, qfpa
from .core import Configuration, PopulationComputer, initial
from .synth import input_config


@dataclass
class ReachGraph:
    states: tuple[str, ...]
    nodes: list[tuple[int, ...]]
    succ: list[list[tuple[int, int]]]     # (target node, transition index)
    terminal: set[int]
    truncated: bool
    transitions: list = field(default_factory=list)

    def config(self, i: int) -> Configuration:
        return Configuration({q: k for q, k in zip(self.states, self.nodes[i]) if k})

    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)


class Indeterminate(Exception):
    """Raised when a check needs a complete graph but exploration was truncated."""


def _compile_transitions(p: PopulationComputer, index: dict[str, int]):
    out = []
    for lhs, rhs in p.delta.items():
        need: dict[int, int] = {}
        for q in lhs:
            need[index[q]] = need.get(index[q], 0) + 1
        delta: dict[int, int] = {}
        for q in lhs:
            delta[index[q]] = delta.get(index[q], 0) - 1
        for q in rhs:
            delta[index[q]] = delta.get(index[q], 0) + 1
        out.append((tuple(need.items()), tuple((i, v) for i, v in delta.items() if v), (lhs, rhs)))
    return out


def explore(p: PopulationComputer, c0: Configuration, cap: int = 10**6) -> ReachGraph:
    """Breadth-first reachability graph from c0, stopping after ``cap`` nodes."""
    if cap < 1:
        raise ValueError("cap must be positive")
    if not isinstance(p.delta, dict):
        return _explore_pairwise(p, c0, cap)
    states = tuple(p.states)
    index = {q: i for i, q in enumerate(states)}
    ts = _compile_transitions(p, index)
    # index transitions by one lhs state to avoid scanning all of them
    by_state: dict[int, list[int]] = {}
    for k, (need, _, _) in enumerate(ts):
        by_state.setdefault(need[0][0], []).append(k)
    start = [0] * len(states)
    for q, k in c0.items():
        start[index[q]] = k
    start_t = tuple(start)
    ids = {start_t: 0}
    nodes = [start_t]
    succ: list[list[tuple[int, int]]] = [[]]
    terminal = set()
    truncated = False
    queue = deque([0])
    while queue:
        u = queue.popleft()
        cur = nodes[u]
        out = []
        for qi, cnt in enumerate(cur):
            if not cnt:
                continue
            for k in by_state.get(qi, ()):
                need, delta, _ = ts[k]
                if any(cur[i] < m for i, m in need):
                    continue
                nxt = list(cur)
                for i, v in delta:
                    nxt[i] += v
                nt = tuple(nxt)
                v = ids.get(nt)
                if v is None:
                    if len(nodes) >= cap:
                        truncated = True
                        continue
                    v = len(nodes)
                    ids[nt] = v
                    nodes.append(nt)
                    succ.append([])
                    queue.append(v)
                out.append((v, k))
        succ[u] = out
        if not out and not _has_enabled(cur, ts):
            terminal.add(u)
    return ReachGraph(states, nodes, succ, terminal, truncated, [t[2] for t in ts])


def _explore_pairwise(p: PopulationComputer, c0: Configuration, cap: int) -> ReachGraph:
    """explore() for binary computers whose transition map is computed on demand."""
    states = tuple(p.states)
    index = {q: i for i, q in enumerate(states)}
    tids: dict[tuple, int] = {}
    tlist: list = []
    start = [0] * len(states)
    for q, k in c0.items():
        start[index[q]] = k
    start_t = tuple(start)
    ids = {start_t: 0}
    nodes = [start_t]
    succ: list[list[tuple[int, int]]] = [[]]
    terminal = set()
    truncated = False
    queue = deque([0])
    while queue:
        u = queue.popleft()
        cur = nodes[u]
        supp = [i for i, k in enumerate(cur) if k]
        out = []
        for a_pos, i in enumerate(supp):
            for j in supp[a_pos:]:
                if i == j and cur[i] < 2:
                    continue
                lhs = (states[i], states[j]) if states[i] <= states[j] else (states[j], states[i])
                rhs = p.delta.get(lhs)
                if rhs is None:
                    continue
                k = tids.get(lhs)
                if k is None:
                    k = tids[lhs] = len(tlist)
                    tlist.append((lhs, rhs))
                nxt = list(cur)
                for q in lhs:
                    nxt[index[q]] -= 1
                for q in rhs:
                    nxt[index[q]] += 1
                nt = tuple(nxt)
                v = ids.get(nt)
                if v is None:
                    if len(nodes) >= cap:
                        truncated = True
                        continue
                    v = len(nodes)
                    ids[nt] = v
                    nodes.append(nt)
                    succ.append([])
                    queue.append(v)
                out.append((v, k))
        succ[u] = out
        if not out and not truncated:
            terminal.add(u)
    return ReachGraph(states, nodes, succ, terminal, truncated, tlist)


def _has_enabled(cur, ts) -> bool:
    return any(all(cur[i] >= m for i, m in need) for need, _, _ in ts)


def _require_complete(g: ReachGraph) -> None:
    if g.truncated:
        raise Indeterminate("exploration hit its cap; graph incomplete")


def sccs(g: ReachGraph) -> list[list[int]]:
    """Strongly connected components (iterative Tarjan)."""
    n = len(g.nodes)
    index = [-1] * n
    low = [0] * n
    on = [False] * n
    stack: list[int] = []
    comps = []
    counter = 0
    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on[root] = True
        while work:
            v, pi = work[-1]
            edges = g.succ[v]
            if pi < len(edges):
                work[-1] = (v, pi + 1)
                w = edges[pi][0]
                if index[w] == -1:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on[w] = True
                    work.append((w, 0))
                elif on[w]:
                    low[v] = min(low[v], index[w])
            else:
                work.pop()
                if work:
                    u = work[-1][0]
                    low[u] = min(low[u], low[v])
                if low[v] == index[v]:
                    comp = []
                    while True:
                        w = stack.pop()
                        on[w] = False
                        comp.append(w)
                        if w == v:
                            break
                    comps.append(comp)
    return comps


def bottom_sccs(g: ReachGraph) -> list[list[int]]:
    out = []
    for comp in sccs(g):
        members = set(comp)
        if all(w in members for v in comp for w, _ in g.succ[v]):
            out.append(comp)
    return out


def check_bounded(g: ReachGraph) -> bool:
    """True iff no run from the root is infinite, i.e. the graph is acyclic."""
    _require_complete(g)
    for comp in sccs(g):
        if len(comp) > 1:
            return False
        v = comp[0]
        if any(w == v for w, _ in g.succ[v]):
            return False
    return True


def check_terminating_fair(g: ReachGraph) -> bool:
    """True iff a terminal node is reachable from every node."""
    _require_complete(g)
    pred: list[list[int]] = [[] for _ in g.nodes]
    for u, out in enumerate(g.succ):
        for v, _ in out:
            pred[v].append(u)
    seen = set(g.terminal)
    queue = deque(g.terminal)
    while queue:
        v = queue.popleft()
        for u in pred[v]:
            if u not in seen:
                seen.add(u)
                queue.append(u)
    return len(seen) == len(g.nodes)


@dataclass
class Verdict:
    ok: bool | None
    expected: int
    runs: list[dict] = field(default_factory=list)
    reason: str = ""

    def to_dict(self) -> dict:
        return {"ok": self.ok, "expected": self.expected, "reason": self.reason, "runs": self.runs}


def helper_extras(p: PopulationComputer, slack: int) -> list[dict[str, int]]:
    """Extra helper multisets of total size <= slack.

    All distributions over the helper support when it has at most four
    states, otherwise extras go to the most populated helper state only.
    """
    support = sorted(q for q, k in p.helpers.items() if k)
    if not support:
        return [{}]
    if len(support) > 4:
        top = max(support, key=lambda q: (p.helpers[q], q))
        return [{top: k} if k else {} for k in range(slack + 1)]
    out = []
    for total in range(slack + 1):
        for combo in itertools.combinations_with_replacement(support, total):
            d: dict[str, int] = {}
            for q in combo:
                d[q] = d.get(q, 0) + 1
            out.append(d)
    return out


def check_correct(p: PopulationComputer, predicate: qfpa.Predicate, x: Mapping[str, int],
                  helper_slack: int = 0, cap: int = 10**6) -> Verdict:
    """Every fair run from every admissible initial configuration stabilises to the oracle value."""
    expected = int(qfpa.evaluate(predicate, x))
    verdict = Verdict(True, expected)
    cx = input_config(p, x)
    for extra in helper_extras(p, helper_slack):
        c0 = initial(p, cx, extra)
        g = explore(p, c0, cap)
        run = {"extra": extra, "nodes": len(g.nodes), "edges": g.n_edges(), "truncated": g.truncated}
        verdict.runs.append(run)
        if g.truncated:
            verdict.ok = None
            verdict.reason = f"exploration truncated at {cap} nodes with extra helpers {extra}"
            return verdict
        if not check_terminating_fair(g):
            verdict.ok = False
            verdict.reason = f"not fairly terminating with extra helpers {extra}"
            return verdict
        for comp in bottom_sccs(g):
            outs = {p.output(g.config(v).support()) for v in comp}
            if outs != {expected}:
                verdict.ok = False
                bad = g.config(comp[0])
                verdict.reason = f"bottom component with outputs {sorted(outs, key=str)} at {bad}, expected {expected}"
                return verdict
    return verdict


def inputs_up_to(variables, total: int):
    """All input vectors with sum of counts <= total, in a fixed order."""
    for t in range(total + 1):
        for combo in itertools.combinations_with_replacement(variables, t):
            x = {v: 0 for v in variables}
            for v in combo:
                x[v] += 1
            yield x


# ------------------------------------------------------- potential (LP)

def incidence(p: PopulationComputer) -> tuple[list[str], list[tuple], list[list[int]]]:
    """States, transitions and the matrix whose row for t = (r, s) is s - r."""
    states = sorted(p.states)
    idx = {q: i for i, q in enumerate(states)}
    ts = sorted(p.delta.items())
    A = []
    for lhs, rhs in ts:
        row = [0] * len(states)
        for q in lhs:
            row[idx[q]] -= 1
        for q in rhs:
            row[idx[q]] += 1
        A.append(row)
    return states, ts, A


@dataclass
class UnboundedWitness:
    """Non-negative firing counts y != 0 with A^T y = 0: a loop of transitions."""

    counts: dict[tuple, Fraction]

    def check(self, p: PopulationComputer) -> bool:
        if not self.counts or any(v < 0 for v in self.counts.values()):
            return False
        if all(v == 0 for v in self.counts.values()):
            return False
        net: dict[str, Fraction] = {}
        for (lhs, rhs), y in self.counts.items():
            if p.delta.get(lhs) != rhs:
                return False
            for q in lhs:
                net[q] = net.get(q, Fraction(0)) - y
            for q in rhs:
                net[q] = net.get(q, Fraction(0)) + y
        return all(v == 0 for v in net.values())


def synthesize_potential(p: PopulationComputer, max_transitions: int = 400):
    """Integer potential weights, or an :class:`UnboundedWitness`.

    Solves A x <= -1 exactly.  Since every row of A sums to zero, x can be
    shifted to be non-negative, so the search is over x >= 0.  Weights are
    lambda * D * (x - min x) with D the common denominator and lambda the
    largest arity minus one, which turns the strict decrease into the
    arity-dependent one.  If the system is infeasible, Farkas' lemma gives
    y >= 0 with A^T y = 0 and sum y = 1, which is computed by a second LP.
    """
    if p.n_transitions() > max_transitions:
        raise ValueError(f"too many transitions for exact elimination ({p.n_transitions()} > {max_transitions})")
    states, ts, A = incidence(p)
    if not ts:
        return {q: 0 for q in states}
    x = exactlp.feasible_leq_nonneg(A, [-1] * len(A))
    if x is not None:
        D = lcm(*(v.denominator for v in x))
        lam = max(len(l) for l, _ in ts) - 1
        lo = min(x)
        w = {q: int(lam * D * (v - lo)) for q, v in zip(states, x)}
        return w
    AT = [[A[t][q] for t in range(len(A))] for q in range(len(states))]
    AT.append([1] * len(A))
    y = exactlp.feasible_eq(AT, [0] * len(states) + [1])
    if y is None:
        raise RuntimeError("neither weights nor a loop witness found")
    return UnboundedWitness({t: v for t, v in zip(ts, y) if v != 0})


def potential_feasible_fm(p: PopulationComputer) -> bool:
    """Independent route: Fourier-Motzkin on A x <= -1 (small systems only)."""
    _, _, A = incidence(p)
    if not A:
        return True
    return exactlp.fourier_motzkin(A, [-1] * len(A))


# ------------------------------------------------------- diagnostics

def tmin_of(lhs, c: Configuration) -> int:
    return min(c[q] for q in set(lhs))


def speed_of(p: PopulationComputer, c: Configuration) -> int:
    """Sum over transitions of tmin squared."""
    return sum(tmin_of(lhs, c) ** 2 for lhs in p.delta)


def check_well_initialised(p: PopulationComputer, c: Configuration) -> bool:
    """C(I) + |H| <= 2n/3 (reachability is the caller's responsibility)."""
    ci = sum(c[q] for q in p.inputs)
    return 3 * (ci + p.helper_count()) <= 2 * c.n


def rapid_syntactic_violations(p: PopulationComputer) -> list[str]:
    """Violations of the syntactic rapidity conditions.

    1. all states but one have at most two transitions whose lhs contains them;
    2. every transition's lhs contains a non-input state (so input-only
       configurations are terminal; a sufficient check);
    3. an input state occurs at most once in any lhs and in no rhs.
    """
    out = []
    deg = p.out_degree()
    heavy = sorted((q for q, k in deg.items() if k > 2), key=lambda q: (-deg[q], q))
    if len(heavy) > 1:
        out.append("more than one state with out-degree above 2: "
                   + ", ".join(f"{q} ({deg[q]})" for q in heavy))
    inputs = set(p.inputs)
    for lhs, rhs in p.delta.items():
        if set(lhs) <= inputs:
            out.append(f"transition {', '.join(lhs)} uses input states only")
        for q in inputs:
            if lhs.count(q) > 1:
                out.append(f"input {q} occurs {lhs.count(q)} times in {', '.join(lhs)}")
            if q in rhs:
                out.append(f"input {q} is produced by {', '.join(lhs)} -> {', '.join(rhs)}")
    return out


def check_rapid_syntactic(p: PopulationComputer) -> bool:
    return not rapid_syntactic_violations(p)
