"""Stochastic runs: uniform random pairs for protocols, random enabled transitions for computers.

Seeds: ``trial_seeds(seed, k)`` spawns k children of ``numpy.random.SeedSequence(seed)``
and takes the first 32-bit word of each child's state.  Trial i of
``estimate`` always uses the i-th seed, so results are reproducible within
one build.  Interactions are counted one per sampled pair, including pairs
that enable no transition; divide by n for parallel time.
"""

from __future__ import annotations

import bisect
import csv
import io
import math
import random
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import core, engine
from .core import Configuration, PopulationComputer


@dataclass
class TrialResult:
    seed: int
    n: int
    interactions: int
    output: int | None
    capped: bool
    wall_time: float
    final: Configuration | None = None

    def row(self, trial: int) -> dict:
        out = "" if self.output is None else self.output
        return {"trial": trial, "seed": self.seed, "n": self.n, "interactions": self.interactions,
                "output": out, "capped": int(self.capped)}


@dataclass
class RunStats:
    trials: int
    mean: float
    stddev: float
    min: int
    max: int
    histogram: dict = field(default_factory=dict)
    results: list[TrialResult] = field(default_factory=list)

    @staticmethod
    def of(results: list[TrialResult]) -> "RunStats":
        if not results:
            raise ValueError("need at least one trial")
        xs = [r.interactions for r in results]
        mean = sum(xs) / len(xs)
        sd = math.sqrt(sum((v - mean) ** 2 for v in xs) / (len(xs) - 1)) if len(xs) > 1 else 0.0
        hist = Counter("capped" if r.capped else r.output for r in results)
        return RunStats(len(xs), mean, sd, min(xs), max(xs), dict(hist), results)

    def stderr(self) -> float:
        return self.stddev / math.sqrt(self.trials)


def trial_seeds(seed: int, k: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


# ------------------------------------------------------------ compiled form

class Engine:
    """Integer encoding of a binary helper-free protocol for the compiled loop."""

    def __init__(self, p: PopulationComputer):
        from .convert import LayeredProtocol
        if p.helper_count():
            raise ValueError("uniform pair simulation needs a protocol without helpers")
        if not p.is_binary():
            raise ValueError("uniform pair simulation needs a binary protocol")
        self.p = p
        if isinstance(p, LayeredProtocol):
            self.kind = 1
            base = p.base
            bidx = {q: i for i, q in enumerate(base.states)}
            B = len(base.states)
            self.labels = [""] * (4 * B)
            for s in p.states:
                q, o, t = p.decode(s)
                self.labels[4 * bidx[q] + 2 * o + t] = s
            r0, r1 = self._tables(base.delta, bidx, B)
            self.mark = -np.ones(B, np.int32)
            for q, m in p.mark.items():
                self.mark[bidx[q]] = m
        else:
            self.kind = 0
            self.labels = list(p.states)
            idx = {q: i for i, q in enumerate(self.labels)}
            r0, r1 = self._tables(p.delta, idx, len(idx))
            self.mark = -np.ones(1, np.int32)
        self.r0, self.r1 = r0, r1
        self.index = {s: i for i, s in enumerate(self.labels)}
        order = sorted(range(len(self.labels)), key=lambda i: self.labels[i])
        self.rank = np.empty(len(self.labels), np.int64)
        for r, i in enumerate(order):
            self.rank[i] = r

    @staticmethod
    def _tables(delta, idx, k):
        r0 = -np.ones((k, k), np.int32)
        r1 = -np.ones((k, k), np.int32)
        for (x, y), (u, v) in delta.items():
            i, j = idx[x], idx[y]
            r0[i, j], r1[i, j] = idx[u], idx[v]
            if i != j:
                r0[j, i], r1[j, i] = idx[v], idx[u]
        return r0, r1

    def encode(self, c: Configuration) -> np.ndarray:
        v = np.zeros(len(self.labels), np.int64)
        for q, k in c.items():
            v[self.index[q]] = k
        return v

    def decode(self, v: np.ndarray) -> Configuration:
        return Configuration({self.labels[i]: int(v[i]) for i in np.nonzero(v)[0]})

    def run(self, c0: Configuration, seed: int, cap: int) -> TrialResult:
        t = time.perf_counter()
        steps, counts, capped = engine.run(self.kind, self.r0, self.r1, self.mark, self.rank,
                                           self.encode(c0), seed, cap)
        final = self.decode(counts)
        return TrialResult(seed, c0.n, int(steps), self.p.output(final.support()), bool(capped),
                           time.perf_counter() - t, final)


def run_protocol(p: PopulationComputer | Engine, c0: Configuration, seed: int,
                 cap: int = 10**9) -> TrialResult:
    """Uniform random pairs until no pair enables a transition, or ``cap`` interactions."""
    eng = p if isinstance(p, Engine) else Engine(p)
    return eng.run(c0, seed, cap)


# ------------------------------------------------------ reference sampler

class PairSampler:
    """Exact unordered pair draws from a fixed count vector (pure Python)."""

    def __init__(self, c: Configuration, rng: random.Random):
        self.states = sorted(q for q, _ in c.items())
        self.prefix = []
        acc = 0
        for q in self.states:
            acc += c[q]
            self.prefix.append(acc)
        self.n = acc
        self.rng = rng

    def state_at(self, k: int) -> str:
        return self.states[bisect.bisect_right(self.prefix, k)]

    def draw(self) -> tuple[str, str]:
        i = self.rng.randrange(self.n)
        j = self.rng.randrange(self.n - 1)
        if j >= i:
            j += 1
        a, b = self.state_at(i), self.state_at(j)
        return (a, b) if a <= b else (b, a)


def pair_distribution(c: Configuration) -> dict[tuple[str, str], float]:
    """P({q, p}) = 2 C(q) C(p) / (n (n - 1)) and P({q, q}) = C(q) (C(q) - 1) / (n (n - 1))."""
    n = c.n
    qs = sorted(q for q, _ in c.items())
    out = {}
    for i, q in enumerate(qs):
        for p in qs[i:]:
            if q == p:
                out[(q, q)] = c[q] * (c[q] - 1) / (n * (n - 1))
            else:
                out[(q, p)] = 2 * c[q] * c[p] / (n * (n - 1))
    return out


def run_protocol_reference(p: PopulationComputer, c0: Configuration, seed: int,
                           cap: int = 10**7) -> TrialResult:
    """Slow pure-Python run of the uniform pair model, for cross-checking the compiled loop."""
    rng = random.Random(seed)
    t = time.perf_counter()
    c = c0
    steps = last = 0
    while steps < cap:
        if not any(core.enabled(p, c)):
            return TrialResult(seed, c.n, last, p.output(c.support()), False, time.perf_counter() - t, c)
        sampler = PairSampler(c, rng)
        while steps < cap:
            a, b = sampler.draw()
            steps += 1
            rhs = p.delta.get((a, b))
            if rhs is not None and rhs != (a, b):
                c = core.step(c, core.Transition((a, b), rhs))
                last = steps
                break
    return TrialResult(seed, c.n, steps, p.output(c.support()), bool(core.enabled(p, c)),
                       time.perf_counter() - t, c)


def run_computer_fair(p: PopulationComputer, c0: Configuration, seed: int,
                      cap: int = 10**6) -> TrialResult:
    """Uniformly random enabled transition per step; counts transitions, not pair draws."""
    rng = random.Random(seed)
    t = time.perf_counter()
    c = c0
    steps = 0
    while True:
        en = core.enabled(p, c)
        if not en:
            return TrialResult(seed, c.n, steps, p.output(c.support()), False, time.perf_counter() - t, c)
        if steps >= cap:
            return TrialResult(seed, c.n, steps, p.output(c.support()), True, time.perf_counter() - t, c)
        c = core.step(c, rng.choice(en))
        steps += 1


# ------------------------------------------------------------ aggregation

def _run_task(args) -> TrialResult:
    eng, c0, s, cap = args
    return eng.run(c0, s, cap)


def run_many(eng: Engine, tasks: list[tuple[Configuration, int]], cap: int, jobs: int = 1) -> list[TrialResult]:
    """Run (c0, seed) tasks, in worker processes when jobs > 1; order is preserved."""
    if jobs <= 1 or len(tasks) <= 1:
        return [eng.run(c0, s, cap) for c0, s in tasks]
    from concurrent.futures import ProcessPoolExecutor
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(_run_task, [(eng, c0, s, cap) for c0, s in tasks]))


def estimate(p: PopulationComputer | Engine, c0: Configuration, trials: int, seed: int,
             cap: int = 10**9, jobs: int = 1) -> RunStats:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    eng = p if isinstance(p, Engine) else Engine(p)
    return RunStats.of(run_many(eng, [(c0, s) for s in trial_seeds(seed, trials)], cap, jobs))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log y against log x."""
    lx = np.log(np.asarray(xs, float))
    ly = np.log(np.asarray(ys, float))
    return float(np.polyfit(lx, ly, 1)[0])


@dataclass
class BenchRow:
    n: int
    trials: int
    mean: float
    stddev: float
    min: int
    max: int
    capped: int = 0


def scaling_bench(p: PopulationComputer | Engine, sizes: Sequence[int], trials: int, seed: int,
                  make_input: Callable[[int, random.Random], Configuration],
                  cap: int = 10**10, jobs: int = 1) -> tuple[list[BenchRow], float]:
    """Mean interactions to termination per size and the log-log slope.

    ``make_input(n, rng)`` draws the initial configuration of each trial;
    size k uses seed ``trial_seeds(seed, len(sizes))[k]`` for both inputs
    and trial seeds.
    """
    eng = p if isinstance(p, Engine) else Engine(p)
    rows = []
    for n, s in zip(sizes, trial_seeds(seed, len(sizes))):
        rng = random.Random(s)
        tasks = [(make_input(n, rng), ts) for ts in trial_seeds(s, trials)]
        results = run_many(eng, tasks, cap, jobs)
        st = RunStats.of(results)
        rows.append(BenchRow(n, st.trials, st.mean, st.stddev, st.min, st.max,
                             sum(r.capped for r in results)))
    slope = loglog_slope([r.n for r in rows], [r.mean for r in rows]) if len(rows) >= 2 else float("nan")
    return rows, slope


def balanced_input(p: PopulationComputer, variables: Sequence[str]):
    """Input maker splitting n agents over the variables by a uniform random composition."""
    from .synth import input_config

    def make(n: int, rng: random.Random) -> Configuration:
        cuts = sorted(rng.randint(0, n) for _ in range(len(variables) - 1))
        parts = [b - a for a, b in zip([0] + cuts, cuts + [n])]
        return Configuration(input_config(p, dict(zip(variables, parts))))
    return make


# -------------------------------------------------------------------- csv

TRIAL_HEADER = ["trial", "seed", "n", "interactions", "output", "capped"]
BENCH_HEADER = ["n", "trials", "mean", "stddev", "min", "max"]


def trials_csv(results: Sequence[TrialResult]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, TRIAL_HEADER, lineterminator="\n")
    w.writeheader()
    for i, r in enumerate(results):
        w.writerow(r.row(i))
    return buf.getvalue()


def bench_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(BENCH_HEADER)
    for r in rows:
        w.writerow([r.n, r.trials, f"{r.mean:.6g}", f"{r.stddev:.6g}", r.min, r.max])
    return buf.getvalue()


def configuration_of(p: PopulationComputer, values: Mapping[str, int]) -> Configuration:
    """Initial configuration (inputs plus the helper multiset) for variable counts."""
    from .synth import input_config
    return core.initial(p, input_config(p, values))
