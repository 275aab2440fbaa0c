"""Exact rational feasibility for small linear systems.

Two independent routes are provided: a phase-one simplex with Bland's rule
over ``Fraction`` and Fourier-Motzkin elimination.  Both only answer
feasibility and return a witness point; they are meant for systems with at
most a few hundred rows.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

Matrix = list[list[Fraction]]


def _as_fraction_rows(rows) -> Matrix:
    return [[Fraction(v) for v in row] for row in rows]


def feasible_eq(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """A point x >= 0 with A x = b, or None if there is none.

    Phase-one simplex: one artificial variable per row, minimise their sum,
    Bland's rule against cycling.
    """
    A = _as_fraction_rows(A)
    b = [Fraction(v) for v in b]
    m = len(A)
    n = len(A[0]) if m else 0
    for i in range(m):
        if b[i] < 0:
            A[i] = [-v for v in A[i]]
            b[i] = -b[i]
    # tableau columns: n structural, m artificial, then rhs
    T = [A[i] + [Fraction(int(i == k)) for k in range(m)] + [b[i]] for i in range(m)]
    basis = [n + i for i in range(m)]
    # objective row: minimise sum of artificials, stored as reduced costs
    cost = [Fraction(0)] * (n + m + 1)
    for i in range(m):
        for j in range(n + m + 1):
            cost[j] -= T[i][j]
    for i in range(m):
        cost[n + i] += 1
    while True:
        enter = next((j for j in range(n + m) if cost[j] < 0), None)
        if enter is None:
            break
        best = None
        for i in range(m):
            if T[i][enter] > 0:
                ratio = T[i][-1] / T[i][enter]
                if best is None or ratio < best[0] or (ratio == best[0] and basis[i] < basis[best[1]]):
                    best = (ratio, i)
        if best is None:
            break  # unbounded direction cannot occur for the phase-one objective
        r = best[1]
        piv = T[r][enter]
        T[r] = [v / piv for v in T[r]]
        for i in range(m):
            if i != r and T[i][enter] != 0:
                f = T[i][enter]
                T[i] = [a - f * c for a, c in zip(T[i], T[r])]
        f = cost[enter]
        cost = [a - f * c for a, c in zip(cost, T[r])]
        basis[r] = enter
    if -cost[-1] != 0:
        return None
    x = [Fraction(0)] * n
    for i, j in enumerate(basis):
        if j < n:
            x[j] = T[i][-1]
    return x


def feasible_leq_nonneg(A: Sequence[Sequence], b: Sequence) -> list[Fraction] | None:
    """A point x >= 0 with A x <= b (slack variables added), or None."""
    m = len(A)
    rows = [list(A[i]) + [int(i == k) for k in range(m)] for i in range(m)]
    sol = feasible_eq(rows, b)
    if sol is None:
        return None
    return sol[: len(A[0])] if m else []


def fourier_motzkin(A: Sequence[Sequence], b: Sequence, max_rows: int = 20000) -> bool:
    """Decide whether A x <= b has a real solution (x unrestricted).

    Raises RuntimeError if intermediate systems exceed ``max_rows``.
    """
    rows = [([Fraction(v) for v in a], Fraction(c)) for a, c in zip(A, b)]
    nvars = len(A[0]) if rows else 0
    for j in range(nvars):
        pos, neg, zero = [], [], []
        for a, c in rows:
            (pos if a[j] > 0 else neg if a[j] < 0 else zero).append((a, c))
        new = zero
        for ap, cp in pos:
            for an, cn in neg:
                fp, fn = -an[j], ap[j]
                a = [fp * x + fn * y for x, y in zip(ap, an)]
                new.append((a, fp * cp + fn * cn))
        rows = _dedupe(new)
        if len(rows) > max_rows:
            raise RuntimeError("Fourier-Motzkin system too large")
    return all(c >= 0 for _, c in rows)


def _dedupe(rows):
    seen = {}
    for a, c in rows:
        scale = next((abs(v) for v in a if v != 0), None)
        if scale is None:
            key = (tuple(a), (c >= 0))
            seen.setdefault(key, (a, c))
            continue
        a = [v / scale for v in a]
        c = c / scale
        key = tuple(a)
        if key not in seen or seen[key][1] > c:
            seen[key] = (a, c)
    return list(seen.values())
