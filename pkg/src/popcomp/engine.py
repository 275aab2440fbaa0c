"""Compiled interaction loop for binary helper-free protocols.

States are integers.  A protocol is given either as dense successor tables
``r0[a, b], r1[a, b]`` over its own states (kind 0), or as tables over the
base states of a layered protocol plus a mark vector (kind 1), in which case
state ``4*q + 2*o + t`` is base state q with opinion o and token t, and
``rank`` orders the two agents of a pair as the label order does.

Agents are drawn by index through a Fenwick tree over state counts, so one
interaction costs O(log |Q|).  Null interactions are counted but skipped
cheaply; after a run of consecutive nulls the support is scanned once to
test for termination, with the scan interval doubling while the
configuration stays live.  The reported interaction count is the index of
the last effective interaction, i.e. the exact time of termination.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def fen_add(tree, i, v):
    i += 1
    n = tree.shape[0]
    while i < n:
        tree[i] += v
        i += i & (-i)


@njit(cache=True)
def fen_find(tree, k, top):
    """Smallest index whose prefix count exceeds k."""
    pos = 0
    step = top
    while step > 0:
        nxt = pos + step
        if nxt < tree.shape[0] and tree[nxt] <= k:
            pos = nxt
            k -= tree[nxt]
        step >>= 1
    return pos


@njit(cache=True)
def fen_build(counts):
    top = 1
    while top < counts.shape[0] + 1:
        top <<= 1
    tree = np.zeros(top + 1, np.int64)
    for i in range(counts.shape[0]):
        if counts[i]:
            fen_add(tree, i, counts[i])
    return tree, top


@njit(cache=True)
def fire(kind, r0, r1, mark, rank, a, b):
    if kind == 0:
        x = r0[a, b]
        if x < 0:
            return a, b
        return x, r1[a, b]
    if rank[a] > rank[b]:
        a, b = b, a
    q = a >> 2
    oa = (a >> 1) & 1
    ta = a & 1
    p = b >> 2
    ob = (b >> 1) & 1
    tb = b & 1
    q2 = r0[q, p]
    p2 = r1[q, p]
    if q2 < 0:
        q2 = q
        p2 = p
    ma = mark[q2]
    mb = mark[p2]
    if ma >= 0 and mb >= 0:
        cert = ma if q2 <= p2 else mb
    elif ma >= 0:
        cert = ma
    else:
        cert = mb
    if cert >= 0:
        return q2 * 4 + cert * 2 + 1, p2 * 4 + cert * 2 + 1
    if ta == 1 and tb == 0 and oa != ob:
        return q2 * 4 + oa * 2, p2 * 4 + oa * 2
    if tb == 1 and ta == 0 and oa != ob:
        return q2 * 4 + ob * 2, p2 * 4 + ob * 2
    if ta == 1 and tb == 1 and oa != ob:
        return q2 * 4 + oa * 2, p2 * 4 + ob * 2
    return q2 * 4 + oa * 2 + ta, p2 * 4 + ob * 2 + tb


@njit(cache=True)
def is_null(a, b, na, nb):
    return (na == a and nb == b) or (na == b and nb == a)


@njit(cache=True)
def is_terminal(kind, r0, r1, mark, rank, counts):
    S = counts.shape[0]
    for x in range(S):
        if counts[x] == 0:
            continue
        for y in range(x, S):
            if counts[y] == 0 or (x == y and counts[x] < 2):
                continue
            na, nb = fire(kind, r0, r1, mark, rank, x, y)
            if not is_null(x, y, na, nb):
                return False
    return True


@njit(cache=True)
def run(kind, r0, r1, mark, rank, counts0, seed, cap):
    """(interactions to termination, final counts, capped)."""
    np.random.seed(seed)
    counts = counts0.copy()
    n = counts.sum()
    if n < 2 or is_terminal(kind, r0, r1, mark, rank, counts):
        return 0, counts, False
    tree, top = fen_build(counts)
    steps = 0
    last = 0
    nulls = 0
    check_at = n
    while steps < cap:
        i = np.random.randint(n)
        j = np.random.randint(n - 1)
        if j >= i:
            j += 1
        a = fen_find(tree, i, top)
        b = fen_find(tree, j, top)
        steps += 1
        na, nb = fire(kind, r0, r1, mark, rank, a, b)
        if is_null(a, b, na, nb):
            nulls += 1
            if nulls >= check_at:
                if is_terminal(kind, r0, r1, mark, rank, counts):
                    return last, counts, False
                check_at *= 2
            continue
        nulls = 0
        check_at = n
        last = steps
        counts[a] -= 1
        counts[b] -= 1
        counts[na] += 1
        counts[nb] += 1
        fen_add(tree, a, -1)
        fen_add(tree, b, -1)
        fen_add(tree, na, 1)
        fen_add(tree, nb, 1)
    if is_terminal(kind, r0, r1, mark, rank, counts):
        return last, counts, False
    return steps, counts, True


@njit(cache=True)
def sample_pairs(counts, draws, seed):
    """Unordered state pairs drawn exactly as the interaction loop draws them.

    Returns an S x S matrix of counts with pairs stored at [min, max].
    """
    np.random.seed(seed)
    S = counts.shape[0]
    out = np.zeros((S, S), np.int64)
    n = counts.sum()
    tree, top = fen_build(counts)
    for _ in range(draws):
        i = np.random.randint(n)
        j = np.random.randint(n - 1)
        if j >= i:
            j += 1
        a = fen_find(tree, i, top)
        b = fen_find(tree, j, top)
        if a <= b:
            out[a, b] += 1
        else:
            out[b, a] += 1
    return out
