"""Exact linear sum assignment over rectangular cost tables with forbidden pairs.

Solves min-cost maximum-cardinality matching: among all matchings that pair as
many rows with columns as the forbidden structure allows, the one with the
smallest total cost is returned, and among equal-cost optima the
lexicographically smallest pairing by (row, col) wins.  Forbidden pairs are
marked with ``FORBIDDEN`` (IEEE +inf) — a true sentinel, never a large finite
number, so no amount of accumulation can corrupt optimality.

The core is the Jonker–Volgenant shortest-augmenting-path algorithm with dual
variables, run on a conceptual (n+m)x(n+m) padding of the rectangular input:
each row/column gets a private "stay unmatched" edge priced above any possible
real total, which forces maximum cardinality while keeping every Dijkstra pass
feasible.  The duals are then reused to restrict the tie-break search to tight
edges only (complementary slackness: an edge can belong to an optimal matching
only if its reduced cost is zero).
"""

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

FORBIDDEN = math.inf

# Reduced costs at or below this are treated as tight during the tie-break.
# Exact ties (bit-equal entries) are exactly tight under the JV duals; the
# tolerance only matters for entries closer than 1e-9, far below the
# resolution of cosine (0..2) or metric-scale distances.
_TIGHT_TOL = 1e-9


class InvalidCost(ValueError):
    """A cost table contains NaN or negative entries."""


@dataclass(eq=False)
class CostMatrix:
    """Rectangular non-negative cost table; ``FORBIDDEN`` marks disallowed pairs.

    ``values`` is coerced to a float64 array of shape (rows, cols).  Rows are
    conventionally detections and columns tracklets, but nothing here cares.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise InvalidCost(f"cost table must be 2-D, got shape {v.shape}")
        if np.isnan(v).any():
            raise InvalidCost("cost table contains NaN")
        if np.isneginf(v).any():
            raise InvalidCost("cost table contains -inf")
        finite = v[np.isfinite(v)]
        if finite.size and float(finite.min()) < 0.0:
            raise InvalidCost("cost table contains negative entries")
        self.values = v

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Matching:
    """Result of :func:`solve`.

    ``pairs`` is sorted by row index; every row appears in exactly one of
    ``pairs`` / ``unmatched_rows`` and every column in exactly one of
    ``pairs`` / ``unmatched_cols``.  ``total_cost`` is the float64 sum of the
    matched entries in ``pairs`` order.
    """

    pairs: tuple
    unmatched_rows: tuple
    unmatched_cols: tuple
    total_cost: float


def as_cost_matrix(matrix) -> CostMatrix:
    if isinstance(matrix, CostMatrix):
        return matrix
    return CostMatrix(np.asarray(matrix, dtype=np.float64))


def apply_gate(matrix, gate: float) -> CostMatrix:
    """Forbid every entry strictly greater than ``gate``.

    ``gate=inf`` is the identity; ``gate=0`` forbids all strictly positive
    entries.  Always returns a new table; the input is never modified.
    """
    if math.isnan(gate):
        raise InvalidCost("gate must not be NaN")
    m = as_cost_matrix(matrix)
    gated = m.values.copy()
    gated[gated > gate] = FORBIDDEN
    return CostMatrix(gated)


def solve(matrix) -> Matching:
    """Min-cost maximum-cardinality assignment with deterministic tie-break.

    Rows/columns whose entries are all ``FORBIDDEN`` come back unmatched; the
    empty table yields the empty matching with cost 0.  Among equal-cost
    optima the lexicographically smallest sorted pairing is returned, so the
    result is a pure function of the input values.
    """
    cm = as_cost_matrix(matrix)
    values = cm.values
    n, m = values.shape
    if n == 0 or m == 0:
        return Matching((), tuple(range(n)), tuple(range(m)), 0.0)

    padded = _pad(values)
    row2col, col2row, u, v = _solve_square(padded)
    _lex_refine(padded, n, m, row2col, col2row, u, v)

    pairs = tuple((i, int(row2col[i])) for i in range(n) if row2col[i] < m)
    total = 0.0
    for i, j in pairs:
        total += values[i, j]
    unmatched_rows = tuple(i for i in range(n) if row2col[i] >= m)
    unmatched_cols = tuple(j for j in range(m) if col2row[j] >= n)
    return Matching(pairs, unmatched_rows, unmatched_cols, total)


def _pad(values: np.ndarray) -> np.ndarray:
    """(n, m) table -> (n+m, n+m) square with per-index unmatch edges.

    The unmatch price U = sum(finite) + 1 satisfies 2U > sum(finite) + U, so
    dropping a feasible real pair (which frees one row-dummy and one
    col-dummy edge, +2U, while saving at most sum(finite)) never pays off:
    the square optimum always has maximum real cardinality.  The dummy-dummy
    block is free so unused dummies pair among themselves.
    """
    n, m = values.shape
    finite = values[np.isfinite(values)]
    unmatched = float(finite.sum()) + 1.0
    size = n + m
    padded = np.full((size, size), np.inf)
    padded[:n, :m] = values
    padded[n:, m:] = 0.0
    idx = np.arange(n)
    padded[idx, m + idx] = unmatched
    jdx = np.arange(m)
    padded[n + jdx, jdx] = unmatched
    return padded


@njit(cache=True)
def _solve_square(cost):
    """Dense square JV: shortest augmenting paths with dual updates.

    Returns (row2col, col2row, u, v).  `cost` may contain +inf; every row
    must reach some finite column (guaranteed by the caller's padding).
    """
    n = cost.shape[0]
    row2col = np.full(n, -1, np.int64)
    col2row = np.full(n, -1, np.int64)
    u = np.zeros(n, np.float64)
    v = np.zeros(n, np.float64)

    dist = np.empty(n, np.float64)
    pred = np.empty(n, np.int64)
    done = np.empty(n, np.bool_)

    for source in range(n):
        for j in range(n):
            dist[j] = cost[source, j] - u[source] - v[j]
            pred[j] = source
            done[j] = False
        sink = -1
        shortest = 0.0
        while True:
            jmin = -1
            dmin = np.inf
            for j in range(n):
                if not done[j] and dist[j] < dmin:
                    dmin = dist[j]
                    jmin = j
            j = jmin
            done[j] = True
            shortest = dmin
            if col2row[j] == -1:
                sink = j
                break
            i = col2row[j]
            off = shortest - u[i]
            for j2 in range(n):
                if not done[j2]:
                    nd = off + cost[i, j2] - v[j2]
                    if nd < dist[j2]:
                        dist[j2] = nd
                        pred[j2] = i
        u[source] += shortest
        for j in range(n):
            if done[j] and j != sink:
                v[j] += dist[j] - shortest
                i = col2row[j]
                u[i] = cost[i, j] - v[j]
        j = sink
        while True:
            i = pred[j]
            col2row[j] = i
            row2col[i], j = j, row2col[i]
            if i == source:
                break
    return row2col, col2row, u, v


def _lex_refine(padded, n, m, row2col, col2row, u, v):
    """Rewire an optimal matching to the lexicographically smallest optimum.

    Greedy over real rows in ascending order: try to move row r to the
    smallest real column below its current one (an unmatched row has
    effective column m, so any real tight column is an improvement).  A move
    is legal iff the displaced row can be re-matched by an alternating path
    over tight edges ending at the freed column — then the new matching uses
    tight edges only and is still optimal.  Complementary slackness makes
    the tight graph exhaustive: no optimal matching uses a non-tight edge,
    so a failed search proves no optimum contains (r, c).  Earlier rows are
    frozen together with their columns once decided.
    """
    reduced = padded - u[:, None] - v[None, :]
    tight = np.isfinite(padded) & (reduced <= _TIGHT_TOL)
    size = n + m
    fixed_row = np.zeros(size, bool)
    fixed_col = np.zeros(size, bool)

    # Cheap skip: no real row has a tight real column left of its match.
    cols = np.arange(m)
    cap = np.minimum(row2col[:n], m)
    if not (tight[:n, :m] & (cols[None, :] < cap[:, None])).any():
        return

    for r in range(n):
        cap_r = min(row2col[r], m)
        for c in range(cap_r):
            if fixed_col[c] or not tight[r, c]:
                continue
            displaced = col2row[c]
            freed = row2col[r]
            row2col[r] = c
            col2row[c] = r
            row2col[displaced] = -1
            col2row[freed] = -1
            if _rematch(tight, row2col, col2row, displaced, freed, r, c,
                        fixed_row, fixed_col):
                break
            row2col[displaced] = c
            col2row[c] = displaced
            row2col[r] = freed
            col2row[freed] = r
        fixed_row[r] = True
        fixed_col[row2col[r]] = True


def _rematch(tight, row2col, col2row, start_row, free_col, banned_row,
             banned_col, fixed_row, fixed_col):
    """Alternating-path search over tight edges, flipping matches on success.

    Iterative DFS from the displaced row toward the freed column; a column is
    visited at most once per search (standard augmenting-path argument), and
    frozen rows/columns plus the forced pair are off limits.
    """
    size = tight.shape[0]
    seen = np.zeros(size, bool)
    stack = [(start_row, np.flatnonzero(tight[start_row]), 0)]
    trail = []
    while stack:
        row, cand, k = stack[-1]
        advanced = False
        while k < len(cand):
            col = int(cand[k])
            k += 1
            if seen[col] or col == banned_col or fixed_col[col]:
                continue
            seen[col] = True
            if col == free_col or col2row[col] == -1:
                trail.append((row, col))
                for rr, cc in reversed(trail):
                    row2col[rr] = cc
                    col2row[cc] = rr
                return True
            nxt = col2row[col]
            if nxt == banned_row or fixed_row[nxt]:
                continue
            stack[-1] = (row, cand, k)
            trail.append((row, col))
            stack.append((nxt, np.flatnonzero(tight[nxt]), 0))
            advanced = True
            break
        if not advanced:
            stack.pop()
            if trail:
                trail.pop()
    return False
