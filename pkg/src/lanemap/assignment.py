"""Optimal one-to-one assignment (Hungarian method) for maximizing or
minimizing a total pairing weight.

Rectangular matrices are padded internally to square with a constant; padding
rows/columns never appear in the result, so |pairs| = min(rows, cols).  Among
equal-total optima the lexicographically smallest pairing is returned, which
keeps downstream artifacts byte-stable.  The tie-break walks the zero-reduced-
cost subgraph left by the solver, so it costs nothing when the optimum is
unique.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InputDomainError


@dataclass(slots=True)
class WeightMatrix:
    """A labelled weight matrix: values[i][j] scores pairing row_ids[i] with col_ids[j]."""

    values: np.ndarray
    row_ids: list = field(default_factory=list)
    col_ids: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InputDomainError(f"weight matrix must be 2-D, got shape {self.values.shape}")
        if self.row_ids and len(self.row_ids) != self.values.shape[0]:
            raise InputDomainError("row_ids length does not match matrix")
        if self.col_ids and len(self.col_ids) != self.values.shape[1]:
            raise InputDomainError("col_ids length does not match matrix")


@dataclass(frozen=True, slots=True)
class Permutation:
    """An assignment as (row, col) index pairs sorted by row, plus its total weight."""

    pairs: tuple[tuple[int, int], ...]
    total: float


def _hungarian_min(cost: list[list[float]], n: int) -> tuple[list[int], list[float], list[float]]:
    """O(n^3) shortest-augmenting-path Hungarian for a square min-cost matrix.

    Returns (col matched to each row, row potentials, col potentials).
    """
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)  # p[j]: 1-based row matched to column j
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            row = cost[i0 - 1]
            ui0 = u[i0]
            for j in range(1, n + 1):
                if used[j]:
                    continue
                cur = row[j - 1] - ui0 - v[j]
                if cur < minv[j]:
                    minv[j] = cur
                    way[j] = j0
                if minv[j] < delta:
                    delta = minv[j]
                    j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    match_row = [-1] * n
    for j in range(1, n + 1):
        if p[j]:
            match_row[p[j] - 1] = j - 1
    return match_row, u[1:], v[1:]


def _augment(r, tight, match_row, match_col, fixed_col, visited) -> bool:
    for j in tight[r]:
        if fixed_col[j] or visited[j]:
            continue
        visited[j] = True
        r2 = match_col[j]
        if r2 == -1 or _augment(r2, tight, match_row, match_col, fixed_col, visited):
            match_col[j] = r
            match_row[r] = j
            return True
    return False


def _lex_refine(cost, n, match_row, u, v, tol) -> list[int]:
    """Rewrite the matching to the lexicographically smallest one of equal cost.

    All optimal assignments are perfect matchings of the tight subgraph
    (reduced cost ~ 0), so we fix rows in order to the smallest feasible tight
    column, rerouting displaced rows through augmenting paths.
    """
    tight = [
        [j for j in range(n) if cost[i][j] - u[i] - v[j] <= tol]
        for i in range(n)
    ]
    match_col = [-1] * n
    for i, j in enumerate(match_row):
        match_col[j] = i
    fixed_col = [False] * n
    for i in range(n):
        cur = match_row[i]
        for j in tight[i]:
            if j >= cur:
                break
            if fixed_col[j]:
                continue
            saved_mr = match_row[:]
            saved_mc = match_col[:]
            displaced = match_col[j]
            match_col[cur] = -1
            match_row[i] = j
            match_col[j] = i
            match_row[displaced] = -1
            fixed_col[j] = True
            visited = [False] * n
            if _augment(displaced, tight, match_row, match_col, fixed_col, visited):
                break
            match_row[:] = saved_mr
            match_col[:] = saved_mc
            fixed_col[j] = False
        fixed_col[match_row[i]] = True
    return match_row


def _solve(values: np.ndarray, maximize: bool) -> Permutation:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise InputDomainError(f"weights must be 2-D, got shape {values.shape}")
    r, c = values.shape
    if r == 0 or c == 0:
        return Permutation(pairs=(), total=0.0)
    if not np.isfinite(values).all():
        raise InputDomainError("weights must be finite")

    n = max(r, c)
    padded = np.zeros((n, n))
    padded[:r, :c] = values if maximize else -values
    cost = (-padded).tolist()

    match_row, u, v = _hungarian_min(cost, n)

    scale = max(1.0, float(np.abs(values).max()))
    refined = _lex_refine(cost, n, match_row[:], u, v, tol=1e-9 * scale)

    def real_pairs(match):
        return tuple((i, j) for i, j in enumerate(match[:r]) if 0 <= j < c)

    def total_of(pairs):
        return float(sum(values[i, j] for i, j in pairs))

    pairs = real_pairs(refined)
    base_pairs = real_pairs(match_row)
    total, base_total = total_of(pairs), total_of(base_pairs)
    # The refinement must preserve optimality exactly; fall back if float
    # duals let a near-tie slip through.
    if (total < base_total) if maximize else (total > base_total):
        pairs, total = base_pairs, base_total
    return Permutation(pairs=pairs, total=total)


def max_assignment(values) -> Permutation:
    """Assignment maximizing the total weight; |pairs| = min(rows, cols)."""
    return _solve(values, maximize=True)


def min_assignment(values) -> Permutation:
    """Assignment minimizing the total weight; equals max_assignment on negated weights."""
    return _solve(values, maximize=False)
