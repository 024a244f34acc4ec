"""Optimal assignment against exhaustive permutation search.

The brute-force reference enumerates every injective pairing (permutations of
the larger side taken min(rows, cols) at a time), tracking the best total and,
among equal totals, the lexicographically smallest pair tuple.  On matrices up
to 6x6 that is at most 720 candidates, cheap enough to be the ground truth.
"""

from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from lanemap.assignment import Permutation, WeightMatrix, max_assignment, min_assignment
from lanemap.errors import InputDomainError


def _brute(values, maximize):
    v = np.asarray(values, dtype=float)
    r, c = v.shape
    if r == 0 or c == 0:
        return (), 0.0
    best = None
    if r <= c:
        candidates = (
            tuple((i, cols[i]) for i in range(r))
            for cols in itertools.permutations(range(c), r)
        )
    else:
        candidates = (
            tuple(sorted((rows[j], j) for j in range(c)))
            for rows in itertools.permutations(range(r), c)
        )
    for pairs in candidates:
        tot = sum(v[i, j] for i, j in pairs)
        key = (-tot if maximize else tot, pairs)
        if best is None or key < best[0]:
            best = (key, pairs, tot)
    return best[1], best[2]


# --- frozen cases -----------------------------------------------------------------

def test_all_ties_pick_the_diagonal():
    got = max_assignment(np.ones((3, 3)))
    assert got.pairs == ((0, 0), (1, 1), (2, 2))
    assert got.total == 3.0


def test_rectangular_keeps_min_side_pairs():
    got = max_assignment([[5.0, 1.0, 1.0], [1.0, 5.0, 1.0]])
    assert got == Permutation(pairs=((0, 0), (1, 1)), total=10.0)


def test_anti_diagonal_max_and_diagonal_min():
    m = [[0.0, 1.0], [1.0, 0.0]]
    assert max_assignment(m).pairs == ((0, 1), (1, 0))
    assert min_assignment(m).pairs == ((0, 0), (1, 1))
    assert min_assignment(m).total == 0.0


def test_tall_matrix_prefers_lowest_rows():
    # Both rows tie; the lexicographically smaller pairing uses row 0.
    assert max_assignment([[1.0], [1.0]]).pairs == ((0, 0),)
    assert max_assignment([[1.0, 1.0]]).pairs == ((0, 0),)


def test_empty_dimensions():
    assert max_assignment(np.zeros((0, 3))).pairs == ()
    assert max_assignment(np.zeros((3, 0))).pairs == ()
    assert max_assignment(np.zeros((0, 3))).total == 0.0


# --- randomized comparison ------------------------------------------------------------

def test_totals_match_brute_force_on_random_floats():
    rng = np.random.default_rng(314)
    for trial in range(300):
        r = int(rng.integers(1, 7))
        c = int(rng.integers(1, 7))
        vals = rng.normal(0.0, 10.0, size=(r, c))
        for maximize, fn in ((True, max_assignment), (False, min_assignment)):
            got = fn(vals)
            want_pairs, want_total = _brute(vals, maximize)
            assert got.total == pytest.approx(want_total, abs=1e-9), f"trial {trial}"
            assert len(got.pairs) == min(r, c)
            rows = [i for i, _ in got.pairs]
            cols = [j for _, j in got.pairs]
            assert rows == sorted(rows) and len(set(rows)) == len(rows)
            assert len(set(cols)) == len(cols)
            assert got.total == pytest.approx(sum(vals[i, j] for i, j in got.pairs), abs=1e-9)


def test_tie_break_is_lexicographically_smallest():
    # Small integer matrices force heavy degeneracy; the returned pairing must
    # equal the lexicographic minimum over all optimal pairings.
    rng = np.random.default_rng(2718)
    for trial in range(200):
        r = int(rng.integers(1, 6))
        c = int(rng.integers(1, 6))
        vals = rng.integers(0, 3, size=(r, c)).astype(float)
        for maximize, fn in ((True, max_assignment), (False, min_assignment)):
            got = fn(vals)
            want_pairs, want_total = _brute(vals, maximize)
            assert got.total == pytest.approx(want_total, abs=1e-9)
            assert got.pairs == want_pairs, f"trial {trial} maximize={maximize}: {vals.tolist()}"


def test_max_equals_negated_min():
    rng = np.random.default_rng(55)
    for _ in range(50):
        vals = rng.normal(size=(int(rng.integers(1, 6)), int(rng.integers(1, 6))))
        hi = max_assignment(vals)
        lo = min_assignment(-vals)
        assert hi.total == pytest.approx(-lo.total, abs=1e-9)
        assert hi.pairs == lo.pairs


# --- input validation -------------------------------------------------------------------

def test_rejects_bad_inputs():
    with pytest.raises(InputDomainError):
        max_assignment(np.zeros(3))
    with pytest.raises(InputDomainError):
        max_assignment([[math.nan, 1.0], [1.0, 1.0]])
    with pytest.raises(InputDomainError):
        max_assignment([[math.inf]])


def test_weight_matrix_labels():
    m = WeightMatrix(np.ones((2, 3)), row_ids=["a", "b"], col_ids=[0, 1, 2])
    assert m.values.shape == (2, 3)
    with pytest.raises(InputDomainError):
        WeightMatrix(np.ones((2, 3)), row_ids=["a"])
    with pytest.raises(InputDomainError):
        WeightMatrix(np.ones((2, 3)), col_ids=[1])
    with pytest.raises(InputDomainError):
        WeightMatrix(np.ones(4))
