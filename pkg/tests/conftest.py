"""Shared fixtures and dense brute-force oracles.

The oracles here deliberately use O(4^n) double loops over (S, T) pairs so
they stay independent of the fast transforms they check.
"""

import numpy as np
import pytest


def popcount(x: int) -> int:
    return int(x).bit_count()


def dense_and_matrix(n: int) -> np.ndarray:
    """M[S, T] = (-1)^(|S|-|T|) if T ⊆ S else 0, so effects = M @ table."""
    size = 1 << n
    m = np.zeros((size, size))
    for s in range(size):
        for t in range(size):
            if t & ~s == 0:
                m[s, t] = (-1.0) ** (popcount(s) - popcount(t))
    return m


def dense_or_matrix(n: int) -> np.ndarray:
    """Row S of the map or_table -> OR effects (empty-mask row zeroed)."""
    size = 1 << n
    full = size - 1
    m = np.zeros((size, size))
    for s in range(size):
        if s == 0:
            continue
        for t in range(size):
            if t & ~s == 0:
                m[s, full ^ t] -= (-1.0) ** (popcount(s) - popcount(t))
    return m


def brute_and_effects(table: np.ndarray) -> np.ndarray:
    return dense_and_matrix(int(np.log2(table.size))) @ table


def brute_or_effects(table: np.ndarray) -> np.ndarray:
    return dense_or_matrix(int(np.log2(table.size))) @ table


def brute_reconstruct(and_effects, or_effects, baseline, n):
    """Triggered-effect sums by direct subset/intersection tests."""
    size = 1 << n
    out = np.full(size, float(baseline))
    for t in range(size):
        for s in range(1, size):
            if s & ~t == 0:
                out[t] += and_effects[s]
            if s & t != 0:
                out[t] += or_effects[s]
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20240831)
