"""Shared independent oracles for the test suite.

These deliberately avoid the library's own computation paths: pmfs come
from exact integer binomial coefficients, duels from the full (k+1)^2
double sum, so agreement with the package is a genuine cross-check.
"""

from __future__ import annotations

import math

import numpy as np
import pytest


def oracle_pmf(k: int, p: float, i: int) -> float:
    """Brute-force product formula with an exact integer coefficient."""
    return math.comb(k, i) * p**i * (1.0 - p) ** (k - i)


def oracle_pmf_vector(k: int, p: float) -> np.ndarray:
    return np.array([oracle_pmf(k, p, i) for i in range(k + 1)])


def oracle_duel(k: int, p: float, q: float) -> tuple[float, float, float]:
    """Full (k+1)^2 outcome-grid enumeration of the duel triple."""
    pmf_p = oracle_pmf_vector(k, p)
    pmf_q = oracle_pmf_vector(k, q)
    outer = np.outer(pmf_p, pmf_q)
    idx = np.arange(k + 1)
    lt = float(outer[idx[:, None] < idx[None, :]].sum())
    eq = float(np.trace(outer))
    gt = float(outer[idx[:, None] > idx[None, :]].sum())
    return lt, eq, gt


@pytest.fixture(scope="session")
def prob_grid():
    """The 0.05-step probability grid used by the acceptance checks."""
    return [round(0.05 * i, 10) for i in range(21)]
