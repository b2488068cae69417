import itertools

import numpy as np
import pytest

from graphonlab.core import StepGraphon, WeightedGraph


def random_step(rng, m, lo=-2.0, hi=2.0, equal=False):
    """Random symmetric step graphon with m classes."""
    if equal:
        lengths = np.full(m, 1.0 / m)
    else:
        lengths = rng.uniform(0.2, 1.0, m)
        lengths /= lengths.sum()
    V = rng.uniform(lo, hi, (m, m))
    return StepGraphon(lengths, (V + V.T) / 2)


def random_graph(rng, n, density=0.5, weighted=False, loops=False):
    B = (rng.random((n, n)) < density).astype(float)
    if weighted:
        B *= rng.uniform(0.1, 2.0, (n, n))
    B = np.triu(B, 0 if loops else 1)
    B = B + np.triu(B, 1).T
    return WeightedGraph(np.ones(n) if not weighted else rng.uniform(0.5, 2.0, n), B)


def brute_cut_norm(W):
    """max over all class subsets S, T of |sum_{S x T} lambda_i lambda_j w_ij|."""
    A = W.weighted()
    m = W.m
    best = 0.0
    for s in itertools.product([0, 1], repeat=m):
        f = np.array(s, dtype=float)
        for t in itertools.product([0, 1], repeat=m):
            best = max(best, abs(f @ A @ np.array(t, dtype=float)))
    return best


def brute_infty_to_one(W):
    A = W.weighted()
    best = 0.0
    for s in itertools.product([-1, 1], repeat=W.m):
        best = max(best, float(np.abs(np.array(s) @ A).sum()))
    return best


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance results, filled in by tests/test_acceptance.py
ACCEPTANCE: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0].rstrip("ab")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {key}: {detail}")
