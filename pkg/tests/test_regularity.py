import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphonlab.core import (
    DominantNodeError,
    Partition,
    ResolutionError,
    StepGraphon,
    UpperRegularityViolation,
    WeightedGraph,
    graphon_lp_norm,
    normalize,
    step,
    truncate,
)
from graphonlab.cutmetric import d_cut
from graphonlab.regularity import (
    RegularityParams,
    densify,
    equitable_upper,
    equitize,
    equitize_bound,
    weak_regularity_graph,
    weak_regularity_l2,
    weak_regularity_l2_equitable,
    weak_regularity_lp,
    weak_regularity_upper,
)

from conftest import random_step

CHECKER = StepGraphon.equipartition([[1, -1], [-1, 1]])


def two_cliques(n=40):
    h = n // 2
    B = np.zeros((n, n))
    B[:h, :h] = 1
    B[h:, h:] = 1
    np.fill_diagonal(B, 0)
    return WeightedGraph(np.ones(n), B, simple=True)


def bipartite(n=40):
    h = n // 2
    B = np.zeros((n, n))
    B[:h, h:] = 1
    B[h:, :h] = 1
    return WeightedGraph(np.ones(n), B, simple=True)


# --- L2 -------------------------------------------------------------------


def test_l2_examples():
    rep = weak_regularity_l2(StepGraphon.constant(0.4), 0.3)
    assert rep.partition.size == 1 and rep.error_cut == pytest.approx(0, abs=1e-12)
    rep = weak_regularity_l2(CHECKER, 0.1)
    assert rep.iterations <= 1 and rep.error_cut == pytest.approx(0, abs=1e-12)


def test_l2_already_stepped(rng):
    W = random_step(rng, 6)
    P0 = Partition([0, 0, 1, 1, 2, 2], W.lengths)
    S = step(W, P0)
    rep = weak_regularity_l2(S, 0.2, P0)
    assert rep.partition == P0
    assert rep.error_cut == pytest.approx(0, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 10), st.sampled_from([0.2, 0.3, 0.5]))
@settings(max_examples=30, deadline=None)
def test_l2_guarantees(seed, m, eps):
    W = random_step(np.random.default_rng(seed), m)
    rep = weak_regularity_l2(W, eps, seed=seed)
    norm2 = graphon_lp_norm(W, 2)
    assert rep.certified
    assert rep.error_cut <= eps * norm2 + 1e-12
    assert rep.partition.size <= 4 ** math.ceil(1 / eps**2)
    # reported error reproduces
    assert d_cut(W, step(W, rep.partition)).upper == pytest.approx(rep.error_cut, abs=1e-9)
    for a, b in zip(rep.trace, rep.trace[1:]):
        assert b.energy - a.energy > a.witness**2 - 1e-9


def test_l2_refines_initial_partition(rng):
    W = random_step(rng, 8)
    P0 = Partition([0, 1] * 4, W.lengths)
    rep = weak_regularity_l2(W, 0.2, P0)
    assert rep.partition.refines(P0)


# --- equitize -------------------------------------------------------------


def test_equitize_bound_example():
    assert equitize_bound(0.0, 1.0, 8, 1, 64, 2.0) == pytest.approx(1.0)


def test_equitize_identity():
    W = StepGraphon.equipartition([[1, 0], [0, 1]])
    P = Partition([0, 1], W.lengths)
    eq = equitize(W, P, P, 1)
    assert eq.partition.size == 2
    assert np.allclose(eq.partition.class_measures, 0.5)


@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.integers(1, 9))
@settings(max_examples=40, deadline=None)
def test_equitize_postconditions(seed, m, k):
    rng = np.random.default_rng(seed)
    W = random_step(rng, m)
    Q = Partition(rng.integers(0, m, m), W.lengths)
    P = Partition.trivial(W.lengths)
    eq = equitize(W, P, Q, k)
    assert eq.partition.size == k
    assert np.allclose(eq.partition.class_measures, 1 / k, atol=1e-12)
    assert eq.partition.refines(eq.coarse)
    # the refined grid represents the same graphon
    assert d_cut(eq.graphon, W).upper == pytest.approx(0, abs=1e-12)
    err_Q = d_cut(W, step(W, Q)).upper
    err = d_cut(eq.graphon, step(eq.graphon, eq.partition)).upper
    assert err <= equitize_bound(err_Q, graphon_lp_norm(W, 2), Q.size, 1, k, 2.0) + 1e-9


def test_equitize_requires_refinement():
    W = StepGraphon.equipartition(np.eye(4))
    P = Partition([0, 0, 1, 1], W.lengths)
    Q = Partition([0, 1, 1, 0], W.lengths)
    with pytest.raises(Exception, match="refine"):
        equitize(W, P, Q, 2)


def test_equitize_grid_cap(monkeypatch):
    monkeypatch.setenv("GRAPHONLAB_MAX_CLASSES", "8")
    W = StepGraphon.constant(1)
    P = Partition.trivial(W.lengths)
    with pytest.raises(ResolutionError):
        equitize(W, P, P, 9)


def test_equitable_l2_needs_k():
    with pytest.raises(ResolutionError, match="eps too small for grid cap"):
        weak_regularity_l2_equitable(CHECKER, 0.3)


def test_equitable_l2_with_k(rng):
    W = random_step(rng, 5)
    rep = weak_regularity_l2_equitable(W, 0.5, k=16)
    assert rep.partition.size == 16
    assert np.allclose(rep.partition.class_measures, 1 / 16)
    assert rep.error_cut <= rep.extra["bound"] + 1e-9


# --- Lp --------------------------------------------------------------------


def test_lp_zero_graphon():
    rep = weak_regularity_lp(StepGraphon.constant(0.0), 1.5, 0.5)
    assert rep.error_cut == 0 and rep.partition.size == 1


def test_lp_needs_k():
    with pytest.raises(ResolutionError, match="eps too small for grid cap"):
        weak_regularity_lp(CHECKER, 1.5, 0.5)


def test_lp_truncation_example():
    W = StepGraphon([0.5, 0.5], [[4, 0], [0, 0]])
    p, eps = 1.5, 0.9
    norm = graphon_lp_norm(W, p)
    K = (3 / eps) ** 2 * norm
    _, tail = truncate(W, K)
    assert graphon_lp_norm(tail, 1) <= eps / 3 * norm
    rep = weak_regularity_lp(W, p, eps, k=8)
    assert rep.extra["K"] == pytest.approx(K)
    assert rep.partition.size == 8
    assert rep.error_cut <= eps * norm + 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.2, 1.5, 2.0, 3.0]), st.floats(0.5, 20))
@settings(max_examples=60, deadline=None)
def test_truncation_tail_identity(seed, p, K):
    W = random_step(np.random.default_rng(seed), 5, -10, 10)
    lo, hi = truncate(W, K)
    tail = graphon_lp_norm(W - lo, 1)
    assert tail == pytest.approx(graphon_lp_norm(hi, 1), abs=1e-12)
    assert tail <= graphon_lp_norm(W, p) ** p / K ** (p - 1) + 1e-9


# --- upper regular -----------------------------------------------------------


def test_params_derived():
    prm = RegularityParams(p=2, eps=0.3)
    assert prm.N == pytest.approx(400)
    assert prm.max_iterations == 400
    assert math.isinf(prm.K_trunc)
    assert RegularityParams(p=1.5, eps=0.5, C=2).K_trunc == pytest.approx(2 * 12**2)
    assert prm.theory_eta() < 1e-100
    with pytest.raises(ValueError):
        RegularityParams(p=2, eps=1.5)


@pytest.mark.parametrize("p,eps", [(2, 0.3), (1.5, 0.5), (3, 0.9), (1.2, 0.99)])
def test_rounding_bound_evaluation(p, eps):
    # at the largest admissible eta, 40 C (2 4^N eta)^(1 - 1/p) <= C eps / 4
    prm = RegularityParams(p=p, eps=eps, C=1)
    log_eta = -(prm.N + 1) * math.log(4) + prm.exponent * math.log(eps / 160)
    log_pert = math.log(40) + (1 - 1 / p) * (math.log(2) + prm.N * math.log(4) + log_eta)
    assert log_pert <= math.log(eps / 4)
    assert prm.theory_eta() == pytest.approx(math.exp(log_eta)) or log_eta < -745


def test_upper_constant():
    rep = weak_regularity_upper(StepGraphon.constant(0.8), RegularityParams(2, 0.3, C=1))
    assert rep.partition.size == 1 and rep.error_cut == pytest.approx(0, abs=1e-12)


def test_upper_already_stepped():
    W = StepGraphon.equipartition([[2, 0], [0, 2]])
    rep = weak_regularity_upper(W, RegularityParams(2, 0.1, C=1.5, eta=0.1))
    assert rep.certified
    assert rep.partition.size == 2
    assert rep.error_cut == pytest.approx(0, abs=1e-12)


@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
@settings(max_examples=30, deadline=None)
def test_upper_random_graphons(seed, m):
    W = random_step(np.random.default_rng(seed), m, 0, 2)
    W = W / graphon_lp_norm(W, 1)
    prm = RegularityParams(2, 0.3, C=graphon_lp_norm(W, 2) + 0.1, eta=0.05)
    try:
        rep = weak_regularity_upper(W, prm, seed=seed)
    except UpperRegularityViolation as exc:
        assert exc.value > prm.C
        assert np.all(exc.partition.class_measures >= prm.eta - 1e-12)
        return
    assert rep.partition.size <= 4 ** math.ceil(prm.N)
    assert np.all(rep.partition.class_measures >= prm.eta - 1e-12)
    if rep.certified:
        assert rep.error_cut <= prm.C * prm.eps + 1e-12


def test_graph_two_cliques():
    rep = weak_regularity_graph(two_cliques(), RegularityParams(2, 0.3, C=1.5, eta=0.05))
    assert rep.certified
    assert rep.partition.size == 2
    assert rep.error_cut <= 1.5 * 0.3


def test_graph_bipartite_violates_with_C1():
    # the residual 1/4 exceeds C eps, and the bipartition it forces steps to a
    # graphon of normalized L2 norm sqrt 2
    with pytest.raises(UpperRegularityViolation) as info:
        weak_regularity_graph(bipartite(), RegularityParams(2, 0.2, C=1.0, eta=0.05))
    assert info.value.value == pytest.approx(math.sqrt(2), rel=1e-9)


def test_graph_bipartite_with_room():
    rep = weak_regularity_graph(bipartite(), RegularityParams(2, 0.1, C=1.5, eta=0.05))
    assert rep.certified
    assert rep.partition.size == 2
    assert rep.error_cut == pytest.approx(0, abs=1e-9)


def test_graph_constant_weights():
    n = 20
    G = WeightedGraph(np.ones(n), np.full((n, n), 0.5))
    rep = weak_regularity_graph(G, RegularityParams(2, 0.3, C=1.0, eta=0.05))
    assert rep.partition.size == 1
    assert rep.error_cut == pytest.approx(0, abs=1e-12)


def test_graph_dominant_node():
    G = WeightedGraph(np.array([10.0, 1, 1, 1]), np.ones((4, 4)) - np.eye(4))
    with pytest.raises(DominantNodeError, match="dominant node"):
        weak_regularity_graph(G, RegularityParams(2, 0.3, C=1.0, eta=0.1))


def test_graph_planted_clique_violation():
    n = 100
    B = np.zeros((n, n))
    B[:10, :10] = 1
    np.fill_diagonal(B, 0)
    G = WeightedGraph(np.ones(n), B, simple=True)
    with pytest.raises(UpperRegularityViolation) as info:
        weak_regularity_graph(G, RegularityParams(2, 0.3, C=1.1, eta=0.05))
    exc = info.value
    assert exc.value > 1.1
    from graphonlab.regularity import _stepped_norm
    assert _stepped_norm(normalize(G), exc.partition, 2) == pytest.approx(exc.value)


def test_densify_quasirandom():
    rng = np.random.default_rng(7)
    n = 100
    B = np.triu((rng.random((n, n)) < 0.5).astype(float), 1)
    G = WeightedGraph(np.ones(n), B + B.T, simple=True)
    prm = RegularityParams(2, 0.3, C=1.1, eta=0.05)
    U, err = densify(G, prm)
    assert err <= 1.1 * 0.3
    assert graphon_lp_norm(U, 2) <= 1.1 + 1e-12
    assert d_cut(normalize(G), U).upper <= err + 1e-9


def test_densify_two_cliques():
    U, err = densify(two_cliques(), RegularityParams(2, 0.3, C=1.5, eta=0.05))
    from graphonlab.core import compress
    assert compress(U)[0].m == 2
    assert err < 0.1


def test_equitable_upper(rng):
    W = StepGraphon.equipartition([[1.2, 0.8], [0.8, 1.2]])
    rep = equitable_upper(W, RegularityParams(2, 0.3, C=1.5, eta=0.1), k=4)
    assert rep.partition.size == 4
    assert rep.error_cut <= 4 * 1.5 * 0.3
