import math

import numpy as np
import pytest

from graphonlab.core import (
    GraphonLabError,
    ResolutionError,
    StepGraphon,
    WeightedGraph,
    embed_graph,
    graph_lp_norm,
    graphon_lp_norm,
    normalize,
)
from graphonlab.cutmetric import cut_norm_exact
from graphonlab.sampling import (
    ChernoffParams,
    DoublingFamily,
    SamplerConfig,
    chernoff_bound,
    chernoff_empirical,
    clique_sequence,
    cutoff_mass,
    expected_power_law_edges,
    latent_coords,
    power_law_graph,
    power_law_graphon,
    sample_g,
    sample_h,
    sparsification_bound,
    sparsify,
    sparsify_concentration_check,
)

TWO_BLOCK = StepGraphon.equipartition([[0.9, 0.2], [0.2, 0.6]])


def test_config_validation():
    with pytest.raises(ValueError):
        SamplerConfig(0)
    with pytest.raises(ValueError):
        SamplerConfig(5, rho=0)


def test_h_constant():
    G = sample_h(20, StepGraphon.constant(0.3), seed=9)
    B = G.dense()
    off = ~np.eye(20, dtype=bool)
    assert np.all(B[off] == 0.3) and np.all(np.diag(B) == 0)


def test_h_single_vertex():
    assert sample_h(1, TWO_BLOCK, 0).edge_count() == 0


def test_h_block_fraction():
    G, x = sample_h(2000, TWO_BLOCK, 4, keep_coords=True)
    assert np.all(np.diff(x) >= 0)
    B = G.dense()
    iu = np.triu_indices(2000, 1)
    assert abs(np.mean(B[iu] == 0.2) - 0.5) < 0.05


def test_coords_extend_as_prefix():
    assert np.array_equal(latent_coords(50, 3), latent_coords(100, 3)[:50])


def test_determinism():
    a = sample_g(300, TWO_BLOCK, 0.3, 11).dense()
    b = sample_g(300, TWO_BLOCK, 0.3, 11).dense()
    assert np.array_equal(a, b)
    assert not np.array_equal(a, sample_g(300, TWO_BLOCK, 0.3, 12).dense())


def test_sparsify_deterministic_regime():
    B = np.array([[0, 2, -3], [2, 0, 0], [-3, 0, 0]], dtype=float)
    H = WeightedGraph(np.ones(3), B)
    G = sparsify(H, 0.5, seed=1)
    assert np.array_equal(G.dense(), np.sign(B))
    assert not G.simple


def test_sparsify_empty():
    H = WeightedGraph(np.ones(4), np.zeros((4, 4)))
    assert sparsify(H, 0.5, 0).edge_count() == 0


def test_sparsify_rejects_loops():
    with pytest.raises(GraphonLabError):
        sparsify(WeightedGraph(np.ones(2), np.eye(2)), 1.0, 0)


def test_sparsify_expected_edges():
    rng = np.random.default_rng(0)
    n = 30
    B = np.triu(rng.uniform(-1.5, 1.5, (n, n)), 1)
    H = WeightedGraph(np.ones(n), B + B.T)
    rho = 0.6
    p = np.minimum(rho * np.abs(B[np.triu_indices(n, 1)]), 1)
    mean, sd = p.sum(), math.sqrt(np.sum(p * (1 - p)))
    counts = [sparsify(H, rho, 5, index=t).edge_count() for t in range(1000)]
    assert abs(np.mean(counts) - mean) <= 3 * sd / math.sqrt(1000)


def test_g_erdos_renyi():
    G = sample_g(400, StepGraphon.constant(1.0), 0.1, 2)
    assert G.simple
    m = G.edge_count()
    expect = 0.1 * 400 * 399 / 2
    assert abs(m - expect) < 4 * math.sqrt(expect)


def test_g_average_degree_grows():
    W = StepGraphon.constant(1.0)
    degs = []
    for n in (200, 400, 800, 1600):
        G = sample_g(n, W, n ** -0.5, 1)
        degs.append(2 * G.edge_count() / n)
    assert all(b > a for a, b in zip(degs, degs[1:]))


def test_hoeffding_u_statistic():
    n = 2000
    ok = 0
    for s in range(10):
        G = sample_h(n, TWO_BLOCK, s)
        mean = G.dense().sum() / (n * (n - 1))
        ok += abs(mean - TWO_BLOCK.mean()) < 0.05
    assert ok >= 9


def test_cutoff_mass():
    H = WeightedGraph(np.ones(2), np.array([[0, 3.0], [3.0, 0]]))
    assert cutoff_mass(H, 0.5) == pytest.approx(2 * 1 / 4)
    assert cutoff_mass(H, 0.1) == 0


# --- power law ---------------------------------------------------------------


def test_power_law_ranges():
    with pytest.raises(ValueError):
        power_law_graph(10, 1.2, 0.1, 0)
    with pytest.raises(ValueError):
        power_law_graph(10, 0.5, 1.0, 0)


def test_power_law_near_complete():
    G = power_law_graph(60, 0.01, 0.0, 3)
    assert G.edge_count() > 0.9 * 60 * 59 / 2


def test_power_law_expected_edges():
    mean, var = expected_power_law_edges(500, 0.5, 0.5)
    counts = [power_law_graph(500, 0.5, 0.5, s).edge_count() for s in range(200)]
    assert abs(np.mean(counts) - mean) <= 3 * math.sqrt(var / 200)


def test_power_law_graphon():
    assert power_law_graphon(0.5, 1).values[0, 0] == pytest.approx(4.0)
    for g in (2, 5, 17):
        assert graphon_lp_norm(power_law_graphon(0.5, g), 1) == pytest.approx(4.0)
    norms = [graphon_lp_norm(power_law_graphon(0.5, g), 3) for g in (4, 16, 64, 256)]
    assert all(b > a for a, b in zip(norms, norms[1:]))
    with pytest.raises(ValueError):
        power_law_graphon(1.0, 4)


# --- non-convergent families --------------------------------------------------------


def test_clique_sequence():
    G = clique_sequence(2)
    assert G.n == 8 and G.edge_count() == 1
    for idx in (2, 3, 4, 5):
        assert graph_lp_norm(clique_sequence(idx), 1) == pytest.approx(2.0 ** (-2 * idx) * (idx - 1) / idx, abs=1e-15)
    with pytest.raises(ResolutionError):
        clique_sequence(18)


def test_doubling_family():
    fam = DoublingFamily(4, seed=0, k=16)
    G1 = fam.graph(1)
    assert G1.n == 2 and G1.edge_count() == 1
    for n in range(1, 4):
        assert abs(fam.ratio(n) - 0.5) <= fam.eps(n)
        G, Gn = fam.graph(n + 1), fam.graph(n)
        assert G.n == 16 * Gn.n
        assert graph_lp_norm(G, 1) == pytest.approx(fam.density(n + 1))
        assert graph_lp_norm(G, 1) / graph_lp_norm(Gn, 1) == pytest.approx(fam.ratio(n))
        assert fam.successive_cut_bound(n) <= 6 * 0.75**n


def test_doubling_bound_is_a_bound():
    # check the tensor bound against an exact computation on the overlay at n = 1
    fam = DoublingFamily(2, seed=3, k=6)
    H = fam.factors[0]
    h = graph_lp_norm(H, 1)
    U = normalize(fam.graph(2))
    # natural overlay of G_1 onto G_2: every vertex of G_1 becomes a block of 6
    base = normalize(fam.graph(1))
    V = StepGraphon(U.lengths, base.values[np.ix_(np.repeat([0, 1], 6), np.repeat([0, 1], 6))])
    exact = cut_norm_exact(U - V, limit=12).lower
    assert exact <= fam.successive_cut_bound(1) + 1e-12
    assert h > 0


def test_doubling_guards():
    with pytest.raises(ResolutionError):
        DoublingFamily(7)
    with pytest.raises(GraphonLabError, match="could not certify quasirandomness"):
        DoublingFamily(3, k=4, certify="cut", retries=3)


# --- Chernoff ---------------------------------------------------------------------------


def test_chernoff_formula():
    assert chernoff_bound(ChernoffParams((), (), 1.0)) == 2.0
    p = ChernoffParams(tuple([0.5] * 60), tuple([1] * 60), 1.0)
    assert p.q == 30
    assert chernoff_bound(p) == pytest.approx(2 * math.exp(-10))
    p2 = ChernoffParams(tuple([0.5] * 60), tuple([1] * 60), 2.0)
    assert chernoff_bound(p2) == pytest.approx(2 * math.exp(-20))


def test_chernoff_validation():
    with pytest.raises(ValueError):
        ChernoffParams((0.5,), (2,), 1.0)
    with pytest.raises(ValueError):
        ChernoffParams((1.5,), (1,), 1.0)


@pytest.mark.parametrize("lam", [0.2, 0.5, 1.0, 2.0])
def test_chernoff_empirical_fair_signed(lam):
    n = 200
    params = ChernoffParams(tuple([0.5] * n), tuple((-1) ** i for i in range(n)), lam)
    assert chernoff_empirical(params, 100_000, 1) <= chernoff_bound(params)


def test_chernoff_empirical_deterministic():
    params = ChernoffParams(tuple([0.3] * 40), tuple([1] * 40), 0.5)
    assert chernoff_empirical(params, 1000, 5) == chernoff_empirical(params, 1000, 5)


# --- sparsification concentration -----------------------------------------------------


def test_sparsification_deterministic_H():
    B = np.ones((6, 6)) - np.eye(6)
    rep = sparsify_concentration_check(WeightedGraph(np.ones(6), B), 1.0, 0.1, 20, 0)
    assert rep["frequency"] == 0


def test_sparsification_guards():
    with pytest.raises(ResolutionError):
        sparsify_concentration_check(WeightedGraph(np.ones(21), np.zeros((21, 21))), 1.0, 0.5, 1, 0)
    with pytest.raises(ValueError):
        sparsify_concentration_check(WeightedGraph(np.ones(3), np.zeros((3, 3))), 0.5, 0.5, 1, 0)


def test_sparsification_bound_vacuous_flag():
    B = np.full((12, 12), 0.5)
    np.fill_diagonal(B, 0)
    H = WeightedGraph(np.ones(12), B)
    rep = sparsify_concentration_check(H, 1.0, 0.5, 50, 0)
    assert rep["bound"] == pytest.approx(sparsification_bound(H, 0.5))
    assert rep["vacuous"] == (rep["bound"] >= 1)
    assert rep["holds"]


def test_embed_normalization_consistent():
    G = sample_g(200, TWO_BLOCK, 0.5, 0)
    assert graphon_lp_norm(embed_graph(G), 1) == pytest.approx(graph_lp_norm(G, 1))
