"""Random graph models: W-random graphs, sparsification, power-law graphs,
the two non-convergent families, and the Chernoff bound used as an oracle.

Randomness comes from counter-based Philox streams keyed by
(seed, tag, index), so draws do not depend on call order and the latent
coordinates for n vertices are a prefix of those for any larger n.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import zlib

import numpy as np
import scipy.sparse as sp

from .core import (
    GraphonLabError,
    ResolutionError,
    StepGraphon,
    WeightedGraph,
    embed_graph,
    graph_lp_norm,
)
from .cutmetric import certified_upper, d_cut

MAX_VERTICES = 1 << 20


def stream(seed: int, tag: str, index: int = 0) -> np.random.Generator:
    key = [int(seed) & (2**63 - 1), zlib.crc32(tag.encode()), int(index)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(key)))


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    rho: float = 1.0
    seed: int = 0
    keep_coords: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if not 0 < self.rho <= 1:
            raise ValueError("rho must lie in (0, 1]")


def latent_coords(n: int, seed: int) -> np.ndarray:
    return stream(seed, "coord").random(n)


def sample_h(n: int, W: StepGraphon, seed: int, keep_coords: bool = False):
    """H(n, W): vertices at sorted uniform points x_i, edge weights W(x_i, x_j).

    Returns the graph, or (graph, sorted coordinates) with ``keep_coords``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.sort(latent_coords(n, seed))
    cls = np.minimum(np.searchsorted(W.breakpoints, x, side="right"), W.m - 1)
    beta = W.values[np.ix_(cls, cls)].copy()
    np.fill_diagonal(beta, 0.0)
    G = WeightedGraph(np.ones(n), beta)
    return (G, x) if keep_coords else G


def _upper_pairs(n: int):
    return np.triu_indices(n, 1)


def sparsify(H: WeightedGraph, rho: float, seed: int, index: int = 0) -> WeightedGraph:
    """G(H, rho): keep pair ij with probability min(rho |b_ij|, 1), weight sign(b_ij)."""
    if not 0 < rho <= 1:
        raise ValueError("rho must lie in (0, 1]")
    if not np.all(H.vertex_weights == 1):
        raise GraphonLabError("sparsify needs unit vertex weights")
    if np.any(H.diagonal() != 0):
        raise GraphonLabError("sparsify needs a loopless graph")
    n = H.n
    iu, ju = _upper_pairs(n)
    if H.is_sparse:
        b = np.asarray(H.beta[iu, ju]).ravel()
    else:
        b = H.beta[iu, ju]
    prob = np.minimum(rho * np.abs(b), 1.0)
    u = stream(seed, "sparsify", index).random(iu.size)
    keep = u < prob
    vals = np.sign(b[keep])
    r, c = iu[keep], ju[keep]
    beta = sp.coo_array((np.concatenate([vals, vals]), (np.concatenate([r, c]), np.concatenate([c, r]))),
                        shape=(n, n)).tocsr()
    return WeightedGraph(np.ones(n), beta, simple=bool(np.all(vals > 0)))


def sample_g(n: int, W: StepGraphon, rho: float, seed: int) -> WeightedGraph:
    """G(n, W, rho) = G(H(n, W), rho), in the vertex order of the H sample."""
    return sparsify(sample_h(n, W, seed), rho, seed)


# ---------------------------------------------------------------------------
# power-law model


def _check_power(alpha, beta):
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    if not 0 <= beta < 2 * alpha:
        raise ValueError("beta must lie in [0, 2 alpha)")


def power_law_probs(n: int, alpha: float, beta: float):
    _check_power(alpha, beta)
    iu, ju = _upper_pairs(n)
    prob = np.minimum(1.0, n**beta * ((iu + 1.0) * (ju + 1.0)) ** (-alpha))
    return iu, ju, prob


def expected_power_law_edges(n: int, alpha: float, beta: float) -> tuple[float, float]:
    """Mean and variance of the edge count."""
    _, _, prob = power_law_probs(n, alpha, beta)
    return float(prob.sum()), float(np.sum(prob * (1 - prob)))


def power_law_graph(n: int, alpha: float, beta: float, seed: int) -> WeightedGraph:
    """Simple graph on [n] with P(ij) = min(1, n^beta (ij)^-alpha), independently."""
    iu, ju, prob = power_law_probs(n, alpha, beta)
    keep = stream(seed, "powerlaw").random(prob.size) < prob
    r, c = iu[keep], ju[keep]
    ones = np.ones(2 * r.size)
    beta_m = sp.coo_array((ones, (np.concatenate([r, c]), np.concatenate([c, r]))), shape=(n, n)).tocsr()
    return WeightedGraph(np.ones(n), beta_m, simple=True)


def power_law_graphon(alpha: float, grid: int) -> StepGraphon:
    """Exact cell averages of (xy)^-alpha on the grid x grid equipartition."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1); (xy)^-alpha is not integrable otherwise")
    if grid < 1:
        raise ValueError("grid must be >= 1")
    e = np.linspace(0.0, 1.0, grid + 1)
    F = e ** (1 - alpha) / (1 - alpha)
    avg = np.diff(F) * grid
    return StepGraphon(np.full(grid, 1.0 / grid), np.outer(avg, avg))


# ---------------------------------------------------------------------------
# non-convergent families


def clique_sequence(idx: int) -> WeightedGraph:
    """A clique on idx vertices plus isolated vertices, idx * 2^idx vertices in all."""
    if idx < 2:
        raise ValueError("idx must be >= 2")
    n = idx * 2**idx
    if n > MAX_VERTICES:
        raise ResolutionError(f"{n} vertices exceeds the size guard")
    edges = [(i, j) for i in range(idx) for j in range(i + 1, idx)]
    return WeightedGraph.from_edges(n, edges, simple=True)


@dataclass
class DoublingFamily:
    """G_1 = single edge, G_(n+1) = G_n x H_n (tensor product).

    The H_n are Erdos-Renyi graphs of density 1/2 on ``k`` vertices, resampled
    until accepted. ``certify="density"`` accepts when | ||H_n||_1 - 1/2 | <= 4^-n;
    ``certify="cut"`` additionally demands a certified ||W^H_n - 1/2||_box <= 4^-n.
    """

    steps: int
    seed: int = 0
    k: int = 32
    certify: str = "density"
    retries: int = 100
    factors: list = field(default_factory=list, repr=False)
    attempts: list = field(default_factory=list)

    def __post_init__(self):
        if not 1 <= self.steps <= 6:
            raise ResolutionError("steps must lie in 1..6")
        if self.certify not in ("density", "cut"):
            raise ValueError("certify must be 'density' or 'cut'")
        for n in range(1, self.steps):
            self.factors.append(self._factor(n))

    def eps(self, n: int) -> float:
        return 4.0 ** (-n)

    def _factor(self, n: int) -> WeightedGraph:
        k = self.k
        iu, ju = _upper_pairs(k)
        for attempt in range(self.retries):
            g = stream(self.seed, "doubling", n * 1000 + attempt)
            keep = g.random(iu.size) < 0.5
            A = np.zeros((k, k))
            A[iu[keep], ju[keep]] = 1.0
            A = A + A.T
            H = WeightedGraph(np.ones(k), A, simple=True)
            if abs(graph_lp_norm(H, 1) - 0.5) > self.eps(n):
                continue
            if self.certify == "cut" and certified_upper(embed_graph(H) - 0.5) > self.eps(n):
                continue
            self.attempts.append(attempt + 1)
            return H
        raise GraphonLabError("could not certify quasirandomness")

    def density(self, n: int) -> float:
        """||G_n||_1 (multiplicative over tensor products)."""
        out = 0.5
        for H in self.factors[: n - 1]:
            out *= graph_lp_norm(H, 1)
        return out

    def ratio(self, n: int) -> float:
        """||G_(n+1)||_1 / ||G_n||_1 = ||H_n||_1."""
        return graph_lp_norm(self.factors[n - 1], 1)

    def successive_cut_bound(self, n: int) -> float:
        """Certified bound on d_box(G_(n+1)/||G_(n+1)||_1, G_n/||G_n||_1) under the
        natural overlay: the difference is W_n (x) (W^H/h - 1), whose cut norm is
        at most ||W_n||_1 ||W^H - h||_box / h, and ||W_n||_1 = 1."""
        H = self.factors[n - 1]
        h = graph_lp_norm(H, 1)
        return min(2.0, certified_upper(embed_graph(H) - h) / h)

    def vertex_count(self, n: int) -> int:
        return 2 * self.k ** (n - 1)

    def graph(self, n: int) -> WeightedGraph:
        if not 1 <= n <= self.steps:
            raise ValueError("step out of range")
        if self.vertex_count(n) > MAX_VERTICES:
            raise ResolutionError(f"G_{n} has {self.vertex_count(n)} vertices; exceeds the size guard")
        B = sp.csr_array(np.array([[0.0, 1.0], [1.0, 0.0]]))
        for H in self.factors[: n - 1]:
            B = sp.csr_array(sp.kron(B, sp.csr_array(H.beta)))
        return WeightedGraph(np.ones(B.shape[0]), B, simple=True)


def doubling_sequence(steps: int, seed: int, k: int = 32, certify: str = "density") -> DoublingFamily:
    return DoublingFamily(steps, seed, k, certify)


# ---------------------------------------------------------------------------
# Chernoff oracle


@dataclass(frozen=True)
class ChernoffParams:
    probs: tuple
    signs: tuple
    lam: float

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        signs = np.asarray(self.signs, dtype=int)
        if probs.shape != signs.shape:
            raise ValueError("probs and signs must have equal length")
        if np.any((probs < 0) | (probs > 1)):
            raise ValueError("probabilities must lie in [0, 1]")
        if not np.all(np.isin(signs, (-1, 1))):
            raise ValueError("signs must be +-1")
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        object.__setattr__(self, "probs", tuple(probs.tolist()))
        object.__setattr__(self, "signs", tuple(signs.tolist()))

    @property
    def q(self) -> float:
        return float(sum(self.probs))


def chernoff_bound(params: ChernoffParams) -> float:
    lam, q = params.lam, params.q
    if lam <= 1:
        return 2 * math.exp(-lam**2 * q / 3)
    return 2 * math.exp(-lam * q / 3)


def chernoff_empirical(params: ChernoffParams, draws: int, seed: int) -> float:
    """Monte-Carlo estimate of P(|X - E X| >= lam q) for X = sum s_i X_i."""
    probs = np.asarray(params.probs)
    signs = np.asarray(params.signs)
    g = stream(seed, "chernoff")
    X = np.zeros(draws)
    for (pv, s) in sorted(set(zip(probs.tolist(), signs.tolist()))):
        count = int(np.sum((probs == pv) & (signs == s)))
        X += s * g.binomial(count, pv, size=draws)
    mean = float(np.sum(signs * probs))
    return float(np.mean(np.abs(X - mean) >= params.lam * params.q - 1e-12))


def sparsification_bound(H: WeightedGraph, eps: float) -> float:
    n = H.n
    return 2.0 ** (n + 1) * math.exp(-min(eps, eps**2) * graph_lp_norm(H, 1) * n**2 / 24)


def sparsify_concentration_check(H: WeightedGraph, rho: float, eps: float, trials: int, seed: int) -> dict:
    """Empirical frequency of d_box(G(H), H) > eps ||H||_1 against its tail bound."""
    if rho != 1:
        raise ValueError("the concentration check is stated for rho = 1")
    if H.n > 20:
        raise ResolutionError("exact cut norms need at most 20 vertices")
    if np.any(np.abs(H.dense()) > 1):
        raise GraphonLabError("edge weights must lie in [-1, 1]")
    WH = embed_graph(H)
    threshold = eps * graph_lp_norm(H, 1)
    dists = np.array([d_cut(embed_graph(sparsify(H, 1.0, seed, t)), WH).upper for t in range(trials)])
    failures = int(np.sum(dists > threshold + 1e-12))
    bound = sparsification_bound(H, eps)
    return {
        "n": H.n,
        "trials": trials,
        "threshold": threshold,
        "failures": failures,
        "frequency": failures / trials,
        "bound": bound,
        "vacuous": bound >= 1,
        "holds": failures / trials <= bound,
        "median_distance": float(np.median(dists)),
    }


def cutoff_mass(H: WeightedGraph, rho: float) -> float:
    """(1/n^2) sum max(|b_ij| - 1/rho, 0): edge weight lost to the min(., 1) cap."""
    B = np.abs(H.dense())
    return float(np.sum(np.clip(B - 1 / rho, 0, None)) / H.n**2)
