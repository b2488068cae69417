"""Homomorphism densities and the L^p counting bounds."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from .core import (
    GraphonLabError,
    ResolutionError,
    StepGraphon,
    WeightedGraph,
    compress,
    embed_graph,
    graphon_lp_norm,
)
from .cutmetric import d_cut

MAX_MOTIF_VERTICES = 8
MAX_ASSIGNMENTS = 10**8


@dataclass(frozen=True)
class MotifGraph:
    vertex_count: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        clean = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError("motifs have no loops")
            if not (0 <= u < self.vertex_count and 0 <= v < self.vertex_count):
                raise ValueError("edge endpoint out of range")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            seen.add(key)
            clean.append(key)
        object.__setattr__(self, "edges", tuple(clean))

    @classmethod
    def parse(cls, text: str) -> "MotifGraph":
        """Parse ``"1-2,2-3,3-1"`` or a built-in name (K2, K3, C4, P3, K4)."""
        text = text.strip()
        if text.upper() in BUILTINS:
            return BUILTINS[text.upper()]
        names: dict[str, int] = {}
        edges = []
        for tok in filter(None, (t.strip() for t in text.split(","))):
            parts = tok.split("-")
            if len(parts) != 2 or not all(parts):
                raise ValueError(f"bad motif edge {tok!r}")
            ends = []
            for p in parts:
                ends.append(names.setdefault(p.strip(), len(names)))
            edges.append(tuple(ends))
        if not names:
            raise ValueError("empty motif")
        return cls(len(names), tuple(edges))

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.zeros(self.vertex_count, dtype=int)
        for u, v in self.edges:
            d[u] += 1
            d[v] += 1
        return d

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max()) if self.vertex_count else 0

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def disjoint_union(self, other: "MotifGraph") -> "MotifGraph":
        k = self.vertex_count
        return MotifGraph(k + other.vertex_count, self.edges + tuple((u + k, v + k) for u, v in other.edges))


def _cycle(n):
    return MotifGraph(n, tuple((i, (i + 1) % n) for i in range(n)))


def _complete(n):
    return MotifGraph(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


BUILTINS = {
    "K2": _complete(2),
    "K3": _complete(3),
    "K4": _complete(4),
    "C4": _cycle(4),
    "P3": MotifGraph(3, ((0, 1), (1, 2))),
}


def _contract(F: MotifGraph, values: np.ndarray, lengths: np.ndarray) -> float:
    """Sum over maps V(F) -> classes by eliminating motif vertices one at a time,
    always the one with the fewest neighbours in the current factors."""
    factors = [((u, v), values) for u, v in F.edges]
    factors += [((v,), lengths) for v in range(F.vertex_count)]
    remaining = set(range(F.vertex_count))
    while remaining:
        def nbrs(x):
            out = set()
            for vars_, _ in factors:
                if x in vars_:
                    out.update(vars_)
            return out - {x}
        x = min(sorted(remaining), key=lambda v: len(nbrs(v)))
        out_vars = sorted(nbrs(x))
        involved = [f for f in factors if x in f[0]]
        factors = [f for f in factors if x not in f[0]]
        args = []
        for vars_, arr in involved:
            args += [arr, list(vars_)]
        args.append(out_vars)
        factors.append((tuple(out_vars), np.einsum(*args, optimize=True)))
        remaining.discard(x)
    return float(np.prod([np.asarray(arr).item() for _, arr in factors]))


def hom_density_graphon(F: MotifGraph, W: StepGraphon) -> float:
    if F.vertex_count > MAX_MOTIF_VERTICES:
        raise ResolutionError("motif too large")
    Wc, _ = compress(W)
    if float(Wc.m) ** F.vertex_count > MAX_ASSIGNMENTS:
        raise ResolutionError("too many class assignments")
    if F.vertex_count == 0:
        return 1.0
    return _contract(F, Wc.values, Wc.lengths)


def hom_density_graph(F: MotifGraph, G: WeightedGraph) -> float:
    return hom_density_graphon(F, embed_graph(G))


def counting_bound(F: MotifGraph, p: float, eps: float) -> float:
    """2m(m-1+p-D) (2 eps/(p-D))^((p-D)/(p-D+m-1)), D the max degree of F."""
    D, m = F.max_degree, F.edge_count
    if p <= D:
        raise GraphonLabError("no counting lemma below Delta")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    a = p - D
    return 2 * m * (m - 1 + a) * (2 * eps / a) ** (a / (a + m - 1))


def holder_bound(F: MotifGraph, W: StepGraphon) -> float:
    """||W||_D^m with D the max degree and m the edge count of F."""
    if F.edge_count == 0:
        return 1.0
    return graphon_lp_norm(W, F.max_degree) ** F.edge_count


# ---------------------------------------------------------------------------
# separable graphons w(x) w(y)


def separable_density(F: MotifGraph, lengths: np.ndarray, w: np.ndarray) -> float:
    """t(F, w(x)w(y)) = prod over vertices of E[w^deg] for step w."""
    return float(np.prod([np.sum(lengths * w**d) for d in F.degrees]))


def _power_integral(a, b, s):
    """Integral of x^-s over [a, b] (vectorized)."""
    if abs(s - 1) < 1e-15:
        return np.log(b / a)
    return (b ** (1 - s) - a ** (1 - s)) / (1 - s)


@dataclass
class Counterexample:
    n: int
    t_value: float
    l1_dist: float
    ld_norm: float
    u_norm: float
    moments: np.ndarray
    lengths: np.ndarray
    w: np.ndarray

    def graphon(self) -> StepGraphon:
        return StepGraphon(self.lengths, np.outer(self.w, self.w))


def geometric_grid(lo: float, per_decade: int = 64) -> np.ndarray:
    cells = max(1, math.ceil(per_decade * math.log10(1 / lo)))
    return np.geomspace(lo, 1.0, cells + 1)


def counterexample_family(F: MotifGraph, n: int, per_decade: int = 64) -> Counterexample:
    """W_n = w_n(x) w_n(y), w_n = 1 + u_n, u_n = (x ln n)^(-1/D) on [1/n, 1].

    Moments E[u_n^i] are sums of exact cell integrals over a geometric grid
    of [1/n, 1]; the step approximation (cell averages of w_n, plus the cell
    [0, 1/n) where w_n = 1) is returned for further use.
    """
    if n < 3:
        raise ValueError("n must be >= 3")
    D = F.max_degree
    if D < 2:
        raise ValueError("the family needs max degree >= 2")
    L = math.log(n)
    e = geometric_grid(1.0 / n, per_decade)
    a, b = e[:-1], e[1:]
    kmax = max(D, int(F.degrees.max()))
    # E[u^i] for i = 0..kmax
    mom = np.array([1.0] + [L ** (-i / D) * float(np.sum(_power_integral(a, b, i / D)))
                            for i in range(1, kmax + 1)])
    # E[w^k] = sum_i binom(k, i) E[u^i]
    wmom = np.array([sum(math.comb(k, i) * mom[i] for i in range(k + 1)) for k in range(kmax + 1)])
    t = float(np.prod([wmom[d] for d in F.degrees]))
    l1 = wmom[1] ** 2 - 1.0  # w >= 1, so |W - 1| = W - 1
    ld = wmom[D] ** (2.0 / D)
    avg_u = L ** (-1.0 / D) * _power_integral(a, b, 1.0 / D) / (b - a)
    lengths = np.concatenate([[1.0 / n], b - a])
    w = np.concatenate([[1.0], 1.0 + avg_u])
    lengths = lengths / lengths.sum()
    return Counterexample(n, t, float(l1), float(ld), float(mom[D] ** (1.0 / D)), mom, lengths, w)


def singular_family(F: MotifGraph, decades: int, per_decade: int = 64):
    """Step approximations of w(x) = x^(-1/D) on [10^-decades, 1] (zero below).

    Returns (lengths, cell averages of w). The densities t(F, w(x)w(y)) grow
    without bound as ``decades`` grows, while ||w(x)w(y)||_p stays bounded for p < D.
    """
    D = F.max_degree
    e = geometric_grid(10.0 ** (-decades), per_decade)
    a, b = e[:-1], e[1:]
    avg = _power_integral(a, b, 1.0 / D) / (b - a)
    lengths = np.concatenate([[e[0]], b - a])
    w = np.concatenate([[0.0], avg])
    return lengths / lengths.sum(), w


# ---------------------------------------------------------------------------


def counting_lemma_check(F: MotifGraph, U: StepGraphon, W: StepGraphon, p: float) -> dict:
    """|t(F,U) - t(F,W)| against the counting bound at eps = d_box(U, W)."""
    D = F.max_degree
    if p <= D:
        raise GraphonLabError("no counting lemma below Delta")
    nu, nw = graphon_lp_norm(U, p), graphon_lp_norm(W, p)
    if nu > 1 + 1e-12 or nw > 1 + 1e-12:
        raise GraphonLabError("both graphons need L^p norm at most 1")
    diff = abs(hom_density_graphon(F, U) - hom_density_graphon(F, W))
    cut = d_cut(U, W)
    bound = counting_bound(F, p, cut.upper)
    return {"difference": diff, "eps": cut.upper, "eps_method": cut.method,
            "bound": bound, "holds": diff <= bound + 1e-9}
