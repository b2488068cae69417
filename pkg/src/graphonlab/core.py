"""Weighted graphs, step graphons, partitions and the basic operations on them.

Every graphon handled by the package is a step function on a finite interval
partition of [0, 1].  Analytic graphons enter through
:meth:`StepGraphon.from_function`, which averages them over an equipartition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
import math

import numpy as np
import scipy.sparse as sp

ATOL = 1e-9
GRID_TOL = 1e-12


class GraphonLabError(Exception):
    """Base class for errors raised by the package."""


class ResolutionError(GraphonLabError):
    """A grid, enumeration or size guard was exceeded."""


class DominantNodeError(GraphonLabError):
    """A vertex carries more than an eta fraction of the total weight."""


class UpperRegularityViolation(GraphonLabError):
    """Raised when a partition with large parts has a stepped norm above C.

    ``partition`` is the certificate and ``value`` its stepped L^p norm.
    """

    def __init__(self, message, partition=None, value=None):
        super().__init__(message)
        self.partition = partition
        self.value = value


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def _symmetrize(values: np.ndarray, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise ValueError(f"{what} must be a square matrix")
    if not np.array_equal(values, values.T):
        scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
        if np.max(np.abs(values - values.T)) > GRID_TOL * scale:
            raise ValueError(f"{what} is not symmetric")
        values = (values + values.T) / 2
    return values


# ---------------------------------------------------------------------------
# Weighted graphs


@dataclass(frozen=True, eq=False)
class WeightedGraph:
    """A graph with positive vertex weights and symmetric real edge weights.

    ``beta`` is either a dense ndarray or a scipy sparse matrix; loops
    (diagonal entries) are allowed unless ``simple`` is set.
    """

    vertex_weights: np.ndarray
    beta: np.ndarray | sp.sparray
    simple: bool = False

    def __post_init__(self):
        w = _readonly(self.vertex_weights).ravel()
        if w.size and np.any(w <= 0):
            raise ValueError("vertex weights must be positive")
        object.__setattr__(self, "vertex_weights", w)
        n = w.size
        b = self.beta
        if sp.issparse(b):
            b = sp.csr_array(b, dtype=float)
            if b.shape != (n, n):
                raise ValueError("edge weight matrix has the wrong shape")
            if (abs(b - b.T) > GRID_TOL).nnz:
                raise ValueError("edge weights are not symmetric")
            b.eliminate_zeros()
        else:
            b = _symmetrize(np.asarray(b, dtype=float).reshape(n, n), "edge weight matrix")
            b.setflags(write=False)
        object.__setattr__(self, "beta", b)
        if self.simple:
            if not np.all(w == 1):
                raise ValueError("simple graphs have unit vertex weights")
            _, _, vals = self.nonzero_pairs()
            if np.any(vals != 1):
                raise ValueError("simple graphs have 0/1 edge weights")
            if np.any(self.diagonal() != 0):
                raise ValueError("simple graphs have no loops")

    # construction -----------------------------------------------------

    @classmethod
    def from_edges(cls, n_or_weights, edges, simple: bool = False) -> "WeightedGraph":
        """Build a sparse graph from ``(i, j, w)`` triples or ``(i, j)`` pairs.

        Each unordered pair is listed once; the symmetric entry is implied.
        """
        if np.ndim(n_or_weights) == 0:
            weights = np.ones(int(n_or_weights))
        else:
            weights = np.asarray(n_or_weights, dtype=float)
        n = weights.size
        rows, cols, vals = [], [], []
        for e in edges:
            i, j = int(e[0]), int(e[1])
            w = float(e[2]) if len(e) > 2 else 1.0
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"edge ({i}, {j}) out of range")
            rows.append(i)
            cols.append(j)
            vals.append(w)
            if i != j:
                rows.append(j)
                cols.append(i)
                vals.append(w)
        b = sp.coo_array((vals, (rows, cols)), shape=(n, n)).tocsr()
        b.sum_duplicates()
        return cls(weights, b, simple=simple)

    @classmethod
    def from_matrix(cls, beta, vertex_weights=None, simple: bool = False) -> "WeightedGraph":
        beta = np.asarray(beta, dtype=float)
        if vertex_weights is None:
            vertex_weights = np.ones(beta.shape[0])
        return cls(vertex_weights, beta, simple=simple)

    @classmethod
    def simple_graph(cls, n: int, edges) -> "WeightedGraph":
        return cls.from_edges(n, [(i, j) for i, j in edges], simple=True)

    # accessors --------------------------------------------------------

    @property
    def n(self) -> int:
        return self.vertex_weights.size

    @cached_property
    def total_weight(self) -> float:
        return float(np.sum(self.vertex_weights))

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.beta)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            return self.beta.toarray()
        return np.array(self.beta)

    def diagonal(self) -> np.ndarray:
        return np.asarray(self.beta.diagonal(), dtype=float)

    def nonzero_pairs(self):
        """Rows, columns and values over all ordered pairs with nonzero weight."""
        if self.is_sparse:
            coo = self.beta.tocoo()
            return coo.row, coo.col, coo.data
        r, c = np.nonzero(self.beta)
        return r, c, self.beta[r, c]

    @property
    def edges(self) -> dict[tuple[int, int], float]:
        r, c, v = self.nonzero_pairs()
        return {(int(i), int(j)): float(x) for i, j, x in zip(r, c, v) if i <= j}

    def edge_count(self) -> int:
        r, c, _ = self.nonzero_pairs()
        return int(np.sum(r < c) + np.sum(r == c))

    def subset_weight(self, S) -> float:
        return float(np.sum(self.vertex_weights[list(S)]))

    def measures(self) -> np.ndarray:
        """Vertex weights as fractions of the total weight."""
        return self.vertex_weights / self.total_weight


def _require_nonempty(G: WeightedGraph):
    if G.n == 0:
        raise GraphonLabError("empty graph")


def graph_lp_norm(G: WeightedGraph, p: float) -> float:
    """The L^p norm of G: sum over ordered pairs (loops included) of
    (a_i a_j / a_G^2) |b_ij|^p, to the power 1/p."""
    _require_nonempty(G)
    _check_p(p)
    r, c, v = G.nonzero_pairs()
    if v.size == 0:
        return 0.0
    if math.isinf(p):
        return float(np.max(np.abs(v)))
    mu = G.measures()
    return float(np.sum(mu[r] * mu[c] * np.abs(v) ** p) ** (1.0 / p))


def edge_density(G: WeightedGraph, S, T) -> float:
    """Weighted average edge weight between vertex sets S and T."""
    S = np.asarray(sorted(set(S)), dtype=int)
    T = np.asarray(sorted(set(T)), dtype=int)
    if S.size == 0 or T.size == 0:
        raise GraphonLabError("empty block")
    a = G.vertex_weights
    aS, aT = a[S].sum(), a[T].sum()
    if G.is_sparse:
        block = G.beta[S][:, T].toarray()
    else:
        block = G.beta[np.ix_(S, T)]
    return float(a[S] @ block @ a[T] / (aS * aT))


# ---------------------------------------------------------------------------
# Step graphons


def _check_p(p):
    if not (p >= 1):
        raise ValueError(f"p must be >= 1 or inf, got {p}")


@dataclass(frozen=True, eq=False)
class StepGraphon:
    """Symmetric step function with value ``values[i, j]`` on ``J_i x J_j``.

    ``lengths`` are the Lebesgue measures of the consecutive intervals J_i.
    """

    lengths: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        lengths = np.asarray(self.lengths, dtype=float).ravel()
        if lengths.size == 0:
            raise ValueError("a step graphon needs at least one class")
        if np.any(lengths <= 0):
            raise ValueError("class lengths must be positive")
        if abs(lengths.sum() - 1.0) > GRID_TOL * max(1, lengths.size):
            raise ValueError(f"class lengths sum to {lengths.sum()!r}, not 1")
        values = _symmetrize(np.asarray(self.values, dtype=float).reshape(lengths.size, lengths.size),
                             "graphon values")
        object.__setattr__(self, "lengths", _readonly(lengths))
        object.__setattr__(self, "values", _readonly(values))

    @classmethod
    def constant(cls, c: float) -> "StepGraphon":
        return cls([1.0], [[c]])

    @classmethod
    def equipartition(cls, values) -> "StepGraphon":
        values = np.asarray(values, dtype=float)
        m = values.shape[0]
        return cls(np.full(m, 1.0 / m), values)

    @classmethod
    def from_function(cls, f, n: int, cell_integral=None) -> "StepGraphon":
        """Average a symmetric function over the n x n equipartition grid.

        ``cell_integral(a, b, c, d)`` should return the integral of f over
        ``[a, b] x [c, d]`` (vectorized); without it a 4 x 4 midpoint rule is
        used in every cell.
        """
        edges = np.linspace(0.0, 1.0, n + 1)
        h = 1.0 / n
        if cell_integral is not None:
            a, b = edges[:-1][:, None], edges[1:][:, None]
            c, d = edges[:-1][None, :], edges[1:][None, :]
            values = np.asarray(cell_integral(a, b, c, d), dtype=float) / h**2
        else:
            offsets = (np.arange(4) + 0.5) / 4 * h
            pts = (edges[:-1][:, None] + offsets[None, :]).ravel()
            X, Y = np.meshgrid(pts, pts, indexing="ij")
            vals = np.asarray(f(X, Y), dtype=float)
            values = vals.reshape(n, 4, n, 4).mean(axis=(1, 3))
        return cls(np.full(n, h), (values + values.T) / 2)

    @property
    def m(self) -> int:
        return self.lengths.size

    @property
    def breakpoints(self) -> np.ndarray:
        """Right endpoints of the classes (the last one is 1)."""
        b = np.cumsum(self.lengths)
        b[-1] = 1.0
        return b

    def weighted(self) -> np.ndarray:
        """Matrix of cell integrals lambda_i lambda_j v_ij."""
        return self.lengths[:, None] * self.values * self.lengths[None, :]

    def mean(self) -> float:
        return float(self.weighted().sum())

    def is_equipartition(self) -> bool:
        return bool(np.allclose(self.lengths, 1.0 / self.m, rtol=0, atol=GRID_TOL))

    def with_values(self, values) -> "StepGraphon":
        return StepGraphon(self.lengths, values)

    def permute(self, perm) -> "StepGraphon":
        """Reorder classes: new class k is old class ``perm[k]``."""
        perm = np.asarray(perm, dtype=int)
        return StepGraphon(self.lengths[perm], self.values[np.ix_(perm, perm)])

    def __call__(self, x, y):
        idx_x = np.minimum(np.searchsorted(self.breakpoints, x, side="right"), self.m - 1)
        idx_y = np.minimum(np.searchsorted(self.breakpoints, y, side="right"), self.m - 1)
        return self.values[idx_x, idx_y]

    # arithmetic on a common grid --------------------------------------

    def _binary(self, other, op):
        if isinstance(other, StepGraphon):
            a, b = common_grid(self, other)
            return StepGraphon(a.lengths, op(a.values, b.values))
        return StepGraphon(self.lengths, op(self.values, float(other)))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda x, y: y - x)

    def __mul__(self, c):
        return StepGraphon(self.lengths, self.values * float(c))

    __rmul__ = __mul__

    def __truediv__(self, c):
        return StepGraphon(self.lengths, self.values / float(c))

    def __neg__(self):
        return StepGraphon(self.lengths, -self.values)


def graphon_lp_norm(W: StepGraphon, p: float) -> float:
    _check_p(p)
    if math.isinf(p):
        return float(np.max(np.abs(W.values)))
    lam = W.lengths
    return float(np.sum(lam[:, None] * lam[None, :] * np.abs(W.values) ** p) ** (1.0 / p))


def lp_distance(U: StepGraphon, W: StepGraphon, p: float = 1.0) -> float:
    return graphon_lp_norm(U - W, p)


def embed_graph(G: WeightedGraph) -> StepGraphon:
    """The associated graphon W^G: vertex i occupies an interval of length a_i / a_G."""
    _require_nonempty(G)
    return StepGraphon(G.measures(), G.dense())


def normalize(G: WeightedGraph) -> StepGraphon:
    """W^G / ||G||_1."""
    norm = graph_lp_norm(G, 1)
    if norm == 0:
        raise GraphonLabError("no edges")
    return embed_graph(G) / norm


def truncate(W: StepGraphon, K: float) -> tuple[StepGraphon, StepGraphon]:
    """Split W into W 1_{|W| <= K} and W 1_{|W| > K}."""
    if not K > 0:
        raise ValueError("truncation level must be positive")
    keep = np.abs(W.values) <= K
    return (W.with_values(np.where(keep, W.values, 0.0)),
            W.with_values(np.where(keep, 0.0, W.values)))


def inner_product(U: StepGraphon, W: StepGraphon) -> float:
    if U.m != W.m or not np.allclose(U.lengths, W.lengths, rtol=0, atol=GRID_TOL):
        raise GraphonLabError("mismatched grids; refine to a common grid first")
    return float(np.sum(U.weighted() * W.values))


# ---------------------------------------------------------------------------
# Grids


def _merge_breakpoints(*bps: np.ndarray) -> np.ndarray:
    allb = np.sort(np.concatenate(bps))
    keep = [allb[0]]
    for b in allb[1:]:
        if b - keep[-1] > GRID_TOL:
            keep.append(b)
    out = np.array(keep)
    out[-1] = 1.0
    return out


def _parents(new_bps: np.ndarray, old_bps: np.ndarray) -> np.ndarray:
    starts = np.concatenate([[0.0], new_bps[:-1]])
    mids = (starts + new_bps) / 2
    return np.minimum(np.searchsorted(old_bps, mids, side="right"), old_bps.size - 1)


def refine_to(W: StepGraphon, breakpoints) -> tuple[StepGraphon, np.ndarray]:
    """Express W on the grid generated by its own breakpoints and ``breakpoints``.

    Returns the refined graphon and, for each new class, its parent class in W.
    """
    bps = _merge_breakpoints(W.breakpoints, np.asarray(breakpoints, dtype=float))
    lengths = np.diff(np.concatenate([[0.0], bps]))
    parent = _parents(bps, W.breakpoints)
    return StepGraphon(lengths, W.values[np.ix_(parent, parent)]), parent


def common_grid(U: StepGraphon, W: StepGraphon) -> tuple[StepGraphon, StepGraphon]:
    """Both graphons expressed on the common refinement of their grids."""
    if U.m == W.m and np.allclose(U.lengths, W.lengths, rtol=0, atol=GRID_TOL):
        return U, StepGraphon(U.lengths, W.values)
    Ur, _ = refine_to(U, W.breakpoints)
    Wr, _ = refine_to(W, U.breakpoints)
    return Ur, StepGraphon(Ur.lengths, Wr.values)


def overlap_matrix(src_lengths, dst_lengths) -> np.ndarray:
    """M[i, a] = measure of (source interval i) intersected with (target interval a)."""
    s_hi = np.cumsum(src_lengths)
    s_lo = s_hi - src_lengths
    d_hi = np.cumsum(dst_lengths)
    d_lo = d_hi - dst_lengths
    lo = np.maximum(s_lo[:, None], d_lo[None, :])
    hi = np.minimum(s_hi[:, None], d_hi[None, :])
    M = np.clip(hi - lo, 0.0, None)
    M[M < GRID_TOL * 1e-3] = 0.0
    return M


def regrid(W: StepGraphon, lengths) -> StepGraphon:
    """Step W onto an arbitrary interval partition given by ``lengths``."""
    lengths = np.asarray(lengths, dtype=float)
    M = overlap_matrix(W.lengths, lengths)
    blocks = M.T @ W.values @ M
    return StepGraphon(lengths, blocks / np.outer(lengths, lengths))


def twin_classes(W: StepGraphon) -> np.ndarray:
    """Label classes so that classes with identical rows share a label."""
    _, labels = np.unique(W.values, axis=0, return_inverse=True)
    labels = np.asarray(labels).ravel()
    return Partition(labels, W.lengths).labels


def compress(W: StepGraphon) -> tuple[StepGraphon, np.ndarray]:
    """Merge twin classes; the result is the same function on a coarser grid."""
    labels = twin_classes(W)
    k = labels.max() + 1
    if k == W.m:
        return W, labels
    first = np.array([np.flatnonzero(labels == a)[0] for a in range(k)])
    lengths = np.bincount(labels, weights=W.lengths, minlength=k)
    return StepGraphon(lengths, W.values[np.ix_(first, first)]), labels


# ---------------------------------------------------------------------------
# Partitions


def _canonical(labels: np.ndarray) -> np.ndarray:
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[np.asarray(inv).ravel()]


@dataclass(frozen=True, eq=False)
class Partition:
    """Assignment of base cells (graphon classes or graph vertices) to parts.

    ``base_measures`` are the measures of the base cells; labels are
    relabelled so that parts are numbered in order of first appearance.
    """

    labels: np.ndarray
    base_measures: np.ndarray = field(repr=False)

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise ValueError("labels must be one-dimensional")
        if not np.issubdtype(labels.dtype, np.integer):
            if labels.size and not np.all(labels == np.round(labels)):
                raise ValueError("labels must be integers")
            labels = labels.astype(int)
        measures = _readonly(self.base_measures).ravel()
        if measures.size != labels.size:
            raise GraphonLabError("label out of range: partition does not match its base")
        canon = _canonical(labels) if labels.size else labels.astype(int)
        canon = np.asarray(canon, dtype=np.int64)
        canon.setflags(write=False)
        object.__setattr__(self, "labels", canon)
        object.__setattr__(self, "base_measures", measures)

    @classmethod
    def trivial(cls, base_measures) -> "Partition":
        base_measures = np.asarray(base_measures, dtype=float)
        return cls(np.zeros(base_measures.size, dtype=int), base_measures)

    @classmethod
    def discrete(cls, base_measures) -> "Partition":
        base_measures = np.asarray(base_measures, dtype=float)
        return cls(np.arange(base_measures.size), base_measures)

    @classmethod
    def from_sets(cls, sets, base_measures) -> "Partition":
        base_measures = np.asarray(base_measures, dtype=float)
        labels = np.full(base_measures.size, -1)
        for k, s in enumerate(sets):
            for i in s:
                if labels[i] != -1:
                    raise GraphonLabError(f"cell {i} appears in two parts")
                labels[i] = k
        if np.any(labels < 0):
            raise GraphonLabError("every cell needs a part")
        return cls(labels, base_measures)

    @property
    def size(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def __len__(self) -> int:
        return self.size

    @cached_property
    def class_measures(self) -> np.ndarray:
        return np.bincount(self.labels, weights=self.base_measures, minlength=self.size)

    def parts(self) -> list[list[int]]:
        return [np.flatnonzero(self.labels == a).tolist() for a in range(self.size)]

    def one_hot(self) -> np.ndarray:
        M = np.zeros((self.labels.size, self.size))
        M[np.arange(self.labels.size), self.labels] = 1.0
        return M

    def same_base(self, other: "Partition") -> bool:
        return (self.base_measures.size == other.base_measures.size
                and np.allclose(self.base_measures, other.base_measures, rtol=0, atol=GRID_TOL))

    def refines(self, other: "Partition") -> bool:
        """True when every part of self lies inside a part of other."""
        if not self.same_base(other):
            return False
        pairs = np.unique(np.stack([self.labels, other.labels]), axis=1)
        return pairs.shape[1] == self.size

    def split_by(self, mask) -> "Partition":
        """Refine by a subset of the base cells (given as a boolean mask)."""
        mask = np.asarray(mask, dtype=bool)
        return Partition(self.labels * 2 + mask, self.base_measures)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.same_base(other) and np.array_equal(self.labels, other.labels)

    def __hash__(self):
        return hash(self.labels.tobytes())

    def to_json(self) -> dict:
        return {"labels": self.labels.tolist(), "class_measures": self.class_measures.tolist()}


def common_refinement(P: Partition, Q: Partition) -> Partition:
    if not P.same_base(Q):
        raise GraphonLabError("partitions have different parents")
    return Partition(P.labels * Q.size + Q.labels, P.base_measures)


def _check_partition_of(W: StepGraphon, P: Partition):
    if P.labels.size != W.m:
        raise GraphonLabError(f"label out of range: partition has {P.labels.size} cells, graphon has {W.m} classes")


def quotient(W: StepGraphon, P: Partition) -> StepGraphon:
    """W_P as a step graphon with one class per part of P."""
    _check_partition_of(W, P)
    M = P.one_hot()
    blocks = M.T @ W.weighted() @ M
    mu = M.T @ W.lengths
    return StepGraphon(mu, blocks / np.outer(mu, mu))


def step(W: StepGraphon, P: Partition) -> StepGraphon:
    """The stepping operator: average W over each cell of P x P (on W's grid)."""
    Q = quotient(W, P)
    lab = P.labels
    return W.with_values(Q.values[np.ix_(lab, lab)])


@dataclass(frozen=True)
class OverlayPlan:
    """A permutation of the classes of a grid that only swaps equal-length classes."""

    permutation: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        perm = np.asarray(self.permutation, dtype=int)
        lengths = np.asarray(self.lengths, dtype=float)
        if sorted(perm.tolist()) != list(range(lengths.size)):
            raise ValueError("not a permutation")
        if np.any(np.abs(lengths[perm] - lengths) > GRID_TOL):
            raise ValueError("overlay maps classes of different measure")

    def apply(self, W: StepGraphon) -> StepGraphon:
        return W.permute(self.permutation)
