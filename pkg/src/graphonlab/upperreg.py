"""Checking and falsifying upper L^p regularity, and K-bounded tails."""

from __future__ import annotations

from dataclasses import dataclass, field
import bisect
import math

import numpy as np

from .core import (
    GraphonLabError,
    Partition,
    ResolutionError,
    StepGraphon,
    WeightedGraph,
    graphon_lp_norm,
    normalize,
    quotient,
    step,
)

ENUM_LIMIT = 12
_CHUNK = 20000


@dataclass
class RegularityVerdict:
    status: str  # verified_exact | falsified | unfalsified
    certificate: Partition | None = None
    worst_value: float = 0.0
    reason: str = ""
    admissible: int = 0
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "reason": self.reason,
            "worst_value": self.worst_value,
            "admissible": self.admissible,
            "certificate": None if self.certificate is None else self.certificate.to_json(),
            **self.extra,
        }


# ---------------------------------------------------------------------------
# set partitions


def set_partitions(n: int, max_parts: int | None = None, chunk: int = _CHUNK):
    """Yield arrays of restricted growth strings (one partition per row).

    Rows enumerate every set partition of {0..n-1} with at most ``max_parts``
    parts exactly once.
    """
    max_parts = n if max_parts is None else max(1, min(max_parts, n))

    def grow(rows: np.ndarray, top: np.ndarray, level: int):
        if level == n:
            yield rows
            return
        new_rows, new_top = [], []
        for lab in range(max_parts):
            ok = lab <= top + 1
            if not ok.any():
                continue
            r = rows[ok]
            new_rows.append(np.concatenate([r, np.full((len(r), 1), lab, dtype=np.int8)], axis=1))
            new_top.append(np.maximum(top[ok], lab))
        rows = np.concatenate(new_rows)
        top = np.concatenate(new_top)
        for s in range(0, len(rows), chunk):
            yield from grow(rows[s:s + chunk], top[s:s + chunk], level + 1)

    if n == 0:
        return
    yield from grow(np.zeros((1, 1), dtype=np.int8), np.zeros(1, dtype=int), 1)


def _blocks(W: StepGraphon, labels: np.ndarray, k: int):
    """Block sums B (r, k, k) and part measures mu (r, k) for a batch of labelings."""
    onehot = np.eye(k)[labels]  # (r, n, k)
    A = W.weighted()
    mu = onehot.transpose(0, 2, 1) @ W.lengths
    B = np.einsum("rna,nm,rmb->rab", onehot, A, onehot, optimize=True)
    return B, mu


def _stepped_norms(B, mu, p):
    with np.errstate(divide="ignore", invalid="ignore"):
        mm = mu[:, :, None] * mu[:, None, :]
        vals = np.where(mm > 0, B / np.where(mm > 0, mm, 1), 0.0)
    if math.isinf(p):
        return np.abs(vals).max(axis=(1, 2))
    return np.sum(mm * np.abs(vals) ** p, axis=(1, 2)) ** (1 / p)


def _enumerate_admissible(W: StepGraphon, eta: float, include_trivial: bool):
    """Yield (labels, B, mu, k) batches of partitions with all parts >= eta."""
    n = W.m
    max_parts = max(1, int(math.floor(1 / eta + 1e-9)))
    for rows in set_partitions(n, max_parts):
        k = int(rows.max()) + 1
        B, mu = _blocks(W, rows.astype(np.int64), k)
        nonempty = mu > 0
        ok = np.all(~nonempty | (mu >= eta - 1e-12), axis=1)
        if not include_trivial:
            ok &= nonempty.sum(axis=1) > 1
        if ok.any():
            yield rows[ok], B[ok], mu[ok]


def dominant(G: WeightedGraph, eta: float) -> bool:
    return bool(np.max(G.measures()) > eta + 1e-12)


def _graph_graphon(G: WeightedGraph) -> StepGraphon:
    return normalize(G)


def check_upper_regular_exact(G: WeightedGraph, C: float, eta: float, p: float,
                              include_trivial: bool = False) -> RegularityVerdict:
    """Decide (C, eta)-upper L^p regularity by enumerating all set partitions.

    The one-part partition is skipped unless ``include_trivial`` is set: its
    stepped norm is |E W| / ||G||_1, which measures the sign balance of the
    edge weights rather than any concentration.
    """
    if G.n > ENUM_LIMIT:
        raise ResolutionError(f"{G.n} vertices: too many to enumerate; use falsify")
    if dominant(G, eta):
        return RegularityVerdict("falsified", None, math.inf, reason="dominant node")
    W = _graph_graphon(G)
    return _exact_on(W, C, eta, p, include_trivial)


def _exact_on(W, C, eta, p, include_trivial):
    worst, cert, count = 0.0, None, 0
    for rows, B, mu in _enumerate_admissible(W, eta, include_trivial):
        norms = _stepped_norms(B, mu, p)
        count += len(norms)
        i = int(np.argmax(norms))
        if norms[i] > worst:
            worst = float(norms[i])
            cert = rows[i]
    if count and worst > C + 1e-9:
        P = Partition(cert.astype(np.int64), W.lengths)
        return RegularityVerdict("falsified", P, stepped_norm(W, P, p), admissible=count)
    return RegularityVerdict("verified_exact", None, worst, admissible=count)


def stepped_norm(W: StepGraphon, P: Partition, p: float) -> float:
    return graphon_lp_norm(quotient(W, P), p)


def recheck_certificate(G: WeightedGraph, verdict: RegularityVerdict, C: float, eta: float, p: float) -> bool:
    """Independent recomputation of a falsification certificate."""
    P = verdict.certificate
    if P is None:
        return False
    a = G.vertex_weights
    parts = P.parts()
    norm1 = float(np.sum(np.outer(a, a) * G.dense())) / G.total_weight**2
    total = 0.0
    for Vi in parts:
        if a[Vi].sum() < eta * G.total_weight - 1e-12:
            return False
    for Vi in parts:
        for Vj in parts:
            rho = float(a[Vi] @ G.dense()[np.ix_(Vi, Vj)] @ a[Vj]) / (a[Vi].sum() * a[Vj].sum())
            w = a[Vi].sum() * a[Vj].sum() / G.total_weight**2
            if math.isinf(p):
                total = max(total, abs(rho / norm1))
            else:
                total += w * abs(rho / norm1) ** p
    value = total if math.isinf(p) else total ** (1 / p)
    return value > C + 1e-9


# ---------------------------------------------------------------------------
# falsification search


def _gen(seed: int, restart: int):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**63 - 1), 11, restart])))


def _local_search(A, lam, labels, k, eta, p, max_sweeps=20):
    """Greedy single-vertex moves increasing the stepped norm (p-th power)."""
    n = len(lam)
    M = np.zeros((n, k))
    M[np.arange(n), labels] = 1.0
    B = M.T @ A @ M
    mu = M.T @ lam

    def score(B, mu):
        mm = np.outer(mu, mu)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = np.where(mm > 0, np.abs(B) / np.where(mm > 0, mm, 1), 0.0)
        if math.isinf(p):
            return v.max()
        return float(np.sum(mm * v**p))

    cur = score(B, mu)
    for _ in range(max_sweeps):
        improved = False
        for v in range(n):
            a = labels[v]
            if mu[a] - lam[v] < eta - 1e-12 and mu[a] - lam[v] > 1e-15:
                continue
            r = M.T @ A[:, v]
            best, best_b = cur, -1
            for b in range(k):
                if b == a:
                    continue
                d = np.zeros(k)
                d[b], d[a] = 1.0, -1.0
                B2 = B + np.outer(d, r) + np.outer(r, d) + A[v, v] * np.outer(d, d)
                mu2 = mu + lam[v] * d
                nz = mu2 > 1e-15
                if np.any(nz & (mu2 < eta - 1e-12)):
                    continue
                s = score(B2, mu2)
                if s > best + 1e-12:
                    best, best_b = s, b
            if best_b >= 0:
                b = best_b
                d = np.zeros(k)
                d[b], d[a] = 1.0, -1.0
                B = B + np.outer(d, r) + np.outer(r, d) + A[v, v] * np.outer(d, d)
                mu = mu + lam[v] * d
                M[v, a], M[v, b] = 0.0, 1.0
                labels[v] = b
                cur = best
                improved = True
        if not improved:
            break
    return labels, cur


def _search(W: StepGraphon, C, eta, p, budget, seed, score_fn=None):
    A = W.weighted()
    lam = W.lengths
    n = W.m
    kmax = max(1, min(n, int(math.floor(1 / eta + 1e-9))))
    starts = []
    # degree-sorted start: heaviest rows grouped together
    order = np.argsort(-np.abs(W.values) @ lam, kind="stable")
    cum = np.cumsum(lam[order])
    for k in range(2, kmax + 1):
        lab = np.empty(n, dtype=int)
        lab[order] = np.minimum((cum - lam[order] / 2) * k, k - 1).astype(int)
        starts.append((k, lab))
    # heavy head: one part of measure just above eta, the rest in a second part
    head = np.empty(n, dtype=int)
    head[order] = (cum - lam[order] >= eta - 1e-12).astype(int)
    starts.append((2, head))
    for r in range(budget):
        g = _gen(seed, r)
        k = int(g.integers(2, kmax + 1)) if kmax >= 2 else 1
        lab = g.permutation(np.arange(n) % k)
        starts.append((k, lab))
    best_val, best_lab = -1.0, None
    for k, lab in starts:
        lab = lab.copy()
        if k < 2:
            continue
        lab, _ = _local_search(A, lam, lab, k, eta, p)
        P = Partition(lab, lam)
        if np.any(P.class_measures < eta - 1e-12):
            continue
        val = stepped_norm(W, P, p)
        if val > best_val + 1e-12:
            best_val, best_lab = val, lab
            if val > C + 1e-9:
                break
    return best_val, best_lab


def falsify_upper_regular(G: WeightedGraph, C: float, eta: float, p: float,
                          budget: int = 16, seed: int = 0) -> RegularityVerdict:
    """Look for a partition with parts of weight >= eta a_G whose stepped norm exceeds C."""
    if budget < 1:
        raise ValueError("budget must be >= 1")
    if dominant(G, eta):
        return RegularityVerdict("falsified", None, math.inf, reason="dominant node")
    W = _graph_graphon(G)
    return _falsify_on(W, C, eta, p, budget, seed)


def _falsify_on(W, C, eta, p, budget, seed):
    val, lab = _search(W, C, eta, p, budget, seed)
    if lab is None:
        return RegularityVerdict("unfalsified", None, 0.0, reason="no admissible partition found")
    if val > C + 1e-9:
        return RegularityVerdict("falsified", Partition(lab, W.lengths), val)
    return RegularityVerdict("unfalsified", None, val)


def check_upper_regular_graphon(W: StepGraphon, C: float, eta: float, p: float,
                                budget: int = 16, seed: int = 0,
                                include_trivial: bool = False) -> RegularityVerdict:
    """Graphon version over partitions of the class grid: exact up to
    12 classes, search beyond."""
    if W.m <= ENUM_LIMIT:
        return _exact_on(W, C, eta, p, include_trivial)
    return _falsify_on(W, C, eta, p, budget, seed)


# ---------------------------------------------------------------------------
# tails


class TailBoundFn:
    """A tail bound K(eps) stored as a finite table.

    Lookups use the entry with the largest key not exceeding eps.
    """

    def __init__(self, table):
        items = sorted((float(e), float(k)) for e, k in dict(table).items())
        if not items:
            raise ValueError("empty tail table")
        if any(k <= 0 or e <= 0 for e, k in items):
            raise ValueError("table entries must be positive")
        self.eps = [e for e, _ in items]
        self.K = [k for _, k in items]

    def __call__(self, eps: float) -> float:
        i = bisect.bisect_right(self.eps, eps + 1e-15) - 1
        if i < 0:
            raise GraphonLabError(f"no tail bound stored at or below {eps}")
        return self.K[i]

    def items(self):
        return list(zip(self.eps, self.K))

    @classmethod
    def from_lp(cls, W: StepGraphon, p: float, eps_grid) -> "TailBoundFn":
        """K(eps) = (||W||_p^p / eps)^(1/(p-1)), which bounds the tails of W."""
        norm = graphon_lp_norm(W, p)
        return cls({e: max((norm**p / e) ** (1 / (p - 1)), 1e-300) for e in eps_grid})

    def stepped(self, l1_bound: float) -> "TailBoundFn":
        """Tail bound valid for every stepping of a graphon with these tails
        and L^1 norm at most ``l1_bound``: K'(eps) = 2 C K(eps/2) / eps."""
        out = {}
        for e in self.eps:
            try:
                out[e] = max(2 * l1_bound * self(e / 2) / e, 1e-300)
            except GraphonLabError:
                continue
        return TailBoundFn(out)


def tail_mass(W: StepGraphon, K: float) -> float:
    """||W 1_{|W| >= K}||_1."""
    if not K > 0:
        raise ValueError("K must be positive")
    lam = W.lengths
    mask = np.abs(W.values) >= K
    return float(np.sum(np.outer(lam, lam) * np.abs(W.values) * mask))


def check_k_bounded_tails(W: StepGraphon, Kfn: TailBoundFn) -> bool:
    return all(tail_mass(W, K) <= e + 1e-12 for e, K in Kfn.items())


def _batch_tail_violation(B, mu, Kfn):
    """Largest excess tail_mass - eps over the stored eps, per partition."""
    mm = mu[:, :, None] * mu[:, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(mm > 0, np.abs(B) / np.where(mm > 0, mm, 1), 0.0)
    excess = np.full(len(B), -np.inf)
    for e, K in Kfn.items():
        tm = np.sum(mm * vals * (vals >= K), axis=(1, 2))
        excess = np.maximum(excess, tm - e)
    return excess


def check_uniform_upper_regular(W: StepGraphon, Kfn: TailBoundFn, eta: float,
                                budget: int = 16, seed: int = 0) -> RegularityVerdict:
    """Search for a partition with parts >= eta whose stepping breaks the tail bound.

    Exhaustive (including the one-part partition) when the grid has at most
    12 classes; otherwise random partitions with parts >= eta are tried.
    """
    if W.m <= ENUM_LIMIT:
        worst, cert, count = -np.inf, None, 0
        for rows, B, mu in _enumerate_admissible(W, eta, include_trivial=True):
            ex = _batch_tail_violation(B, mu, Kfn)
            count += len(ex)
            i = int(np.argmax(ex))
            if ex[i] > worst:
                worst, cert = float(ex[i]), rows[i]
        if count and worst > 1e-12:
            return RegularityVerdict("falsified", Partition(cert.astype(np.int64), W.lengths), worst,
                                     admissible=count)
        return RegularityVerdict("verified_exact", None, worst, admissible=count)
    kmax = max(1, int(math.floor(1 / eta + 1e-9)))
    worst, cert = -np.inf, None
    for r in range(budget):
        g = _gen(seed, r)
        k = int(g.integers(1, kmax + 1))
        lab = g.permutation(np.arange(W.m) % k)
        P = Partition(lab, W.lengths)
        if np.any(P.class_measures < eta - 1e-12):
            continue
        Q = quotient(W, P)
        ex = max(tail_mass(Q, K) - e for e, K in Kfn.items())
        if ex > worst:
            worst, cert = ex, P
    if cert is not None and worst > 1e-12:
        return RegularityVerdict("falsified", cert, worst)
    return RegularityVerdict("unfalsified", None, worst)


def uniform_integrability_delta(Kfn: TailBoundFn, eps: float) -> float:
    """delta = eps / (2 K(eps/2)): any set of measure <= delta carries at most
    eps of the L^1 mass of a graphon with these tails."""
    return eps / (2 * Kfn(eps / 2))


def sequence_report(graphs, C: float, etas, p: float, budget: int = 16, seed: int = 0):
    """Per-instance verdicts at (C + eta_n, eta_n) for a sequence of graphs."""
    rows = []
    for n, (G, eta) in enumerate(zip(graphs, etas)):
        if G.n <= ENUM_LIMIT:
            v = check_upper_regular_exact(G, C + eta, eta, p)
        else:
            v = falsify_upper_regular(G, C + eta, eta, p, budget, seed)
        rows.append({"index": n, "eta": eta, "C": C + eta, "status": v.status, "worst": v.worst_value})
    return rows
