"""Weak regularity partitions by energy increment.

All routines work on the class grid of a step graphon: partitions group
classes, and cut witnesses are unions of classes, so refining by a witness
never needs new breakpoints.  Equitizing is the exception and returns a
refined grid together with the partition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math
import os

import numpy as np

from .core import (
    DominantNodeError,
    GraphonLabError,
    Partition,
    ResolutionError,
    StepGraphon,
    UpperRegularityViolation,
    WeightedGraph,
    graph_lp_norm,
    graphon_lp_norm,
    normalize,
    quotient,
    step,
    truncate,
)
from .cutmetric import CutResult, cut_norm, d_cut

DEFAULT_MAX_CLASSES = 4096


def max_classes() -> int:
    return int(os.environ.get("GRAPHONLAB_MAX_CLASSES", DEFAULT_MAX_CLASSES))


@dataclass(frozen=True)
class RegularityParams:
    p: float
    eps: float
    C: float = 1.0
    eta: float = 0.05

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.C < 0:
            raise ValueError("C must be nonnegative")

    @property
    def exponent(self) -> float:
        return math.inf if self.p == 1 else self.p / (self.p - 1)

    @property
    def N(self) -> float:
        return (6 / self.eps) ** max(2.0, self.exponent)

    @property
    def max_iterations(self) -> int:
        return math.ceil(self.N)

    @property
    def K_trunc(self) -> float:
        """Truncation level for the energy bookkeeping (infinite when p >= 2)."""
        if self.p >= 2:
            return math.inf
        return self.C * (6 / self.eps) ** (1 / (self.p - 1))

    def theory_eta(self, graph: bool = False) -> float:
        """The eta under which the partition-size guarantee is proved.

        Returned as a float; it underflows to 0 for most parameters.
        """
        denom = 320 if graph else 160
        log4 = -(self.N + 1) * math.log(4) + self.exponent * math.log(self.eps / denom)
        return math.exp(log4) if log4 > -745 else 0.0


@dataclass
class TraceEntry:
    iteration: int
    witness: float
    upper: float
    energy: float
    parts: int
    moved: float = 0.0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RegularityReport:
    """Outcome of a regularity run.

    ``graphon`` is the (possibly refined) grid that ``partition`` lives on;
    ``error_cut`` is a certified upper bound on ||W - W_P||_box and
    ``error_lower`` the value achieved by the best witness found.
    """

    partition: Partition
    error_cut: float
    error_lower: float
    iterations: int
    trace: list[TraceEntry]
    status: str
    graphon: StepGraphon = field(repr=False)
    threshold: float = 0.0
    method: str = "exact"
    extra: dict = field(default_factory=dict)

    @property
    def certified(self) -> bool:
        return self.status == "certified"

    def stepped(self) -> StepGraphon:
        return step(self.graphon, self.partition)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "error_cut": self.error_cut,
            "error_lower": self.error_lower,
            "threshold": self.threshold,
            "iterations": self.iterations,
            "method": self.method,
            "partition": self.partition.to_json(),
            "trace": [t.to_json() for t in self.trace],
            **self.extra,
        }


def _residual(W: StepGraphon, P: Partition, seed: int) -> CutResult:
    return cut_norm(W - step(W, P), seed=seed)


def _mask(W: StepGraphon, classes) -> np.ndarray:
    m = np.zeros(W.m, dtype=bool)
    m[list(classes)] = True
    return m


def _energy(W: StepGraphon, P: Partition) -> float:
    return graphon_lp_norm(step(W, P), 2) ** 2


def _report(W, P, trace, threshold, seed, iterations, extra=None) -> RegularityReport:
    res = _residual(W, P, seed)
    if res.upper <= threshold + 1e-12:
        status = "certified"
    elif res.lower <= threshold + 1e-12:
        status = "uncertified"
    else:
        status = "stalled"
    return RegularityReport(P, res.upper, res.lower, iterations, trace, status, W,
                            threshold, res.method, extra or {})


def _done(res: CutResult, threshold: float, extra_used: int, extra_rounds: int) -> bool:
    """Stop once the residual is certified small.

    A heuristic witness below the threshold without a matching certificate
    still gives a refinement direction; up to ``extra_rounds`` such rounds
    are spent trying to reach a certified error.
    """
    if res.upper <= threshold:
        return True
    if res.lower > threshold:
        return False
    return extra_used >= extra_rounds or res.lower <= 1e-12


def weak_regularity_l2(W: StepGraphon, eps: float, P0: Partition | None = None,
                       seed: int = 0, extra_rounds: int = 8) -> RegularityReport:
    """Refine P0 until ||W - W_Q||_box <= eps ||W||_2.

    Each round refines by the sets of a cut witness; by Cauchy-Schwarz the
    energy ||W_Q||_2^2 grows by at least the squared witness value.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    P = P0 if P0 is not None else Partition.trivial(W.lengths)
    if P.labels.size != W.m:
        raise GraphonLabError("partition does not match the graphon's classes")
    threshold = eps * graphon_lp_norm(W, 2)
    cap = math.ceil(1 / eps**2)
    trace = [TraceEntry(0, math.nan, math.nan, _energy(W, P), P.size)]
    it = cap_hits = 0
    while cap_hits <= cap:
        res = _residual(W, P, seed)
        trace[-1].witness, trace[-1].upper = res.lower, res.upper
        if _done(res, threshold, it - cap_hits, extra_rounds):
            break
        cap_hits += res.lower > threshold
        it += 1
        P = P.split_by(_mask(W, res.witness.S)).split_by(_mask(W, res.witness.T))
        trace.append(TraceEntry(it, math.nan, math.nan, _energy(W, P), P.size))
    return _report(W, P, trace, threshold, seed, it)


# ---------------------------------------------------------------------------
# equitizing


@dataclass
class Equitized:
    graphon: StepGraphon
    partition: Partition
    coarse: Partition
    parent: np.ndarray


def equitize_bound(err_Q: float, norm_p: float, size_Q: int, size_P: int, k: int, p: float) -> float:
    """2 err_Q + 2 ||W||_p (2|Q| / (k|P|))^(1 - 1/p)."""
    return 2 * err_Q + 2 * norm_p * (2 * size_Q / (k * size_P)) ** (1 - 1 / p)


def _chop(segments, size, count, tol=1e-13):
    """Cut consecutive (class, measure) segments into cells of measure ``size``.

    At most ``count`` cells are filled (all of them when ``count`` is None).
    Returns pieces (class, measure, cell) and the unused segments.  Slivers
    below ``tol`` are absorbed into the neighbouring piece.
    """
    limit = math.inf if count is None else count
    segs = list(segments)
    pieces = []
    cell, room, i = 0, size, 0
    while i < len(segs) and cell < limit:
        cls, meas = segs[i]
        take = min(meas, room)
        if meas - take <= tol:
            take = meas
        pieces.append((cls, take, cell))
        room -= take
        if room <= tol:
            cell, room = cell + 1, size
        if meas - take <= tol:
            i += 1
        else:
            segs[i] = (cls, meas - take)
    return pieces, segs[i:]


def equitize(W: StepGraphon, P: Partition, Q: Partition, k: int, p: float = 2.0) -> Equitized:
    """Equipartition refining P into exactly k|P| parts, built from Q.

    Inside each part of P, every part of Q contributes as many whole cells
    as fit; the remainders are pooled and cut into the remaining cells.
    Grid classes are split wherever a cell boundary falls inside one.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not Q.refines(P):
        raise GraphonLabError("Q must refine P")
    mu = P.class_measures
    if np.max(np.abs(mu - 1.0 / P.size)) > 1e-12:
        raise GraphonLabError("P must be an equipartition")
    if k * P.size > max_classes():
        raise ResolutionError(f"{k * P.size} parts exceeds grid cap {max_classes()}")
    size = 1.0 / (k * P.size)
    lengths = W.lengths
    pieces = []  # (class, measure, global cell)
    coarse_of_cell = []
    offset = 0
    for a in range(P.size):
        qparts = [b for b in range(Q.size) if P.labels[np.argmax(Q.labels == b)] == a]
        used, leftovers = 0, []
        for b in qparts:
            segs = [(int(i), float(lengths[i])) for i in np.flatnonzero(Q.labels == b)]
            q = sum(m for _, m in segs)
            n_full = int(math.floor(q / size + 1e-9))
            got, rest = _chop(segs, size, n_full)
            pieces += [(c, m, offset + used + cell) for c, m, cell in got]
            used += n_full
            leftovers += rest
        got, _ = _chop(leftovers, size, None)
        pieces += [(c, m, offset + used + cell) for c, m, cell in got]
        coarse_of_cell += [a] * k
        offset += k
    pieces.sort(key=lambda t: t[0])  # stable: keeps creation order inside a class
    parent = np.array([c for c, _, _ in pieces])
    new_lengths = np.array([m for _, m, _ in pieces])
    new_lengths /= new_lengths.sum()
    cells = np.array([cell for _, _, cell in pieces])
    Wr = StepGraphon(new_lengths, W.values[np.ix_(parent, parent)])
    Qp = Partition(cells, new_lengths)
    if Qp.size != k * P.size:
        raise GraphonLabError(f"equitize produced {Qp.size} parts, expected {k * P.size}")
    coarse = Partition(P.labels[parent], new_lengths)
    return Equitized(Wr, Qp, coarse, parent)


def weak_regularity_l2_equitable(W: StepGraphon, eps: float, P0: Partition | None = None,
                                 k: int | None = None, seed: int = 0) -> RegularityReport:
    """Equipartition refining P0 into k|P0| parts with small cut error.

    Without an explicit k the guaranteed choice 4^(10/eps^2) is used, which
    exceeds any practical grid; pass k to certify numerically instead.
    """
    P = P0 if P0 is not None else Partition.trivial(W.lengths)
    if k is None:
        need = 10 / eps**2 * math.log(4) + math.log(P.size)
        if need > math.log(max_classes()):
            raise ResolutionError("eps too small for grid cap")
        k = math.ceil(4 ** (10 / eps**2))
    inner = weak_regularity_l2(W, eps / 3, P, seed)
    eq = equitize(W, P, inner.partition, k, 2.0)
    norm2 = graphon_lp_norm(W, 2)
    bound = equitize_bound(inner.error_cut, norm2, inner.partition.size, P.size, k, 2.0)
    rep = _report(eq.graphon, eq.partition, inner.trace, eps * norm2, seed, inner.iterations,
                  {"k": k, "bound": bound})
    return rep


def weak_regularity_lp(W: StepGraphon, p: float, eps: float, P0: Partition | None = None,
                       k: int | None = None, seed: int = 0) -> RegularityReport:
    """Equitable weak regularity for 1 < p < 2 through truncation.

    W is truncated at K = (3/eps)^(1/(p-1)) ||W||_p, the truncation is
    regularized at accuracy (eps/3)^(p/(2(p-1))), and the resulting
    equipartition is certified on W itself.  The three-term bound
    ||W - W_Q|| <= 2 tail + ||U - U_Q|| is recorded as ``bound``.
    """
    if not 1 < p < 2:
        raise ValueError("p must lie in (1, 2)")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    P = P0 if P0 is not None else Partition.trivial(W.lengths)
    norm_p = graphon_lp_norm(W, p)
    if norm_p == 0:
        return _report(W, P, [TraceEntry(0, 0.0, 0.0, 0.0, P.size)], 0.0, seed, 0)
    exponent = p / (p - 1)
    if k is None:
        log_k = 10 * (3 / eps) ** exponent * math.log(4)
        if log_k + math.log(P.size) > math.log(max_classes()):
            raise ResolutionError("eps too small for grid cap")
        k = math.ceil(math.exp(log_k))
    K = (3 / eps) ** (1 / (p - 1)) * norm_p
    U, tail = truncate(W, K)
    tail_mass = graphon_lp_norm(tail, 1)
    inner_eps = (eps / 3) ** (exponent / 2)
    inner = weak_regularity_l2(U, inner_eps / 3, P, seed)
    eq = equitize(U, P, inner.partition, k, 2.0)
    Wr = StepGraphon(eq.graphon.lengths, W.values[np.ix_(eq.parent, eq.parent)])
    Ur = eq.graphon
    u_err = d_cut(Ur, step(Ur, eq.partition), seed=seed).upper
    extra = {"k": k, "K": K, "tail_mass": tail_mass, "bound": 2 * tail_mass + u_err}
    return _report(Wr, eq.partition, inner.trace, eps * norm_p, seed, inner.iterations, extra)


# ---------------------------------------------------------------------------
# upper regular inputs


def _round(mask: np.ndarray, P: Partition, eta: float) -> np.ndarray:
    """Snap a class set to P: drop small intersections, fill small complements."""
    out = mask.copy()
    w = P.base_measures
    for a in range(P.size):
        part = P.labels == a
        inside = float(w[part & mask].sum())
        outside = float(w[part & ~mask].sum())
        if inside < eta - 1e-12:
            out[part] = False
        elif outside < eta - 1e-12:
            out[part] = True
    return out


def _stepped_norm(W: StepGraphon, P: Partition, p: float) -> float:
    return graphon_lp_norm(quotient(W, P), p)


def _upper_loop(W: StepGraphon, params: RegularityParams, seed: int, extra_rounds: int = 8) -> RegularityReport:
    C, eps, eta, p = params.C, params.eps, params.eta, params.p
    threshold = C * eps
    K = params.K_trunc
    P = Partition.trivial(W.lengths)
    trace: list[TraceEntry] = []

    def energy(P):
        WP = quotient(W, P)
        if math.isfinite(K):
            WP = truncate(WP, K)[0]
        return graphon_lp_norm(WP, 2) ** 2

    it = big = 0
    while True:
        norm = _stepped_norm(W, P, p)
        if norm > C + 1e-9:
            raise UpperRegularityViolation("upper regularity violated", P, norm)
        res = _residual(W, P, seed)
        trace.append(TraceEntry(it, res.lower, res.upper, energy(P), P.size))
        if _done(res, threshold, it - big, extra_rounds):
            break
        big += res.lower > threshold
        if big > params.max_iterations:
            raise UpperRegularityViolation("upper regularity violated: iteration cap reached", P, norm)
        S = _mask(W, res.witness.S)
        S2 = _round(S, P, eta)
        P1 = P.split_by(S2)
        T = _mask(W, res.witness.T)
        T2 = _round(T, P1, eta)
        P2 = P1.split_by(T2)
        w = P.base_measures
        trace[-1].moved = float(w[S != S2].sum() + w[T != T2].sum())
        if P2.size > max_classes():
            raise ResolutionError(f"{P2.size} parts exceeds grid cap {max_classes()}")
        if P2.size == P.size:
            break  # rounding absorbed the witness; reported as stalled
        P = P2
        it += 1
    rep = _report(W, P, trace, threshold, seed, it)
    rep.extra.update({"theory_eta": params.theory_eta(), "eta": eta,
                      "eta_within_theory": eta <= params.theory_eta(),
                      "min_part": float(P.class_measures.min()),
                      "stepped_norm": _stepped_norm(W, P, p)})
    return rep


def weak_regularity_upper(W: StepGraphon, params: RegularityParams, seed: int = 0) -> RegularityReport:
    """Partition with parts of measure >= eta and ||W - W_P||_box <= C eps.

    Raises UpperRegularityViolation (carrying the partition) when a stepped
    norm exceeds C or the iteration budget ceil(N) runs out.
    """
    if params.p <= 1:
        raise ValueError("p must exceed 1")
    return _upper_loop(W, params, seed)


def _check_graph(G: WeightedGraph, params: RegularityParams):
    if G.n == 0:
        raise GraphonLabError("empty graph")
    if np.max(G.measures()) > params.eta + 1e-12:
        raise DominantNodeError("dominant node: a vertex has weight above eta * total weight")
    if graph_lp_norm(G, 1) == 0:
        raise GraphonLabError("no edges")


def weak_regularity_graph(G: WeightedGraph, params: RegularityParams, seed: int = 0) -> RegularityReport:
    """Vertex partition with parts of weight >= eta a_G and small normalized cut error."""
    if params.p <= 1:
        raise ValueError("p must exceed 1")
    _check_graph(G, params)
    rep = _upper_loop(normalize(G), params, seed)
    rep.extra["theory_eta"] = params.theory_eta(graph=True)
    rep.extra["eta_within_theory"] = params.eta <= rep.extra["theory_eta"]
    return rep


def densify(G: WeightedGraph, params: RegularityParams, seed: int = 0):
    """Return (U, err): U = normalize(G) stepped on a regularity partition and
    a certified bound err on the cut distance between the two."""
    rep = weak_regularity_graph(G, params, seed)
    return rep.stepped(), rep.error_cut


def equitable_upper(W: StepGraphon, params: RegularityParams, k: int, seed: int = 0) -> RegularityReport:
    """Run the upper-regular loop, then equitize its partition into k parts
    and re-certify the cut error on the refined grid."""
    rep = weak_regularity_upper(W, params, seed)
    eq = equitize(W, Partition.trivial(W.lengths), rep.partition, k, params.p)
    out = _report(eq.graphon, eq.partition, rep.trace, 4 * params.C * params.eps, seed, rep.iterations,
                  {"k": k, "first_pass_error": rep.error_cut})
    return out
