"""Cut norm, the infinity-to-one norm, and labeled/unlabeled cut distances.

Exact solvers enumerate subsets S of classes and pick the best T for each S
directly: for fixed S the box value is linear in the indicator of T, so the
optimum includes exactly the classes with a favourable column sum.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import itertools
import math

import numpy as np

from .core import (
    GraphonLabError,
    ResolutionError,
    StepGraphon,
    common_grid,
    compress,
    graphon_lp_norm,
    regrid,
)

EXACT_LIMIT = 20
SPECTRAL_LIMIT = 2048
_CHUNK = 1 << 22


@dataclass(frozen=True)
class CutWitness:
    """Class subsets S, T and the box value <W, 1_{S x T}>.

    With ``signed`` set the value is instead sum f_i g_j w_ij with f = +1 on S,
    -1 off S (and likewise g on T), as used by the infinity-to-one norm.
    """

    S: tuple[int, ...]
    T: tuple[int, ...]
    value: float
    signed: bool = False

    def recompute(self, W: StepGraphon) -> float:
        A = W.weighted()
        if self.signed:
            f = -np.ones(W.m)
            g = -np.ones(W.m)
            f[list(self.S)] = 1
            g[list(self.T)] = 1
            return float(f @ A @ g)
        return box_value(A, self.S, self.T)

    def to_json(self) -> dict:
        return {"S": list(self.S), "T": list(self.T), "value": self.value}


@dataclass(frozen=True)
class CutResult:
    lower: float
    upper: float
    witness: CutWitness
    method: str  # "exact" or "alternating"

    @property
    def certified(self) -> bool:
        return self.method == "exact"

    def to_json(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "method": self.method,
                "witness": self.witness.to_json()}


def box_value(A: np.ndarray, S, T) -> float:
    S = np.asarray(list(S), dtype=int)
    T = np.asarray(list(T), dtype=int)
    if S.size == 0 or T.size == 0:
        return 0.0
    return float(A[np.ix_(S, T)].sum())


def _subset_matrix(k: int) -> np.ndarray:
    idx = np.arange(1 << k)[:, None]
    return ((idx >> np.arange(k)[None, :]) & 1).astype(float)


def _mask_to_tuple(mask) -> tuple[int, ...]:
    return tuple(int(i) for i in np.flatnonzero(mask))


def _enumerate(A: np.ndarray, score):
    """Evaluate ``score(colsums)`` over every subset S of the rows of A.

    ``score`` maps an (r, m) array of column sums to an (r,) array. Returns the
    best score and the row mask of the maximizing S (first one on ties).
    Column sums are assembled from two half tables to keep memory flat.
    """
    m = A.shape[0]
    lo = m // 2
    L = _subset_matrix(lo) @ A[:lo]
    Hs = _subset_matrix(m - lo)
    H = Hs @ A[lo:]
    step = max(1, _CHUNK // max(1, L.shape[0] * m))
    best, best_idx = -np.inf, (0, 0)
    for start in range(0, H.shape[0], step):
        block = H[start:start + step, None, :] + L[None, :, :]
        s = score(block.reshape(-1, m))
        k = int(np.argmax(s))
        if s[k] > best + 1e-15:
            best = float(s[k])
            best_idx = (start + k // L.shape[0], k % L.shape[0])
    hi_i, lo_i = best_idx
    mask = np.concatenate([(lo_i >> np.arange(lo)) & 1, Hs[hi_i]]).astype(bool)
    return best, mask


def _expand(mask_c: np.ndarray, labels: np.ndarray) -> np.ndarray:
    return mask_c[labels]


def _exact_parts(W: StepGraphon, limit: int):
    Wc, labels = compress(W)
    if Wc.m > limit:
        raise ResolutionError(f"{Wc.m} distinct classes exceeds exact limit {limit}; use heuristic")
    return Wc, labels


def cut_norm_exact(W: StepGraphon, limit: int = EXACT_LIMIT) -> CutResult:
    """Exact cut norm by enumeration over subsets of (twin-merged) classes."""
    Wc, labels = _exact_parts(W, limit)
    A = Wc.weighted()
    pos, Sp = _enumerate(A, lambda c: np.clip(c, 0, None).sum(axis=1))
    neg, Sn = _enumerate(A, lambda c: np.clip(-c, 0, None).sum(axis=1))
    if neg > pos + 1e-15:
        S = Sn
        T = (S.astype(float) @ A) <= 0
    else:
        S = Sp
        T = (S.astype(float) @ A) >= 0
    S_full, T_full = _expand(S, labels), _expand(T, labels)
    w = CutWitness(_mask_to_tuple(S_full), _mask_to_tuple(T_full), 0.0)
    value = w.recompute(W)
    w = CutWitness(w.S, w.T, value)
    return CutResult(abs(value), abs(value), w, "exact")


def infty_to_one_norm(W: StepGraphon, limit: int = EXACT_LIMIT,
                      restarts: int = 32, seed: int = 0) -> CutResult:
    """sup of |sum f_i g_j lambda_i lambda_j w_ij| over f, g with entries +-1."""
    Wc, labels = compress(W)
    A = Wc.weighted()
    if Wc.m > limit:
        h = cut_norm_heuristic(W, restarts=restarts, seed=seed)
        return CutResult(h.lower, min(4 * h.upper, float(np.abs(W.weighted()).sum())),
                         h.witness, "alternating")
    total = A.sum(axis=0)
    best, S = _enumerate(A, lambda c: np.abs(2 * c - total[None, :]).sum(axis=1))
    T = (2 * (S.astype(float) @ A) - total) >= 0
    w = CutWitness(_mask_to_tuple(_expand(S, labels)), _mask_to_tuple(_expand(T, labels)),
                   0.0, signed=True)
    value = w.recompute(W)
    w = CutWitness(w.S, w.T, value, signed=True)
    return CutResult(abs(value), abs(value), w, "exact")


def _streams(seed: int, restarts: int):
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**63 - 1), r])))
            for r in range(restarts)]


def spectral_bound(W: StepGraphon) -> float:
    """Operator norm of D^1/2 V D^1/2 (D = diag of class lengths).

    For any S, T: |<W, 1_{S x T}>| <= this * sqrt(lambda(S) lambda(T)).
    """
    d = np.sqrt(W.lengths)
    B = d[:, None] * W.values * d[None, :]
    return float(np.max(np.abs(np.linalg.eigvalsh(B))))


def certified_upper(W: StepGraphon) -> float:
    """A cheap certified upper bound on the cut norm."""
    bound = graphon_lp_norm(W, 1)
    if W.m <= SPECTRAL_LIMIT:
        bound = min(bound, spectral_bound(W))
    return bound


def _alternate(A: np.ndarray, S: np.ndarray, sign: int, max_iter: int = 200) -> np.ndarray:
    """Alternating maximization from a batch of starting row sets (rows of S)."""
    for _ in range(max_iter):
        c = S @ A
        T = (sign * c >= 0).astype(float)
        r = T @ A
        S_new = (sign * r >= 0).astype(float)
        if np.array_equal(S_new, S):
            break
        S = S_new
    return S


def cut_norm_heuristic(W: StepGraphon, restarts: int = 32, seed: int = 0) -> CutResult:
    """Alternating maximization from random starts; ``lower`` is the best box found."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    Wc, labels = compress(W)
    A = Wc.weighted()
    m = Wc.m
    starts = [g.random(m) < 0.5 for g in _streams(seed, restarts)]
    starts.append(np.ones(m, dtype=bool))
    upper = graphon_lp_norm(Wc, 1)
    if 1 < m <= SPECTRAL_LIMIT:
        d = np.sqrt(Wc.lengths)
        vals, vecs = np.linalg.eigh(d[:, None] * Wc.values * d[None, :])
        upper = min(upper, float(np.max(np.abs(vals))))
        for k in (0, -1):
            starts.append(vecs[:, k] >= 0)
            starts.append(vecs[:, k] < 0)
    elif m == 1:
        upper = min(upper, spectral_bound(Wc))
    S0 = np.array(starts, dtype=float)
    best, best_S, best_sign = -1.0, None, 1
    for sign in (1, -1):
        S = _alternate(A, S0, sign)
        T = (sign * (S @ A) >= 0).astype(float)
        vals = sign * np.einsum("ri,ij,rj->r", S, A, T)
        k = int(np.argmax(vals))
        if vals[k] > best + 1e-15:
            best, best_S, best_sign = float(vals[k]), S[k].astype(bool), sign
    T = best_sign * (best_S.astype(float) @ A) >= 0
    w = CutWitness(_mask_to_tuple(_expand(best_S, labels)), _mask_to_tuple(_expand(T, labels)), 0.0)
    value = w.recompute(W)
    w = CutWitness(w.S, w.T, value)
    upper = max(upper, abs(value))
    return CutResult(abs(value), upper, w, "alternating")


def cut_norm(W: StepGraphon, limit: int = EXACT_LIMIT, restarts: int = 32, seed: int = 0) -> CutResult:
    """Exact when the twin-merged class count is at most ``limit``, else heuristic."""
    if compress(W)[0].m <= limit:
        return cut_norm_exact(W, limit)
    return cut_norm_heuristic(W, restarts, seed)


def d_cut(U: StepGraphon, W: StepGraphon, limit: int = EXACT_LIMIT,
          restarts: int = 32, seed: int = 0) -> CutResult:
    """Cut norm of U - W on the common refinement of the two grids."""
    a, b = common_grid(U, W)
    return cut_norm(a - b, limit, restarts, seed)


# ---------------------------------------------------------------------------
# unlabeled distance


@dataclass
class DeltaResult:
    upper: float
    lower: float
    permutation: tuple[int, ...]
    n_classes: int
    regrid_error: float
    aligned: CutResult = field(repr=False)

    def to_json(self) -> dict:
        return {"upper": self.upper, "lower": self.lower, "n_classes": self.n_classes,
                "regrid_error": self.regrid_error, "permutation": list(self.permutation)}


def _batched_exact_eq(D: np.ndarray) -> np.ndarray:
    """Exact cut norms of a batch of equal-length-class matrices (b, k, k)."""
    b, k, _ = D.shape
    X = _subset_matrix(k)
    C = np.einsum("sk,bkj->bsj", X, D)
    pos = np.clip(C, 0, None).sum(-1).max(-1)
    neg = np.clip(-C, 0, None).sum(-1).max(-1)
    return np.maximum(pos, neg) / k**2


def _regrid_error(W: StepGraphon, Wr: StepGraphon, limit: int) -> float:
    if Wr.m == W.m and np.allclose(Wr.lengths, W.lengths, atol=1e-12):
        if np.allclose(Wr.values, W.values, atol=0, rtol=0):
            return 0.0
    return d_cut(W, Wr, limit=limit).upper


def delta_cut_search(U: StepGraphon, W: StepGraphon, budget: int = 4, seed: int = 0,
                     n_classes: int | None = None, certify_limit: int = 24) -> DeltaResult:
    """Search class permutations of a common equipartition for a small d_cut.

    ``upper`` is a certified upper bound on the unlabeled cut distance of the
    original pair: the aligned cut norm plus the cut-norm cost of regridding.
    """
    if n_classes is None:
        if U.is_equipartition() and W.is_equipartition() and U.m == W.m:
            n_classes = U.m
        else:
            n_classes = 24
    k = int(n_classes)
    eq = np.full(k, 1.0 / k)
    Ur, Wr = regrid(U, eq), regrid(W, eq)
    err = _regrid_error(U, Ur, EXACT_LIMIT) + _regrid_error(W, Wr, EXACT_LIMIT)
    Uv, Wv = Ur.values, Wr.values

    if k <= 8:
        perms = np.array(list(itertools.permutations(range(k))), dtype=int)
        vals = np.empty(len(perms))
        for s in range(0, len(perms), 2048):
            P = perms[s:s + 2048]
            D = Uv[P[:, :, None], P[:, None, :]] - Wv[None]
            vals[s:s + 2048] = _batched_exact_eq(D)
        best_perm = perms[int(np.argmin(vals))]
    else:
        best_perm = _hill_climb(Uv, Wv, budget, seed)

    aligned = d_cut(Ur.permute(best_perm), Wr, limit=certify_limit, seed=seed)
    upper = aligned.upper + err
    return DeltaResult(upper, delta_cut_lower(U, W), tuple(int(i) for i in best_perm), k, err, aligned)


def _objective(Uv, Wv, perm, seed) -> float:
    k = len(perm)
    D = StepGraphon(np.full(k, 1.0 / k), Uv[np.ix_(perm, perm)] - Wv)
    return cut_norm_heuristic(D, restarts=4, seed=seed).lower


def _hill_climb(Uv, Wv, budget, seed, max_evals: int = 1500):
    k = Uv.shape[0]
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & (2**63 - 1), 7])))
    # degree-profile alignment: match classes by sorted row sums
    perm0 = np.empty(k, dtype=int)
    perm0[np.argsort(Wv.sum(axis=1), kind="stable")] = np.argsort(Uv.sum(axis=1), kind="stable")
    starts = [perm0] + [rng.permutation(k) for _ in range(max(0, budget - 1))]
    best_perm, best_val = perm0, np.inf
    evals = 0
    for perm in starts:
        perm = perm.copy()
        val = _objective(Uv, Wv, perm, seed)
        improved = True
        while improved and evals < max_evals:
            improved = False
            for i in range(k):
                for j in range(i + 1, k):
                    perm[i], perm[j] = perm[j], perm[i]
                    v = _objective(Uv, Wv, perm, seed)
                    evals += 1
                    if v < val - 1e-12:
                        val, improved = v, True
                    else:
                        perm[i], perm[j] = perm[j], perm[i]
                    if evals >= max_evals:
                        break
                if evals >= max_evals:
                    break
        if val < best_val:
            best_val, best_perm = val, perm.copy()
    ident = np.arange(k)
    if _objective(Uv, Wv, ident, seed) < best_val:
        best_perm = ident
    return best_perm


def delta_cut_upper(U: StepGraphon, W: StepGraphon, budget: int = 4, seed: int = 0,
                    n_classes: int | None = None) -> float:
    return delta_cut_search(U, W, budget, seed, n_classes).upper


def delta_cut_lower(U: StepGraphon, W: StepGraphon) -> float:
    """|E U - E W|, a lower bound on the unlabeled cut distance."""
    return abs(U.mean() - W.mean())


def delta_cut_lower_box(U: StepGraphon, W: StepGraphon, limit: int = EXACT_LIMIT) -> float:
    """Lower bound on the unlabeled cut distance from square boxes.

    After any relabeling of W, <W, 1_{S x S}> lies between lambda(S)^2 min W and
    lambda(S)^2 max W, so max over S of |<U, 1_{S x S}> - that range| is a
    lower bound. S ranges over class subsets of each operand in turn.
    """
    best = delta_cut_lower(U, W)
    for X, Y in ((U, W), (W, U)):
        Xc, _ = compress(X)
        if Xc.m > limit:
            raise ResolutionError(f"{Xc.m} classes exceeds exact limit {limit}")
        A = Xc.weighted()
        S = _subset_matrix(Xc.m)
        s = S @ Xc.lengths
        q = np.einsum("ri,ij,rj->r", S, A, S)
        hi, lo = float(Y.values.max()), float(Y.values.min())
        best = max(best, float(np.max(q - s**2 * hi)), float(np.max(s**2 * lo - q)))
    return max(best, 0.0)


__all__ = [
    "CutWitness", "CutResult", "DeltaResult", "cut_norm_exact", "cut_norm_heuristic", "cut_norm",
    "infty_to_one_norm", "d_cut", "delta_cut_upper", "delta_cut_search", "delta_cut_lower",
    "delta_cut_lower_box", "spectral_bound", "certified_upper", "box_value", "GraphonLabError",
]
