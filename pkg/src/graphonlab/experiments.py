"""Desk-scale experiments producing (kind, n, seed, metric, value, certified) rows."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import csv
import io
import math

import numpy as np

from .core import (
    GraphonLabError,
    StepGraphon,
    WeightedGraph,
    embed_graph,
    graph_lp_norm,
    lp_distance,
    normalize,
)
from .counting import MotifGraph, counterexample_family
from .cutmetric import d_cut, delta_cut_lower_box
from .sampling import (
    ChernoffParams,
    DoublingFamily,
    chernoff_bound,
    chernoff_empirical,
    clique_sequence,
    cutoff_mass,
    expected_power_law_edges,
    power_law_graph,
    sample_g,
    sample_h,
    sparsify_concentration_check,
)

COLUMNS = ("kind", "n", "seed", "metric", "value", "certified")

TWO_BLOCK = [[0.9, 0.2], [0.2, 0.6]]

DEFAULTS = {
    "h_convergence": {"ns": [100, 400, 1600], "values": TWO_BLOCK},
    "g_convergence": {"ns": [200, 800, 3200], "values": TWO_BLOCK, "rho_exponent": 0.5, "restarts": 32},
    "power_law": {"ns": [250, 500, 1000, 2000], "alpha": 0.5, "beta": 0.5},
    "clique_divergence": {"ns": [2, 3]},
    "doubling_cauchy": {"steps": 5, "k": 32},
    "chernoff": {"ns": [50, 200], "probs": [0.1, 0.5], "lams": [0.2, 0.5, 1.0, 2.0], "draws": 100000},
    "sparsification": {"n": 12, "beta": 0.5, "eps": 0.5, "trials": 2000},
    "counting_sweep": {"ns": [100, 10000, 1000000], "motif": "C4"},
    "regularize": {"n": 100, "p": 2.0, "eps": 0.3, "C": 1.1, "eta": 0.05, "density": 0.5},
    "upperreg_check": {"n": 100, "p": 2.0, "C": 2.0, "eta": 0.1, "budget": 16, "density": 0.5},
}

SEEDED = {"h_convergence", "g_convergence", "power_law", "chernoff", "sparsification",
          "regularize", "upperreg_check", "doubling_cauchy"}


class SpecError(GraphonLabError):
    pass


@dataclass
class ExperimentSpec:
    kind: str
    params: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    output_path: str | None = None

    def validate(self) -> dict:
        if self.kind not in DEFAULTS:
            raise SpecError(f"unknown experiment kind {self.kind!r}")
        unknown = set(self.params) - set(DEFAULTS[self.kind])
        if unknown:
            raise SpecError(f"unknown parameters for {self.kind}: {sorted(unknown)}")
        if not self.seeds:
            raise SpecError("at least one seed is required")
        merged = {**DEFAULTS[self.kind], **self.params}
        for key in ("ns",):
            if key in merged and (not isinstance(merged[key], list) or not merged[key]):
                raise SpecError(f"{key} must be a nonempty list")
        return merged


def _row(kind, n, seed, metric, value, certified=False):
    return {"kind": kind, "n": n, "seed": seed, "metric": metric, "value": float(value),
            "certified": bool(certified)}


def _map(fn, cells, threads):
    if threads <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, cells))


def _medians(kind, rows, metric, ns):
    out = []
    meds = []
    for n in ns:
        vals = [r["value"] for r in rows if r["n"] == n and r["metric"] == metric]
        med = float(np.median(vals))
        meds.append(med)
        out.append(_row(kind, n, "median", metric, med))
    dec = all(b < a for a, b in zip(meds, meds[1:]))
    out.append(_row(kind, "all", "all", f"{metric}_median_decreasing", 1.0 if dec else 0.0))
    return out, meds


def run_h_convergence(prm, seeds, threads, tol):
    W = StepGraphon.equipartition(prm["values"])
    ns = [int(n) for n in prm["ns"]]

    def cell(c):
        n, s = c
        return _row("h_convergence", n, s, "d1", lp_distance(embed_graph(sample_h(n, W, s)), W, 1), True)

    rows = _map(cell, [(n, s) for n in ns for s in seeds], threads)
    summary, meds = _medians("h_convergence", rows, "d1", ns)
    return rows + summary


def run_g_convergence(prm, seeds, threads, tol):
    W = StepGraphon.equipartition(prm["values"])
    ns = [int(n) for n in prm["ns"]]

    def cell(c):
        n, s = c
        rho = n ** (-float(prm["rho_exponent"]))
        G = sample_g(n, W, rho, s)
        res = d_cut(embed_graph(G) / rho, W, restarts=int(prm["restarts"]), seed=s)
        H = sample_h(n, W, s)
        return [
            _row("g_convergence", n, s, "d_cut_lower", res.lower, res.certified),
            _row("g_convergence", n, s, "d_cut_upper", res.upper, True),
            _row("g_convergence", n, s, "cutoff_mass", cutoff_mass(H, rho), True),
        ]

    rows = [r for rs in _map(cell, [(n, s) for n in ns for s in seeds], threads) for r in rs]
    summary, _ = _medians("g_convergence", rows, "d_cut_lower", ns)
    return rows + summary


def loglog_slope(ns, ys) -> float:
    return float(np.polyfit(np.log(ns), np.log(ys), 1)[0])


def run_power_law(prm, seeds, threads, tol):
    a, b = float(prm["alpha"]), float(prm["beta"])
    ns = [int(n) for n in prm["ns"]]

    def cell(c):
        n, s = c
        return _row("power_law", n, s, "edges", power_law_graph(n, a, b, s).edge_count(), True)

    rows = _map(cell, [(n, s) for n in ns for s in seeds], threads)
    means = []
    for n in ns:
        m = float(np.mean([r["value"] for r in rows if r["n"] == n]))
        means.append(m)
        rows.append(_row("power_law", n, "mean", "edges", m, True))
        rows.append(_row("power_law", n, "all", "expected_edges", expected_power_law_edges(n, a, b)[0], True))
    rows.append(_row("power_law", "all", "all", "slope", loglog_slope(ns, means), True))
    rows.append(_row("power_law", "all", "all", "predicted_slope", b - 2 * a + 2, True))
    return rows


def run_clique_divergence(prm, seeds, threads, tol):
    rows = []
    idxs = [int(i) for i in prm["ns"]]
    graphons = {}
    for i in idxs:
        G = clique_sequence(i)
        rows.append(_row("clique_divergence", i, "all", "l1_norm", graph_lp_norm(G, 1), True))
        rows.append(_row("clique_divergence", i, "all", "l1_formula", 2.0 ** (-2 * i) * (i - 1) / i, True))
        graphons[i] = normalize(G)
    for i, j in zip(idxs, idxs[1:]):
        rows.append(_row("clique_divergence", j, "all", "delta_lower_vs_previous",
                         delta_cut_lower_box(graphons[i], graphons[j]), True))
    return rows


def run_doubling_cauchy(prm, seeds, threads, tol):
    rows = []
    for s in seeds:
        fam = DoublingFamily(int(prm["steps"]), s, int(prm["k"]))
        for n in range(1, fam.steps):
            eps = fam.eps(n)
            r = fam.ratio(n)
            rows.append(_row("doubling_cauchy", n, s, "density_ratio", r, True))
            rows.append(_row("doubling_cauchy", n, s, "ratio_within_eps", abs(r - 0.5) <= eps + tol, True))
            b = fam.successive_cut_bound(n)
            rows.append(_row("doubling_cauchy", n, s, "successive_cut_upper", b, True))
            rows.append(_row("doubling_cauchy", n, s, "cauchy_bound", 6 * 0.75**n, True))
            rows.append(_row("doubling_cauchy", n, s, "within_cauchy_bound", b <= 6 * 0.75**n + tol, True))
    return rows


def run_chernoff(prm, seeds, threads, tol):
    cells = [(int(n), float(p), float(lam), s) for n in prm["ns"] for p in prm["probs"]
             for lam in prm["lams"] for s in seeds]
    draws = int(prm["draws"])

    def cell(c):
        n, p, lam, s = c
        params = ChernoffParams(tuple([p] * n), tuple((-1) ** i for i in range(n)), lam)
        emp = chernoff_empirical(params, draws, s * 100003 + n * 101 + int(p * 1000) + int(lam * 10))
        bound = chernoff_bound(params)
        tag = f"p={p}:lam={lam}"
        return [
            _row("chernoff", n, s, f"empirical[{tag}]", emp, False),
            _row("chernoff", n, s, f"bound[{tag}]", bound, True),
            _row("chernoff", n, s, f"holds[{tag}]", emp <= bound + tol, True),
        ]

    return [r for rs in _map(cell, cells, threads) for r in rs]


def run_sparsification(prm, seeds, threads, tol):
    n = int(prm["n"])
    B = np.full((n, n), float(prm["beta"]))
    np.fill_diagonal(B, 0.0)
    H = WeightedGraph(np.ones(n), B)
    rows = []
    for s in seeds:
        rep = sparsify_concentration_check(H, 1.0, float(prm["eps"]), int(prm["trials"]), s)
        rows.append(_row("sparsification", n, s, "failure_frequency", rep["frequency"], True))
        rows.append(_row("sparsification", n, s, "bound", rep["bound"], True))
        rows.append(_row("sparsification", n, s, "vacuous", rep["vacuous"], True))
        rows.append(_row("sparsification", n, s, "holds", rep["holds"], True))
    return rows


def run_counting_sweep(prm, seeds, threads, tol):
    F = MotifGraph.parse(str(prm["motif"]))
    rows = []
    for n in prm["ns"]:
        c = counterexample_family(F, int(n))
        rows += [
            _row("counting_sweep", int(n), "all", "t_value", c.t_value, True),
            _row("counting_sweep", int(n), "all", "l1_dist", c.l1_dist, True),
            _row("counting_sweep", int(n), "all", "ld_norm", c.ld_norm, True),
            _row("counting_sweep", int(n), "all", "u_norm", c.u_norm, True),
        ]
    limit = 2.0 ** int(np.sum(F.degrees == F.max_degree))
    rows.append(_row("counting_sweep", "all", "all", "t_limit", limit, True))
    return rows


def _quasirandom(n, density, seed):
    from .sampling import stream
    iu, ju = np.triu_indices(n, 1)
    keep = stream(seed, "quasirandom").random(iu.size) < density
    A = np.zeros((n, n))
    A[iu[keep], ju[keep]] = 1.0
    return WeightedGraph(np.ones(n), A + A.T)


def run_regularize(prm, seeds, threads, tol):
    from .regularity import RegularityParams, weak_regularity_graph
    params = RegularityParams(float(prm["p"]), float(prm["eps"]), float(prm["C"]), float(prm["eta"]))
    rows = []
    n = int(prm["n"])
    for s in seeds:
        rep = weak_regularity_graph(_quasirandom(n, float(prm["density"]), s), params, s)
        rows.append(_row("regularize", n, s, "error_cut", rep.error_cut, True))
        rows.append(_row("regularize", n, s, "parts", rep.partition.size, True))
        rows.append(_row("regularize", n, s, "within_C_eps", rep.error_cut <= params.C * params.eps + tol, True))
    return rows


def run_upperreg_check(prm, seeds, threads, tol):
    from .upperreg import falsify_upper_regular
    rows = []
    n = int(prm["n"])
    for s in seeds:
        v = falsify_upper_regular(_quasirandom(n, float(prm["density"]), s), float(prm["C"]),
                                  float(prm["eta"]), float(prm["p"]), int(prm["budget"]), s)
        rows.append(_row("upperreg_check", n, s, "worst_value", v.worst_value, False))
        rows.append(_row("upperreg_check", n, s, "falsified", v.status == "falsified", True))
    return rows


RUNNERS = {
    "h_convergence": run_h_convergence,
    "g_convergence": run_g_convergence,
    "power_law": run_power_law,
    "clique_divergence": run_clique_divergence,
    "doubling_cauchy": run_doubling_cauchy,
    "chernoff": run_chernoff,
    "sparsification": run_sparsification,
    "counting_sweep": run_counting_sweep,
    "regularize": run_regularize,
    "upperreg_check": run_upperreg_check,
}


def run(spec: ExperimentSpec, threads: int = 1, tol: float = 1e-9) -> list[dict]:
    prm = spec.validate()
    seeds = [int(s) for s in spec.seeds]
    return sort_rows(RUNNERS[spec.kind](prm, seeds, threads, tol))


def _key_part(v):
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return (0, float(v), "")
    return (1, 0.0, str(v))


def sort_rows(rows):
    return sorted(rows, key=lambda r: (r["kind"], _key_part(r["n"]), _key_part(r["seed"]), r["metric"]))


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def to_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in COLUMNS])
    return buf.getvalue()


def median_series(rows, metric):
    """(n, value) pairs of the summary rows for ``metric``, sorted by n."""
    pts = [(r["n"], r["value"]) for r in rows
           if r["metric"] == metric and r["seed"] in ("median", "mean") and not isinstance(r["n"], str)]
    return sorted(pts)
