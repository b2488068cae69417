"""graphon-lab command line.

Exit codes: 0 success, 2 bad input, 3 resolution guard, 4 upper regularity
falsified, 5 dominant node.
"""

from __future__ import annotations

import argparse
import json
import math
import os
from pathlib import Path
import sys

import numpy as np

from .core import (
    DominantNodeError,
    GraphonLabError,
    ResolutionError,
    StepGraphon,
    UpperRegularityViolation,
    WeightedGraph,
    embed_graph,
    graph_lp_norm,
    graphon_lp_norm,
    normalize,
    quotient,
)
from . import io as gio

EXIT_OK, EXIT_INPUT, EXIT_RESOLUTION, EXIT_FALSIFIED, EXIT_DOMINANT = 0, 2, 3, 4, 5


def _clean(o):
    """JSON-safe copy: numpy scalars and arrays unwrapped, infinities as strings."""
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple, np.ndarray)):
        return [_clean(v) for v in o]
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        o = o.item()
    if isinstance(o, float) and not math.isfinite(o):
        return "inf" if o > 0 else ("-inf" if o < 0 else "nan")
    return o


def _dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)


def _emit(obj):
    print(_dumps(obj))


def _as_graphon(obj) -> StepGraphon:
    return embed_graph(obj) if isinstance(obj, WeightedGraph) else obj


def _parse_p(s: str) -> float:
    return math.inf if s.lower() in ("inf", "infinity") else float(s)


def cmd_dist(args) -> int:
    from .cutmetric import d_cut, delta_cut_search
    U = _as_graphon(gio.load(args.first))
    W = _as_graphon(gio.load(args.second))
    res = d_cut(U, W, seed=args.seed)
    out = {"d_cut": {"lower": res.lower, "upper": res.upper}, "method": res.method,
           "witness": res.witness.to_json()}
    if not args.no_delta:
        delta = delta_cut_search(U, W, budget=args.budget, seed=args.seed)
        out["delta_upper"] = delta.upper
        out["delta_lower"] = delta.lower
        out["delta_classes"] = delta.n_classes
    _emit(out)
    return EXIT_OK


def cmd_norms(args) -> int:
    obj = gio.load(args.file)
    ps = [_parse_p(p) for p in args.p]
    if isinstance(obj, WeightedGraph):
        norms = {str(p): graph_lp_norm(obj, p) for p in ps}
    else:
        norms = {str(p): graphon_lp_norm(obj, p) for p in ps}
    _emit({"norms": norms})
    return EXIT_OK


def _write_json(path: Path, obj):
    path.write_text(_dumps(obj) + "\n")


def cmd_regularize(args) -> int:
    from .regularity import RegularityParams, weak_regularity_graph, weak_regularity_upper
    obj = gio.load(args.file)
    params = RegularityParams(p=args.p, eps=args.eps, C=args.C, eta=args.eta)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if isinstance(obj, WeightedGraph):
            rep = weak_regularity_graph(obj, params, seed=args.seed)
        else:
            rep = weak_regularity_upper(obj, params, seed=args.seed)
    except UpperRegularityViolation as exc:
        cert = {"reason": str(exc), "stepped_norm": exc.value, "C": args.C, "eta": args.eta, "p": args.p,
                "partition": exc.partition.to_json()}
        _write_json(out_dir / "certificate.json", cert)
        _emit({"status": "falsified", **cert})
        return EXIT_FALSIFIED
    base = normalize(obj) if isinstance(obj, WeightedGraph) else obj
    _write_json(out_dir / "partition.json", rep.partition.to_json())
    gio.save_graphon(quotient(base, rep.partition), out_dir / "stepped.json")
    report = rep.to_json()
    report["bound"] = params.C * params.eps
    _write_json(out_dir / "report.json", report)
    _emit({k: report[k] for k in ("status", "error_cut", "error_lower", "bound", "iterations")}
          | {"parts": rep.partition.size, "min_part": float(rep.partition.class_measures.min())})
    return EXIT_OK


def cmd_check_upper(args) -> int:
    from .upperreg import check_upper_regular_exact, falsify_upper_regular, ENUM_LIMIT
    G = gio.load(args.file)
    if not isinstance(G, WeightedGraph):
        raise gio.ParseError("check-upper expects a graph file")
    if G.n <= ENUM_LIMIT and not args.search:
        v = check_upper_regular_exact(G, args.C, args.eta, args.p)
    else:
        v = falsify_upper_regular(G, args.C, args.eta, args.p, args.budget, args.seed)
    _emit(v.to_json())
    if v.reason == "dominant node":
        return EXIT_DOMINANT
    return EXIT_FALSIFIED if v.status == "falsified" else EXIT_OK


def cmd_sample(args) -> int:
    from . import sampling
    if args.model in ("h", "g"):
        if not args.graphon:
            raise gio.ParseError("--graphon is required for this model")
        W = gio.load(args.graphon)
        if not isinstance(W, StepGraphon):
            raise gio.ParseError("--graphon must be a graphon file")
        G = sampling.sample_h(args.n, W, args.seed) if args.model == "h" else \
            sampling.sample_g(args.n, W, args.rho, args.seed)
    elif args.model == "powerlaw":
        G = sampling.power_law_graph(args.n, args.alpha, args.beta, args.seed)
    else:
        G = sampling.clique_sequence(args.n)
    text = gio.format_graph(G)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_value(s: str):
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def cmd_experiment(args) -> int:
    from .experiments import ExperimentSpec, SpecError, run, to_csv
    if args.spec:
        try:
            obj = json.loads(Path(args.spec).read_text())
            spec = ExperimentSpec(obj["kind"], obj.get("params", {}), obj.get("seeds", [0]),
                                  obj.get("output_path"))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise SpecError(f"bad spec file: {exc}") from None
    else:
        if not args.kind:
            raise SpecError("either --spec or --kind is required")
        params = {}
        for item in args.set or []:
            if "=" not in item:
                raise SpecError(f"--set expects key=value, got {item!r}")
            k, v = item.split("=", 1)
            params[k] = _parse_value(v)
        seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [args.seed]
        spec = ExperimentSpec(args.kind, params, seeds, args.out)
    out = args.out or spec.output_path
    if not out:
        raise SpecError("an output path is required")
    rows = run(spec, threads=args.threads, tol=args.tolerance)
    Path(out).write_text(to_csv(rows))
    if args.plot:
        from .plotting import write_svg
        write_svg(rows, args.plot, args.plot_metric)
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


def cmd_motif(args) -> int:
    from .counting import MotifGraph, hom_density_graphon, holder_bound
    F = MotifGraph.parse(args.motif)
    W = _as_graphon(gio.load(args.file))
    _emit({"t": hom_density_graphon(F, W), "holder_bound": holder_bound(F, W),
           "max_degree": F.max_degree, "edges": F.edge_count})
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="graphon-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--tolerance", type=float, default=1e-9)
    parser.add_argument("--max-classes", type=int, default=None,
                        help="grid resolution guard (default 4096, or $GRAPHONLAB_MAX_CLASSES)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("dist", help="cut distances between two graph/graphon files")
    p.add_argument("first")
    p.add_argument("second")
    p.add_argument("--budget", type=int, default=4)
    p.add_argument("--no-delta", action="store_true")
    p.set_defaults(fn=cmd_dist)

    p = sub.add_parser("norms", help="L^p norms of a graph or graphon")
    p.add_argument("file")
    p.add_argument("--p", nargs="+", default=["1", "2", "inf"])
    p.set_defaults(fn=cmd_norms)

    p = sub.add_parser("regularize", help="upper-regular weak regularity partition")
    p.add_argument("file")
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--eta", type=float, default=0.05)
    p.add_argument("--out-dir", default=".")
    p.set_defaults(fn=cmd_regularize)

    p = sub.add_parser("check-upper", help="decide or falsify (C, eta)-upper L^p regularity")
    p.add_argument("file")
    p.add_argument("--C", type=float, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--p", type=_parse_p, required=True)
    p.add_argument("--budget", type=int, default=16)
    p.add_argument("--search", action="store_true", help="use the falsification search even on small graphs")
    p.set_defaults(fn=cmd_check_upper)

    p = sub.add_parser("sample", help="draw a random graph")
    p.add_argument("--model", choices=["h", "g", "powerlaw", "clique"], required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--graphon")
    p.add_argument("--rho", type=float, default=1.0)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--beta", type=float, default=0.5)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("experiment", help="run an experiment and write CSV rows")
    p.add_argument("--spec", help="JSON file with kind, params, seeds, output_path")
    p.add_argument("--kind")
    p.add_argument("--set", action="append", metavar="KEY=VALUE")
    p.add_argument("--seeds", help="comma-separated seeds")
    p.add_argument("--out")
    p.add_argument("--plot", help="also write an SVG line chart of the per-n summary")
    p.add_argument("--plot-metric")
    p.set_defaults(fn=cmd_experiment)

    p = sub.add_parser("motif", help="homomorphism density of a motif")
    p.add_argument("motif", help='built-in name or edge list like "1-2,2-3,3-1"')
    p.add_argument("file")
    p.set_defaults(fn=cmd_motif)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.max_classes is not None:
        os.environ["GRAPHONLAB_MAX_CLASSES"] = str(args.max_classes)
    from .experiments import SpecError
    try:
        return args.fn(args)
    except DominantNodeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMINANT
    except ResolutionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except (gio.ParseError, SpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GraphonLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
