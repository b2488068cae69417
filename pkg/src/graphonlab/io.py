"""Reading and writing graphs (TSV) and graphons (JSON)."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .core import GraphonLabError, StepGraphon, WeightedGraph

GRAPH_HEADER = "#weighted-graph v1"


class ParseError(GraphonLabError):
    pass


def parse_graph(text: str) -> WeightedGraph:
    lines = [ln.strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    if not lines or lines[0] != GRAPH_HEADER:
        raise ParseError(f"missing header {GRAPH_HEADER!r}")
    ids: dict[str, int] = {}
    weights: list[float] = []
    edges = []
    for lineno, ln in enumerate(lines[1:], start=2):
        if ln.startswith("#"):
            continue
        parts = ln.split()
        try:
            if parts[0] == "v" and len(parts) == 3:
                if parts[1] in ids:
                    raise ParseError(f"line {lineno}: duplicate vertex {parts[1]}")
                ids[parts[1]] = len(weights)
                weights.append(float(parts[2]))
            elif parts[0] == "e" and len(parts) == 4:
                edges.append((parts[1], parts[2], float(parts[3]), lineno))
            else:
                raise ParseError(f"line {lineno}: cannot parse {ln!r}")
        except ValueError as exc:
            raise ParseError(f"line {lineno}: {exc}") from None
    triples = []
    for a, b, w, lineno in edges:
        if a not in ids or b not in ids:
            raise ParseError(f"line {lineno}: unknown vertex")
        triples.append((ids[a], ids[b], w))
    try:
        return WeightedGraph.from_edges(np.array(weights), triples)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def format_graph(G: WeightedGraph) -> str:
    out = [GRAPH_HEADER]
    out += [f"v {i} {a!r}" for i, a in enumerate(G.vertex_weights.tolist())]
    for (i, j), w in sorted(G.edges.items()):
        out.append(f"e {i} {j} {w!r}")
    return "\n".join(out) + "\n"


def parse_graphon(text: str) -> StepGraphon:
    try:
        obj = json.loads(text)
        return StepGraphon(np.asarray(obj["lengths"], dtype=float), np.asarray(obj["values"], dtype=float))
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"bad graphon file: {exc}") from None


def graphon_to_json(W: StepGraphon) -> dict:
    return {"lengths": W.lengths.tolist(), "values": W.values.tolist()}


def load(path) -> WeightedGraph | StepGraphon:
    """Load a graph or graphon file, deciding by content."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(str(exc)) from None
    if text.lstrip().startswith("{"):
        return parse_graphon(text)
    return parse_graph(text)


def save_graph(G: WeightedGraph, path) -> None:
    Path(path).write_text(format_graph(G))


def save_graphon(W: StepGraphon, path) -> None:
    Path(path).write_text(json.dumps(graphon_to_json(W)) + "\n")
