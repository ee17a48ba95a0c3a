from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .dfg import build_dfg
from .lexer import count_tokens
from .parser import parse
from .uast import NODE_TYPES, ROOT, CodeGraph, SourceUnit, UastNode

DEFAULT_MAX_TOKENS = 512


@dataclass(frozen=True)
class Rejected:
    unit_id: str
    reason: str  # "TooLong", "Empty", or "SyntaxError: ..." from the CLI


class GraphValidationError(ValueError):
    pass


def make_unit(unit_id: str, source: str) -> SourceUnit:
    return SourceUnit(unit_id, source, count_tokens(source))


def validate(graph: CodeGraph) -> None:
    """Check the structural invariants of a graph record; raises GraphValidationError."""
    nodes = graph.nodes
    n = len(nodes)
    if n == 0:
        raise GraphValidationError("graph has no nodes")
    roots = [node.idx for node in nodes if node.parent == ROOT]
    if roots != [0] or nodes[0].node_type != "Program":
        raise GraphValidationError(f"expected a single Program root at index 0, got roots {roots}")
    for i, node in enumerate(nodes):
        if node.idx != i:
            raise GraphValidationError(f"node {i} has idx {node.idx}")
        if node.node_type not in NODE_TYPES:
            raise GraphValidationError(f"unknown node type {node.node_type!r}")
        if not 0 <= node.begin <= node.end:
            raise GraphValidationError(f"bad span on node {i}")
        if node.parent != ROOT:
            # Pre-order: parents precede children, which also rules out cycles.
            if not 0 <= node.parent < i:
                raise GraphValidationError(f"node {i} has invalid parent {node.parent}")
            p = nodes[node.parent]
            if not (p.begin <= node.begin and node.end <= p.end):
                raise GraphValidationError(f"span of node {i} escapes its parent")
    for f, t in graph.dfg_edges:
        if not (0 <= f < n and 0 <= t < n):
            raise GraphValidationError(f"edge ({f}, {t}) out of range")
        if f == t:
            raise GraphValidationError(f"self edge on node {f}")


def is_empty(graph: CodeGraph) -> bool:
    return graph.n_nodes <= 1 and graph.n_edges == 0


def graph_from_source(unit_id: str, source: str) -> CodeGraph:
    nodes = parse(source)
    return CodeGraph(unit_id, source, nodes, build_dfg(nodes))


def extract(unit: SourceUnit, max_tokens: int = DEFAULT_MAX_TOKENS) -> CodeGraph | Rejected:
    """Parse a unit into a validated CodeGraph, or reject it as too long or empty."""
    if unit.token_count > max_tokens:
        return Rejected(unit.id, "TooLong")
    graph = graph_from_source(unit.id, unit.source)
    if is_empty(graph):
        return Rejected(unit.id, "Empty")
    validate(graph)
    return graph


# -- JSONL records -----------------------------------------------------------

def graph_to_record(graph: CodeGraph) -> dict:
    return {
        "id": graph.unit_id,
        "language": graph.language,
        "source": graph.source,
        "nodes": [
            {"idx": n.idx, "type": n.node_type, "begin": n.begin, "end": n.end, "parent": n.parent}
            for n in graph.nodes
        ],
        "dfg_edges": [[f, t] for f, t in graph.dfg_edges],
    }


def graph_to_json(graph: CodeGraph) -> str:
    return json.dumps(graph_to_record(graph), ensure_ascii=False)


def graph_from_record(rec: dict) -> CodeGraph:
    source = rec["source"]
    raw = source.encode("utf-8")
    nodes = []
    for r in rec["nodes"]:
        node = UastNode(r["idx"], r["type"], r["begin"], r["end"], r["parent"])
        if node.node_type in ("Variable", "Parameter"):
            node.name = raw[node.begin:node.end].decode("utf-8")
        nodes.append(node)
    for node in nodes:
        if node.parent != ROOT:
            nodes[node.parent].children.append(node.idx)
    graph = CodeGraph(rec["id"], source, nodes, [(f, t) for f, t in rec["dfg_edges"]], rec.get("language", "minilang"))
    validate(graph)
    return graph


def graph_from_json(line: str) -> CodeGraph:
    return graph_from_record(json.loads(line))


def write_graphs(path: str | Path, graphs: Iterable[CodeGraph]) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as f:
        for g in graphs:
            f.write(graph_to_json(g))
            f.write("\n")
            count += 1
    return count


def read_graphs(path: str | Path) -> list[CodeGraph]:
    with open(path, encoding="utf-8") as f:
        return [graph_from_json(line) for line in f if line.strip()]


def iter_units(directory: str | Path) -> Iterator[SourceUnit]:
    """Yield one SourceUnit per ``.mini`` file, sorted by relative path."""
    root = Path(directory)
    for path in sorted(root.rglob("*.mini")):
        unit_id = path.relative_to(root).with_suffix("").as_posix()
        yield make_unit(unit_id, path.read_text(encoding="utf-8"))
