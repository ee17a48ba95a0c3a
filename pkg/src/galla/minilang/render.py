from __future__ import annotations

from .uast import ROOT, CodeGraph

TYPE_LABELS = {
    "Program": "program",
    "FunctionDecl": "function declaration",
    "Parameters": "arguments",
    "Parameter": "arguments",
    "Block": "block",
    "AssignStmt": "assignment statement",
    "ReturnStmt": "return statement",
    "IfStmt": "if statement",
    "WhileStmt": "while loop",
    "ForStmt": "for loop",
    "CallExpr": "call expression",
    "BinaryExpr": "binary expression",
    "UnaryExpr": "unary expression",
    "Variable": "variable",
    "Literal": "literal",
    "ConditionExpr": "condition expression",
}


def _one_line(text: str, width: int = 48) -> str:
    text = " ".join(text.split())
    return text if len(text) <= width else text[: width - 3] + "..."


def _table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(header)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    rule = "  ".join("-" * w for w in widths)
    lines = [fmt.format(*header), rule]
    lines.extend(fmt.format(*r) for r in rows)
    return "\n".join(lines)


def ast_table(graph: CodeGraph) -> str:
    rows = []
    for n in graph.nodes:
        parent = "- (root)" if n.parent == ROOT else str(n.parent)
        rows.append([str(n.idx), _one_line(graph.text(n.idx)), TYPE_LABELS[n.node_type], parent])
    return _table(["idx", "content", "type", "parent idx"], rows)


def dfg_table(graph: CodeGraph) -> str:
    rows = []
    for k, (f, t) in enumerate(graph.dfg_edges, start=1):
        src = f"{TYPE_LABELS[graph.nodes[f].node_type]} {_one_line(graph.text(f), 32)}"
        dst = f"{TYPE_LABELS[graph.nodes[t].node_type]} {_one_line(graph.text(t), 32)}"
        rows.append([str(k), src, dst])
    return _table(["idx", "from", "to"], rows)


def inspect(graph: CodeGraph) -> str:
    return (
        f"graph {graph.unit_id}: {graph.n_nodes} nodes, {graph.n_edges} DFG edges\n\n"
        f"AST nodes\n{ast_table(graph)}\n\nDFG edges\n{dfg_table(graph)}\n"
    )
