"""Data flow edges over the UAST node set.

Two edge families:

* definition -> use: from a defining node (Parameter, AssignStmt, ForStmt) to
  every Variable read it reaches, via reaching definitions on a statement graph;
* consumption: from an expression node to its parent when that parent consumes
  the value (an operator, call, condition, assignment or for-range header).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .uast import ROOT, UastNode

CONSUMERS = frozenset({"BinaryExpr", "UnaryExpr", "CallExpr", "ConditionExpr", "AssignStmt", "ForStmt"})
VALUE_NODES = frozenset({"BinaryExpr", "UnaryExpr", "CallExpr", "Variable", "Literal"})
DEFINERS = frozenset({"Parameter", "AssignStmt", "ForStmt"})


def is_write_target(nodes: list[UastNode], idx: int) -> bool:
    """True for the Variable on the left of ``=`` or bound by ``for``."""
    node = nodes[idx]
    if node.node_type != "Variable" or node.parent == ROOT:
        return False
    parent = nodes[node.parent]
    return parent.node_type in ("AssignStmt", "ForStmt") and parent.children[0] == idx


def variable_reads(nodes: list[UastNode], root: int) -> list[int]:
    """Variable read nodes in the subtree at ``root`` (pre-order)."""
    out = []
    stack = [root]
    while stack:
        i = stack.pop()
        if nodes[i].node_type == "Variable" and not is_write_target(nodes, i):
            out.append(i)
        stack.extend(reversed(nodes[i].children))
    return out


def consumption_edges(nodes: list[UastNode]) -> list[tuple[int, int]]:
    edges = []
    for n in nodes:
        if n.node_type not in VALUE_NODES or n.parent == ROOT:
            continue
        if nodes[n.parent].node_type in CONSUMERS and not is_write_target(nodes, n.idx):
            edges.append((n.idx, n.parent))
    return edges


@dataclass
class StmtNode:
    """One vertex of the statement graph."""

    reads: list[int] = field(default_factory=list)
    defs: list[tuple[str, int]] = field(default_factory=list)
    succ: list[int] = field(default_factory=list)


class StatementGraph:
    """Control flow between statements of one scope (program top level or a function body)."""

    def __init__(self, nodes: list[UastNode]):
        self.ast = nodes
        self.verts: list[StmtNode] = []

    def add(self, reads=(), defs=()) -> int:
        self.verts.append(StmtNode(list(reads), list(defs)))
        return len(self.verts) - 1

    def link(self, preds: list[int], target: int) -> None:
        for p in preds:
            if target not in self.verts[p].succ:
                self.verts[p].succ.append(target)

    def build_seq(self, stmts: list[int], preds: list[int]) -> list[int]:
        """Wire statements in order after ``preds``; returns the fall-through exits."""
        for s in stmts:
            preds = self.build_stmt(s, preds)
        return preds

    def build_stmt(self, idx: int, preds: list[int]) -> list[int]:
        ast = self.ast
        node = ast[idx]
        kind = node.node_type
        if kind == "AssignStmt":
            v = self.add(variable_reads(ast, node.children[1]), [(node.name, idx)])
            self.link(preds, v)
            return [v]
        if kind == "ReturnStmt":
            v = self.add(variable_reads(ast, idx))
            self.link(preds, v)
            return []
        if kind == "CallExpr":
            v = self.add(variable_reads(ast, idx))
            self.link(preds, v)
            return [v]
        if kind == "IfStmt":
            cond = self.add(variable_reads(ast, node.children[0]))
            self.link(preds, cond)
            exits = self.build_seq(ast[node.children[1]].children, [cond])
            if len(node.children) > 2:
                exits = exits + self.build_seq(ast[node.children[2]].children, [cond])
            else:
                exits = exits + [cond]
            return exits
        if kind == "WhileStmt":
            cond = self.add(variable_reads(ast, node.children[0]))
            self.link(preds, cond)
            body_exits = self.build_seq(ast[node.children[1]].children, [cond])
            self.link(body_exits, cond)
            return [cond]
        if kind == "ForStmt":
            init = self.add(variable_reads(ast, node.children[1]))
            self.link(preds, init)
            header = self.add()
            self.link([init], header)
            bind = self.add(defs=[(node.name, idx)])
            self.link([header], bind)
            body_exits = self.build_seq(ast[node.children[2]].children, [bind])
            self.link(body_exits, header)
            return [header]
        raise ValueError(f"unexpected statement kind {kind}")


def scopes(nodes: list[UastNode]) -> list[tuple[list[tuple[str, int]], list[int]]]:
    """(entry definitions, statement list) for the top level and each function."""
    root = nodes[0]
    top = [c for c in root.children if nodes[c].node_type != "FunctionDecl"]
    out = [([], top)]
    for c in root.children:
        fn = nodes[c]
        if fn.node_type != "FunctionDecl":
            continue
        params: list[tuple[str, int]] = []
        body = []
        for k in fn.children:
            if nodes[k].node_type == "Parameters":
                params = [(nodes[p].name, p) for p in nodes[k].children]
            else:
                body.append(k)
        out.append((params, body))
    return out


def build_statement_graph(nodes: list[UastNode], entry_defs, stmts) -> StatementGraph:
    g = StatementGraph(nodes)
    entry = g.add(defs=entry_defs)
    g.build_seq(stmts, [entry])
    return g


def reaching_definitions(g: StatementGraph) -> list[frozenset[tuple[str, int]]]:
    """IN sets of (name, defining node) per statement vertex, by worklist fixed point."""
    n = len(g.verts)
    preds: list[list[int]] = [[] for _ in range(n)]
    for i, v in enumerate(g.verts):
        for s in v.succ:
            preds[s].append(i)
    # Statements after a return never execute and must not generate definitions.
    reachable = {0}
    stack = [0]
    while stack:
        for s in g.verts[stack.pop()].succ:
            if s not in reachable:
                reachable.add(s)
                stack.append(s)
    in_sets: list[frozenset] = [frozenset()] * n
    out_sets: list[frozenset] = [frozenset()] * n
    worklist = sorted(reachable)
    while worklist:
        i = worklist.pop(0)
        inval = frozenset().union(*(out_sets[p] for p in preds[i]))
        in_sets[i] = inval
        v = g.verts[i]
        killed = {name for name, _ in v.defs}
        outval = frozenset(d for d in inval if d[0] not in killed) | frozenset(v.defs)
        if outval != out_sets[i]:
            out_sets[i] = outval
            worklist.extend(s for s in v.succ if s not in worklist and s in reachable)
    return in_sets


def def_use_edges(nodes: list[UastNode]) -> list[tuple[int, int]]:
    edges = set()
    for entry_defs, stmts in scopes(nodes):
        g = build_statement_graph(nodes, entry_defs, stmts)
        in_sets = reaching_definitions(g)
        for v, reach in zip(g.verts, in_sets):
            for r in v.reads:
                name = nodes[r].name
                for dname, d in reach:
                    if dname == name:
                        edges.add((d, r))
    return sorted(edges)


def build_dfg(nodes: list[UastNode]) -> list[tuple[int, int]]:
    """All DFG edges for a parsed program, sorted by (from, to)."""
    return sorted(set(def_use_edges(nodes)) | set(consumption_edges(nodes)))
