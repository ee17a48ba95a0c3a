"""Universal AST node kinds and the per-program graph record."""
from __future__ import annotations

from dataclasses import dataclass, field

ROOT = -1

NODE_TYPES = (
    "Program",
    "FunctionDecl",
    "Parameters",
    "Parameter",
    "Block",
    "AssignStmt",
    "ReturnStmt",
    "IfStmt",
    "WhileStmt",
    "ForStmt",
    "CallExpr",
    "BinaryExpr",
    "UnaryExpr",
    "Variable",
    "Literal",
    "ConditionExpr",
)
NODE_TYPE_INDEX = {name: i for i, name in enumerate(NODE_TYPES)}

STATEMENT_TYPES = frozenset(
    {"AssignStmt", "ReturnStmt", "IfStmt", "WhileStmt", "ForStmt", "CallExpr", "FunctionDecl"}
)
EXPRESSION_TYPES = frozenset(
    {"CallExpr", "BinaryExpr", "UnaryExpr", "Variable", "Literal", "ConditionExpr"}
)


@dataclass
class UastNode:
    idx: int
    node_type: str
    begin: int
    end: int
    parent: int = ROOT
    # Parser-side annotations; not serialized. ``name`` holds the identifier for
    # Variable/Parameter nodes and the callee/function name for calls/decls.
    name: str | None = None
    op: str | None = None
    children: list[int] = field(default_factory=list, repr=False)


@dataclass
class SourceUnit:
    id: str
    source: str
    token_count: int = 0


@dataclass
class CodeGraph:
    unit_id: str
    source: str
    nodes: list[UastNode]
    dfg_edges: list[tuple[int, int]]
    language: str = "minilang"

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.dfg_edges)

    def text(self, idx: int) -> str:
        node = self.nodes[idx]
        return self.source.encode("utf-8")[node.begin:node.end].decode("utf-8")

    def ast_edges(self) -> list[tuple[int, int]]:
        """Parent -> child pairs, in child order."""
        return [(n.parent, n.idx) for n in self.nodes if n.parent != ROOT]

    def edges(self, view: str) -> list[tuple[int, int]]:
        if view == "AST":
            return self.ast_edges()
        if view == "DFG":
            return list(self.dfg_edges)
        raise ValueError(f"unknown graph view {view!r}")
