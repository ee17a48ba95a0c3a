"""MiniLang frontend: lexer, parser to UAST, data flow graph, graph extraction."""
from .dfg import build_dfg
from .extract import (
    DEFAULT_MAX_TOKENS,
    Rejected,
    extract,
    graph_from_json,
    graph_from_source,
    graph_to_json,
    make_unit,
    read_graphs,
    validate,
    write_graphs,
)
from .lexer import MiniSyntaxError, count_tokens, tokenize
from .parser import parse
from .uast import NODE_TYPES, ROOT, CodeGraph, SourceUnit, UastNode

__all__ = [
    "DEFAULT_MAX_TOKENS", "NODE_TYPES", "ROOT", "CodeGraph", "MiniSyntaxError", "Rejected",
    "SourceUnit", "UastNode", "build_dfg", "count_tokens", "extract", "graph_from_json",
    "graph_from_source", "graph_to_json", "make_unit", "parse", "read_graphs", "tokenize",
    "validate", "write_graphs",
]
