"""Alignment samples: Graph2Code, GraphQA (edge / parent / child) and downstream."""
from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import Sequence

from ..minilang.uast import ROOT, CodeGraph
from . import templates as T

TASKS = ("Graph2Code", "EdgePred", "ParentPred", "ChildPred", "Downstream", "ControlCodeOnly")
GRAPH_VIEWS = ("AST", "DFG", "NONE")
PLACEMENTS = ("GraphFirst", "TextFirst")
NODE_TEXT_WIDTH = 40


class NoNegativeAvailable(ValueError):
    pass


@dataclass
class AlignmentSample:
    task: str
    graph_id: str | None
    graph_view: str
    prompt: str
    answer: str
    placement: str = "GraphFirst"

    def __post_init__(self):
        if self.task not in TASKS or self.graph_view not in GRAPH_VIEWS or self.placement not in PLACEMENTS:
            raise ValueError(f"bad sample fields: {self.task}, {self.graph_view}, {self.placement}")
        if self.task in ("Downstream", "ControlCodeOnly"):
            if self.graph_id is not None or self.graph_view != "NONE":
                raise ValueError(f"{self.task} samples carry no graph")
        elif self.graph_id is None or self.graph_view == "NONE":
            raise ValueError(f"{self.task} samples need a graph")
        if self.task == "EdgePred" and self.graph_view != "DFG":
            raise ValueError("EdgePred samples use the DFG view")

    def to_record(self) -> dict:
        return {"task": self.task, "graph_id": self.graph_id, "graph_view": self.graph_view,
                "prompt": self.prompt, "answer": self.answer, "placement": self.placement}

    def to_json(self) -> str:
        return json.dumps(self.to_record(), ensure_ascii=False)

    @classmethod
    def from_record(cls, rec: dict) -> "AlignmentSample":
        return cls(rec["task"], rec["graph_id"], rec["graph_view"], rec["prompt"], rec["answer"], rec["placement"])


# -- node rendering ------------------------------------------------------------

def node_text(graph: CodeGraph, idx: int, width: int = NODE_TEXT_WIDTH) -> str:
    """Span text on one line, double quotes swapped for single, cut to ``width`` characters."""
    text = " ".join(graph.text(idx).split()).replace('"', "'")
    if len(text) > width:
        text = text[: width - 3] + "..."
    return text


def render(graph: CodeGraph, idx: int) -> tuple[str, str]:
    """(type label, quoted text) used for {node_type} and {node}."""
    return T.NODE_TYPE_LABELS[graph.nodes[idx].node_type], f'"{node_text(graph, idx)}"'


def rendered(graph: CodeGraph, idx: int) -> str:
    label, text = render(graph, idx)
    return f"{label} {text}"


def unique_nodes(graph: CodeGraph) -> list[int]:
    """Nodes whose rendering no other node of the graph shares."""
    counts: dict[str, int] = {}
    keys = [rendered(graph, n.idx) for n in graph.nodes]
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    return [i for i, k in enumerate(keys) if counts[k] == 1]


def edge_renderings(graph: CodeGraph) -> set[tuple[str, str]]:
    return {(rendered(graph, f), rendered(graph, t)) for f, t in graph.dfg_edges}


def _placement(rng: random.Random) -> str:
    return rng.choice(PLACEMENTS)


# -- Graph2Code ------------------------------------------------------------------

def make_graph2code(graph: CodeGraph, rng_seed, view: str = "AST") -> AlignmentSample:
    rng = random.Random(rng_seed)
    prompt = rng.choice(T.GRAPH2CODE.question_templates)
    return AlignmentSample("Graph2Code", graph.unit_id, view, prompt, graph.source, _placement(rng))


def control_sample(sample: AlignmentSample) -> AlignmentSample:
    """The same Graph2Code prompt and answer with the graph removed."""
    if sample.task != "Graph2Code":
        raise ValueError("control samples derive from Graph2Code samples")
    return AlignmentSample("ControlCodeOnly", None, "NONE", sample.prompt, sample.answer, sample.placement)


# -- GraphQA -----------------------------------------------------------------------

def _edge_question(rng, pair: tuple[str, str], positive: bool, graph_id: str) -> AlignmentSample:
    (t1, n1), (t2, n2) = pair
    values = {"node_type1": t1, "node1": n1, "node_type2": t2, "node2": n2}
    q = T.fill(rng.choice(T.EDGE_PRED.question_templates), **values)
    pool = T.EDGE_PRED.answer_templates_positive if positive else T.EDGE_PRED.answer_templates_negative
    a = T.fill(rng.choice(pool), **values)
    return AlignmentSample("EdgePred", graph_id, "DFG", q, a, _placement(rng))


def _uniform_negative(graph: CodeGraph, rng: random.Random, taken: set) -> tuple[int, int]:
    n = graph.n_nodes
    for _ in range(200):
        u, v = rng.randrange(n), rng.randrange(n)
        if u != v and (rendered(graph, u), rendered(graph, v)) not in taken:
            return u, v
    pool = [(u, v) for u in range(n) for v in range(n)
            if u != v and (rendered(graph, u), rendered(graph, v)) not in taken]
    if not pool:
        raise NoNegativeAvailable(graph.unit_id)
    return rng.choice(pool)


def make_edge_pred(graph: CodeGraph, rng_seed, decoys: Sequence[tuple[str, tuple, tuple]] | None = None
                   ) -> AlignmentSample:
    """Positive (a DFG edge) or negative pair with probability 1/2 each.

    Negatives come from ``decoys`` when given: (graph id, rendered source, rendered
    target) triples taken from the edges of other graphs, kept only when the pair
    is not an edge here. Without decoys, negatives are uniform over non-edges.
    Labels are decided on renderings, so a question never has two answers.
    """
    if not graph.dfg_edges:
        raise ValueError(f"{graph.unit_id}: EdgePred needs at least one DFG edge")
    rng = random.Random(rng_seed)
    taken = edge_renderings(graph)
    if rng.random() < 0.5:
        f, t = rng.choice(graph.dfg_edges)
        return _edge_question(rng, (render(graph, f), render(graph, t)), True, graph.unit_id)
    if decoys:
        for _ in range(50):
            gid, a, b = decoys[rng.randrange(len(decoys))]
            if gid != graph.unit_id and (f"{a[0]} {a[1]}", f"{b[0]} {b[1]}") not in taken:
                return _edge_question(rng, (tuple(a), tuple(b)), False, graph.unit_id)
    try:
        u, v = _uniform_negative(graph, rng, taken)
    except NoNegativeAvailable:
        f, t = rng.choice(graph.dfg_edges)
        return _edge_question(rng, (render(graph, f), render(graph, t)), True, graph.unit_id)
    return _edge_question(rng, (render(graph, u), render(graph, v)), False, graph.unit_id)


def parents(graph: CodeGraph, view: str, idx: int) -> list[int]:
    if view == "AST":
        p = graph.nodes[idx].parent
        return [] if p == ROOT else [p]
    return sorted({f for f, t in graph.dfg_edges if t == idx})


def children(graph: CodeGraph, view: str, idx: int) -> list[int]:
    if view == "AST":
        return list(graph.nodes[idx].children)
    return sorted({t for f, t in graph.dfg_edges if f == idx})


def _pick_node(graph: CodeGraph, rng: random.Random) -> int:
    pool = unique_nodes(graph) or [0]
    return rng.choice(pool)


def make_parent_pred(graph: CodeGraph, view: str, rng_seed) -> AlignmentSample:
    """Ask for a node's parent; in the DFG view the smallest-idx predecessor is named."""
    rng = random.Random(rng_seed)
    idx = _pick_node(graph, rng)
    node_type, node = render(graph, idx)
    q = T.fill(rng.choice(T.PARENT_PRED.question_templates), node_type=node_type, node=node)
    ps = parents(graph, view, idx)
    if ps:
        parent_type, parent = render(graph, ps[0])
        a = T.fill(rng.choice(T.PARENT_PRED.answer_templates_positive), node_type=node_type, node=node,
                   parent=parent, parent_type=parent_type)
    else:
        a = T.fill(rng.choice(T.PARENT_PRED.answer_templates_negative), node_type=node_type, node=node)
    return AlignmentSample("ParentPred", graph.unit_id, view, q, a, _placement(rng))


def child_list(graph: CodeGraph, nodes: Sequence[int]) -> str:
    return ", ".join(rendered(graph, c) for c in nodes)


def make_child_pred(graph: CodeGraph, view: str, rng_seed) -> AlignmentSample:
    rng = random.Random(rng_seed)
    idx = _pick_node(graph, rng)
    node_type, node = render(graph, idx)
    q = T.fill(rng.choice(T.CHILD_PRED.question_templates), node_type=node_type, node=node)
    cs = children(graph, view, idx)
    if cs:
        a = T.fill(rng.choice(T.CHILD_PRED.answer_templates_positive), node_type=node_type, node=node,
                   child_num=len(cs), child_nodes=child_list(graph, cs))
    else:
        a = T.fill(rng.choice(T.CHILD_PRED.answer_templates_negative), node_type=node_type, node=node)
    return AlignmentSample("ChildPred", graph.unit_id, view, q, a, _placement(rng))


# -- downstream: code explanation --------------------------------------------------------

def _plural(n: int, word: str) -> str:
    return f"{n} {word}" if n == 1 else f"{n} {word}s"


def describe(graph: CodeGraph) -> str:
    """One-line description of the first function (or the top level) built from the UAST."""
    nodes = graph.nodes
    fn = next((n for n in nodes if n.node_type == "FunctionDecl"), None)
    root = fn.idx if fn is not None else 0
    sub, stack = [], [root]
    while stack:
        i = stack.pop()
        sub.append(nodes[i])
        stack.extend(nodes[i].children)
    loops = sum(n.node_type in ("WhileStmt", "ForStmt") for n in sub)
    ifs = sum(n.node_type == "IfStmt" for n in sub)
    rets = sum(n.node_type == "ReturnStmt" for n in sub)
    calls = sum(n.node_type == "CallExpr" for n in sub)
    body = (f"{_plural(loops, 'loop')}, {_plural(ifs, 'if statement')}, "
            f"{_plural(calls, 'call')} and {_plural(rets, 'return statement')}")
    if fn is None:
        return f"The program defines no function and contains {body}."
    params = [nodes[p].name for c in fn.children if nodes[c].node_type == "Parameters" for p in nodes[c].children]
    plist = ", ".join(params) if params else "none"
    return f"Function {fn.name} takes {_plural(len(params), 'parameter')} ({plist}) and contains {body}."


def make_downstream(graph: CodeGraph, rng_seed) -> AlignmentSample:
    rng = random.Random(rng_seed)
    prompt = T.fill(rng.choice(T.DOWNSTREAM.question_templates), code=graph.source)
    return AlignmentSample("Downstream", None, "NONE", prompt, describe(graph), "GraphFirst")


def edge_question(graph: CodeGraph, u: int, v: int, rng_seed) -> AlignmentSample:
    """EdgePred sample for a chosen node pair; the label is looked up in the edge list."""
    rng = random.Random(rng_seed)
    positive = (rendered(graph, u), rendered(graph, v)) in edge_renderings(graph)
    return _edge_question(rng, (render(graph, u), render(graph, v)), positive, graph.unit_id)
