"""Node featurizer and directed message-passing GNN."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..minilang.uast import NODE_TYPE_INDEX, NODE_TYPES, CodeGraph
from ..tensor import Module, ShapeMismatch, Tensor, gelu, matmul, parameter, segment_mean, take_rows, xavier_uniform
from ..tensor.core import add
from .bpe import BPE
from .layers import LayerNorm, embedding_table

VIEWS = ("AST", "DFG")


@dataclass
class GraphInput:
    """Index arrays for one graph under one view (or several graphs, block-diagonally)."""

    n_nodes: int
    node_types: np.ndarray  # (n,)
    sub_ids: np.ndarray  # (S,) subtoken ids of all node texts
    sub_seg: np.ndarray  # (S,) owning node of each subtoken
    src: np.ndarray  # (e,) edge sources
    dst: np.ndarray  # (e,) edge targets
    graph_of_node: np.ndarray  # (n,) graph index inside a batch

    @property
    def n_graphs(self) -> int:
        return int(self.graph_of_node.max()) + 1 if self.n_nodes else 0

    def counts(self) -> np.ndarray:
        return np.bincount(self.graph_of_node, minlength=self.n_graphs)


def edge_index(graph: CodeGraph, view: str) -> np.ndarray:
    """(n_e, 2) array: AST parent->child pairs or DFG edges."""
    if view not in VIEWS:
        raise ValueError(f"unknown view {view!r}")
    edges = graph.edges(view)
    return np.asarray(edges, dtype=np.int64).reshape(-1, 2)


def graph_input(graph: CodeGraph, view: str, subtokens: BPE) -> GraphInput:
    e = edge_index(graph, view)
    ids, seg = [], []
    for n in graph.nodes:
        toks = subtokens.encode(graph.text(n.idx))
        ids.extend(toks)
        seg.extend([n.idx] * len(toks))
    return GraphInput(
        n_nodes=graph.n_nodes,
        node_types=np.array([NODE_TYPE_INDEX[n.node_type] for n in graph.nodes], dtype=np.int64),
        sub_ids=np.array(ids, dtype=np.int64),
        sub_seg=np.array(seg, dtype=np.int64),
        src=e[:, 0].copy(),
        dst=e[:, 1].copy(),
        graph_of_node=np.zeros(graph.n_nodes, dtype=np.int64),
    )


def batch_inputs(items: list[GraphInput]) -> GraphInput:
    """Block-diagonal union; node indices are offset per graph."""
    off = 0
    parts = {k: [] for k in ("types", "ids", "seg", "src", "dst", "gid")}
    for g, item in enumerate(items):
        parts["types"].append(item.node_types)
        parts["ids"].append(item.sub_ids)
        parts["seg"].append(item.sub_seg + off)
        parts["src"].append(item.src + off)
        parts["dst"].append(item.dst + off)
        parts["gid"].append(np.full(item.n_nodes, g, dtype=np.int64))
        off += item.n_nodes
    cat = {k: np.concatenate(v) if v else np.zeros(0, np.int64) for k, v in parts.items()}
    return GraphInput(off, cat["types"], cat["ids"], cat["seg"], cat["src"], cat["dst"], cat["gid"])


class NodeFeaturizer(Module):
    """V[v] = mean of subtoken embeddings of v's span text + embedding of v's node type."""

    def __init__(self, rng: np.random.Generator, n_subtokens: int, d_node: int = 64):
        self.sub_emb = embedding_table(rng, n_subtokens, d_node, scale=1.0)
        self.type_emb = embedding_table(rng, len(NODE_TYPES), d_node, scale=1.0)

    def __call__(self, inp: GraphInput) -> Tensor:
        text = segment_mean(take_rows(self.sub_emb, inp.sub_ids), inp.sub_seg, inp.n_nodes)
        return add(text, take_rows(self.type_emb, inp.node_types))


class GNNLayer(Module):
    """h' = h + gelu(LN(h W_self + mean_{u->v} h_u W_in + mean_{v->u} h_u W_out))."""

    def __init__(self, rng: np.random.Generator, d: int):
        self.w_self = parameter(xavier_uniform(rng, (d, d)))
        self.w_in = parameter(xavier_uniform(rng, (d, d)))
        self.w_out = parameter(xavier_uniform(rng, (d, d)))
        self.norm = LayerNorm(d)

    def __call__(self, h: Tensor, src: np.ndarray, dst: np.ndarray) -> Tensor:
        n = h.shape[0]
        m = matmul(h, self.w_self)
        if len(src):
            incoming = segment_mean(take_rows(matmul(h, self.w_in), src), dst, n)
            outgoing = segment_mean(take_rows(matmul(h, self.w_out), dst), src, n)
            m = add(add(m, incoming), outgoing)
        return add(h, gelu(self.norm(m)))


class DirectedGNN(Module):
    def __init__(self, rng: np.random.Generator, d_node: int = 64, d_gnn: int = 128, n_layers: int = 3):
        self.proj = parameter(xavier_uniform(rng, (d_node, d_gnn)))
        self.layers = [GNNLayer(rng, d_gnn) for _ in range(n_layers)]

    def __call__(self, v: Tensor, edges: np.ndarray) -> Tensor:
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if v.ndim != 2 or v.shape[1] != self.proj.shape[0]:
            raise ShapeMismatch("gnn_forward", v.shape, self.proj.shape)
        if edges.size and (edges.min() < 0 or edges.max() >= v.shape[0]):
            raise IndexError("edge index out of range")
        h = matmul(v, self.proj)
        src, dst = edges[:, 0], edges[:, 1]
        for layer in self.layers:
            h = layer(h, src, dst)
        return h


class GraphEncoder(Module):
    def __init__(self, rng: np.random.Generator, n_subtokens: int, d_node: int = 64, d_gnn: int = 128,
                 n_layers: int = 3):
        self.featurizer = NodeFeaturizer(rng, n_subtokens, d_node)
        self.gnn = DirectedGNN(rng, d_node, d_gnn, n_layers)

    def __call__(self, inp: GraphInput) -> Tensor:
        v = self.featurizer(inp)
        return self.gnn(v, np.stack([inp.src, inp.dst], axis=1))
