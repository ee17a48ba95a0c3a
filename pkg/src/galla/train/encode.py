"""Turning text samples into token ids and graph index arrays."""
from __future__ import annotations

from typing import Mapping, Sequence

from ..data.samples import AlignmentSample
from ..minilang.uast import CodeGraph
from ..nn.bpe import BPE
from ..nn.encoder import GraphInput, graph_input
from ..nn.model import Example


class SampleEncoder:
    def __init__(self, tokenizer: BPE, subtokens: BPE | None, graphs: Mapping[str, CodeGraph] | None = None):
        self.tokenizer = tokenizer
        self.subtokens = subtokens
        self.graphs = dict(graphs or {})
        self._inputs: dict[tuple[str, str], GraphInput] = {}

    def graph_input(self, graph_id: str, view: str) -> GraphInput:
        key = (graph_id, view)
        if key not in self._inputs:
            if graph_id not in self.graphs:
                raise KeyError(f"sample refers to unknown graph {graph_id!r}")
            self._inputs[key] = graph_input(self.graphs[graph_id], view, self.subtokens)
        return self._inputs[key]

    def encode(self, sample: AlignmentSample, drop_graph: bool = False) -> Example:
        graph = None
        if sample.graph_id is not None and not drop_graph:
            graph = self.graph_input(sample.graph_id, sample.graph_view)
        return Example(self.tokenizer.encode(sample.prompt), self.tokenizer.encode(sample.answer),
                       sample.placement, graph, {"task": sample.task})

    def encode_all(self, samples: Sequence[AlignmentSample], drop_graph: bool = False) -> list[Example]:
        return [self.encode(s, drop_graph) for s in samples]


def code_example(tokenizer: BPE, source: str) -> Example:
    """Language-model pretraining example: the whole program is the target."""
    return Example([], tokenizer.encode(source), "GraphFirst", None, {"task": "Code"})
