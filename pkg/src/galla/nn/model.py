"""GNN encoder + adapter + decoder LM, with batched loss and greedy generation."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..tensor import Module, Tensor, cross_entropy, no_grad, reshape, take_rows
from ..tensor import checkpoint as ckpt
from .adapter import make_adapter
from .bpe import BPE
from .encoder import GraphEncoder, GraphInput, batch_inputs
from .lm import DecoderLM
from .splice import Layout, SplicedBatch, embed_layouts, make_layout


@dataclass
class ModelConfig:
    d_lm: int = 128
    n_layers: int = 4
    n_heads: int = 4
    context: int = 512
    d_node: int = 64
    d_gnn: int = 128
    gnn_layers: int = 3
    n_g: int = 16
    adapter: str = "cross_attn"


@dataclass
class Example:
    """A tokenized sample; ``graph`` is None for text-only samples."""

    prompt_ids: list[int]
    answer_ids: list[int]
    placement: str = "GraphFirst"
    graph: GraphInput | None = None
    meta: dict = field(default_factory=dict)


class GallaModel(Module):
    def __init__(self, config: ModelConfig, tokenizer: BPE, subtokens: BPE | None, seed: int = 0,
                 with_graph: bool = True):
        self.config = config
        self.tokenizer = tokenizer
        self.subtokens = subtokens
        rng = np.random.default_rng([seed, 0])
        self.lm = DecoderLM(rng, tokenizer.vocab_size, config.d_lm, config.n_layers, config.n_heads, config.context)
        self.encoder = None
        self.adapter = None
        if with_graph:
            self.attach_graph_modules(seed)

    def attach_graph_modules(self, seed: int) -> None:
        if self.subtokens is None:
            raise ValueError("graph modules need a subtoken vocabulary")
        c = self.config
        rng = np.random.default_rng([seed, 1])
        self.encoder = GraphEncoder(rng, self.subtokens.vocab_size, c.d_node, c.d_gnn, c.gnn_layers)
        self.adapter = make_adapter(c.adapter, rng, c.d_gnn, c.d_lm, c.n_g)

    @property
    def has_graph_modules(self) -> bool:
        return self.encoder is not None

    def parameter_groups(self) -> dict[str, list[Tensor]]:
        groups = {"lm": self.lm.parameters()}
        if self.encoder is not None:
            groups["encoder"] = self.encoder.parameters()
            groups["adapter"] = self.adapter.parameters()
        return groups

    # -- graph tokens ------------------------------------------------------
    def n_graph_tokens(self, graph: GraphInput) -> int:
        return self.config.n_g if self.config.adapter == "cross_attn" else graph.n_nodes

    def graph_tokens(self, graphs: list[GraphInput], zero=False) -> tuple[Tensor, np.ndarray]:
        """Adapter outputs for a batch of graphs and the token count of each.

        ``zero`` is a bool for the whole batch or one flag per graph; flagged graphs
        get all-zero tokens (the graph-ablation input).
        """
        if isinstance(zero, np.ndarray):
            if not zero.any():
                return self.graph_tokens(graphs)
            if zero.all():
                return self.graph_tokens(graphs, zero=True)
            tokens, counts = self.graph_tokens(graphs)
            keep = np.repeat(~zero, counts).astype(tokens.data.dtype)[:, None]
            return tokens * keep, counts
        if zero:
            counts = np.array([self.n_graph_tokens(g) for g in graphs], dtype=np.int64)
            return Tensor(np.zeros((int(counts.sum()), self.config.d_lm)), dtype=self.lm.tok_emb.dtype), counts
        if not self.has_graph_modules:
            raise ValueError("graph sample given to a model without graph modules")
        inp = batch_inputs(graphs)
        h = self.encoder(inp)
        return self.adapter(h, inp.counts())

    # -- batching ------------------------------------------------------------
    def layout(self, ex: Example, with_answer: bool = True) -> Layout:
        n_graph = self.n_graph_tokens(ex.graph) if ex.graph is not None else None
        answer = ex.answer_ids if with_answer else []
        eot = self.tokenizer.eot_id if with_answer else None
        return make_layout(n_graph, ex.prompt_ids, answer, ex.placement, eot)

    def splice(self, examples: list[Example], layouts: list[Layout] | None = None,
               zero_graph=False) -> SplicedBatch:
        """``zero_graph`` is a bool or a per-example flag array."""
        layouts = layouts or [self.layout(ex) for ex in examples]
        with_graph = [ex.graph for ex in examples if ex.graph is not None]
        tokens, counts = None, None
        if with_graph:
            if isinstance(zero_graph, np.ndarray):
                zero_graph = np.asarray([z for z, ex in zip(zero_graph, examples) if ex.graph is not None], dtype=bool)
            tokens, graph_counts = self.graph_tokens(with_graph, zero=zero_graph)
            counts = np.zeros(len(examples), dtype=np.int64)
            counts[[i for i, ex in enumerate(examples) if ex.graph is not None]] = graph_counts
        return embed_layouts(self.lm.tok_emb, layouts, tokens, counts)

    def batch_loss(self, batch: SplicedBatch, return_logits: bool = False):
        """Masked next-token cross-entropy; only positions with target_mask = 1 are evaluated."""
        h = self.lm.hidden(batch.x)
        b, t, d = h.shape
        sel = np.flatnonzero(batch.target_mask.reshape(-1))
        rows = take_rows(reshape(h, (b * t, d)), sel)
        logits = self.lm.logits(rows)
        targets = batch.targets.reshape(-1)[sel]
        loss = cross_entropy(logits, targets, np.ones(sel.size))
        return (loss, logits.data, targets) if return_logits else loss

    def loss(self, examples: list[Example], zero_graph: bool = False) -> Tensor:
        return self.batch_loss(self.splice(examples, zero_graph=zero_graph))

    # -- generation --------------------------------------------------------------
    def generate(self, examples: list[Example], max_new: int = 64, zero_graph: bool = False) -> list[list[int]]:
        """Greedy continuation of each example's prompt (and graph); stops at EOT or ``max_new``."""
        eot = self.tokenizer.eot_id
        layouts = [self.layout(ex, with_answer=False) for ex in examples]
        outs: list[list[int]] = [[] for _ in examples]
        done = np.zeros(len(examples), dtype=bool)
        with no_grad():
            graph_list = [ex.graph for ex in examples if ex.graph is not None]
            tokens, counts = None, None
            if graph_list:
                tokens, gc = self.graph_tokens(graph_list, zero=zero_graph)
                counts = np.zeros(len(examples), dtype=np.int64)
                counts[[i for i, ex in enumerate(examples) if ex.graph is not None]] = gc
            if max_new <= 0:
                return outs
            batch = embed_layouts(self.lm.tok_emb, layouts, tokens, counts)
            hidden, cache = self.lm.prefill(batch.x, max_new)
            room = cache[0][0].shape[-1] if cache else 0
            rows = np.arange(len(examples))
            pos = batch.lengths.astype(np.int64) - 1
            logits = self.lm.logits(Tensor(hidden[rows, pos])).data
            for _ in range(max_new):
                nxt = logits.argmax(axis=-1)
                for i in np.flatnonzero(~done):
                    if nxt[i] == eot:
                        done[i] = True
                    else:
                        outs[i].append(int(nxt[i]))
                pos = pos + 1
                if done.all() or pos.max() >= room:
                    break
                logits = self.lm.decode_step(nxt, pos, cache)
        return outs

    # -- persistence -----------------------------------------------------------------
    def save(self, path: str | Path) -> None:
        arrays = {}
        for group, module in (("lm", self.lm), ("encoder", self.encoder), ("adapter", self.adapter)):
            if module is not None:
                arrays.update({f"{group}.{n}": p.data for n, p in module.named_parameters()})
        meta = {
            "config": asdict(self.config),
            "tokenizer": [list(m) for m in self.tokenizer.merges],
            "specials": self.tokenizer.specials,
            "subtokens": [list(m) for m in self.subtokens.merges] if self.subtokens else None,
            "has_graph": self.has_graph_modules,
        }
        ckpt.save(path, arrays, meta)

    @classmethod
    def load(cls, path: str | Path, with_graph: bool = True) -> "GallaModel":
        """Load a checkpoint; ``with_graph=False`` skips the encoder and adapter entirely."""
        arrays, meta = ckpt.load(path)
        config = ModelConfig(**meta["config"])
        tok = BPE([tuple(m) for m in meta["tokenizer"]], meta["specials"])
        sub = BPE([tuple(m) for m in meta["subtokens"]]) if meta["subtokens"] is not None else None
        with_graph = with_graph and meta["has_graph"]
        model = cls(config, tok, sub, with_graph=False)
        model.lm.load_state_dict({k[3:]: v for k, v in arrays.items() if k.startswith("lm.")})
        if with_graph:
            model.attach_graph_modules(0)
            model.encoder.load_state_dict({k[8:]: v for k, v in arrays.items() if k.startswith("encoder.")})
            model.adapter.load_state_dict({k[8:]: v for k, v in arrays.items() if k.startswith("adapter.")})
        return model
