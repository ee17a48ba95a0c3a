"""Placing graph tokens and text tokens into one input sequence.

A layout is a per-position slot array: text positions hold a token id (>= 0),
graph positions hold ``-(k + 1)`` for the sample's k-th graph token. The loss
mask marks positions whose token is a prediction target (answer and EOT).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..tensor import Tensor, concat, take_rows

PLACEMENTS = ("GraphFirst", "TextFirst")


class AnswerBeforeGraph(ValueError):
    pass


@dataclass
class Layout:
    slots: np.ndarray  # (L,) int64
    loss_mask: np.ndarray  # (L,) int8, 1 at answer positions
    prompt_len: int  # positions before the answer starts

    @property
    def segment(self) -> np.ndarray:
        """1 at graph-token positions, 0 at text positions."""
        return (self.slots < 0).astype(np.int8)

    def __len__(self) -> int:
        return len(self.slots)


def make_layout(n_graph: int | None, prompt_ids, answer_ids, placement: str = "GraphFirst",
                eot: int | None = None) -> Layout:
    """GraphFirst: [graph][prompt][answer]; TextFirst: [prompt][graph][answer]; no graph: [prompt][answer].

    ``eot`` is appended after the answer when given and is part of the answer span.
    """
    if placement not in PLACEMENTS:
        raise ValueError(f"unknown placement {placement!r}")
    prompt = np.asarray(prompt_ids, dtype=np.int64)
    answer = np.asarray(list(answer_ids) + ([eot] if eot is not None else []), dtype=np.int64)
    if (prompt < 0).any() or (answer < 0).any():
        raise ValueError("token ids must be non-negative")
    graph = -(np.arange(n_graph, dtype=np.int64) + 1) if n_graph else np.zeros(0, np.int64)
    if placement == "GraphFirst":
        head = np.concatenate([graph, prompt])
    else:
        head = np.concatenate([prompt, graph])
    slots = np.concatenate([head, answer])
    mask = np.zeros(len(slots), dtype=np.int8)
    mask[len(head):] = 1
    return Layout(slots, mask, len(head))


def check_layout(layout: Layout) -> None:
    """Every graph position must come before the first answer position."""
    graph_pos = np.flatnonzero(layout.slots < 0)
    answer_pos = np.flatnonzero(layout.loss_mask)
    if graph_pos.size and answer_pos.size and graph_pos.max() > answer_pos.min():
        raise AnswerBeforeGraph("graph tokens placed after the start of the answer")
    if (layout.loss_mask[layout.slots < 0] != 0).any():
        raise AnswerBeforeGraph("loss mask set on a graph-token position")


@dataclass
class SplicedBatch:
    x: Tensor  # (B, T, d)
    targets: np.ndarray  # (B, T) next-token ids
    target_mask: np.ndarray  # (B, T) 1 where position t predicts an answer token
    lengths: np.ndarray  # (B,)


def embed_layouts(tok_emb: Tensor, layouts: list[Layout], graph_tokens: Tensor | None = None,
                  graph_counts=None) -> SplicedBatch:
    """Gather text embeddings and graph tokens into a right-padded (B, T, d) batch."""
    b = len(layouts)
    lengths = np.array([len(lay) for lay in layouts], dtype=np.int64)
    t = int(lengths.max())
    d = tok_emb.shape[1]
    slots = np.zeros((b, t), dtype=np.int64)
    valid = np.arange(t)[None, :] < lengths[:, None]
    mask = np.zeros((b, t), dtype=np.int8)
    for i, lay in enumerate(layouts):
        slots[i, : len(lay)] = lay.slots
        mask[i, : len(lay)] = lay.loss_mask
    is_text = valid & (slots >= 0)
    is_graph = valid & (slots < 0)
    text_ids = slots[is_text]
    parts = [take_rows(tok_emb, text_ids)]
    index = np.empty((b, t), dtype=np.int64)
    index[is_text] = np.arange(text_ids.size)
    n_rows = text_ids.size
    if is_graph.any():
        if graph_tokens is None:
            raise ValueError("layout has graph positions but no graph tokens were given")
        counts = np.asarray(graph_counts, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
        k = -slots - 1
        if (k[is_graph] >= np.repeat(counts, is_graph.sum(axis=1))).any():
            raise ValueError("layout refers to more graph tokens than provided")
        index[is_graph] = (n_rows + offsets[:, None] + k)[is_graph]
        parts.append(graph_tokens)
        n_rows += graph_tokens.shape[0]
    index[~valid] = n_rows
    parts.append(Tensor(np.zeros((1, d)), dtype=tok_emb.dtype))
    x = take_rows(concat(parts), index)
    targets = np.zeros((b, t), dtype=np.int64)
    targets[:, :-1] = np.where(slots[:, 1:] >= 0, slots[:, 1:], 0)
    target_mask = np.zeros((b, t), dtype=np.int8)
    target_mask[:, :-1] = mask[:, 1:]
    return SplicedBatch(x, targets, target_mask, lengths)
