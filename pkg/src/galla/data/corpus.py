"""Corpus assembly: unit splits, per-cell sample counts, reuse caps and manifests."""
from __future__ import annotations

import hashlib
import json
import random
from collections import Counter
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..minilang.uast import CodeGraph
from .samples import (
    AlignmentSample,
    make_child_pred,
    make_downstream,
    make_edge_pred,
    make_graph2code,
    make_parent_pred,
    render,
)

REUSE_CAP = 8
ALIGN_CELLS = (
    ("AST", "Graph2Code"),
    ("DFG", "Graph2Code"),
    ("AST", "ParentPred"),
    ("AST", "ChildPred"),
    ("DFG", "ParentPred"),
    ("DFG", "ChildPred"),
    ("DFG", "EdgePred"),
)


class InsufficientGraphs(ValueError):
    pass


def stable_hash(*parts) -> int:
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(h[:8], "big")


def split_of(unit_id: str) -> str:
    """Units are split by hash: 40% alignment train, 10% alignment test, 40% downstream train, 10% downstream test."""
    b = stable_hash("split", unit_id) % 100
    if b < 40:
        return "align-train"
    if b < 50:
        return "align-test"
    if b < 90:
        return "downstream-train"
    return "downstream-test"


def is_validation(sample: AlignmentSample) -> bool:
    """10% of downstream training samples are held out for checkpoint selection."""
    return stable_hash("val", sample.prompt) % 10 == 0


def _make(task: str, view: str, graph: CodeGraph, seed, decoys) -> AlignmentSample:
    if task == "Graph2Code":
        return make_graph2code(graph, seed, view)
    if task == "EdgePred":
        return make_edge_pred(graph, seed, decoys)
    if task == "ParentPred":
        return make_parent_pred(graph, view, seed)
    if task == "ChildPred":
        return make_child_pred(graph, view, seed)
    raise ValueError(f"not an alignment task: {task}")


def decoy_pool(graphs: Sequence[CodeGraph]) -> list[tuple[str, tuple, tuple]]:
    """Rendered DFG edges of every graph, for negatives that look like real edges."""
    out = []
    for g in graphs:
        for f, t in g.dfg_edges:
            out.append((g.unit_id, render(g, f), render(g, t)))
    return out


def build_corpus(graphs: Sequence[CodeGraph], counts: Mapping[tuple[str, str], int], rng_seed: int,
                 negatives: str = "decoy", reuse_cap: int = REUSE_CAP) -> tuple[list[AlignmentSample], dict]:
    """Samples for each (view, task) cell, shuffled, plus a manifest of per-cell counts.

    Within a cell graphs are visited round-robin in a seeded order, so no graph
    is used more than ``reuse_cap`` times.
    """
    if negatives not in ("decoy", "uniform"):
        raise ValueError(f"unknown negative sampling {negatives!r}")
    graphs = sorted(graphs, key=lambda g: g.unit_id)
    decoys = decoy_pool(graphs) if negatives == "decoy" else None
    samples: list[AlignmentSample] = []
    for (view, task), n in sorted(counts.items()):
        if n < 0:
            raise ValueError("counts must be non-negative")
        if n == 0:
            continue
        eligible = [g for g in graphs if task != "EdgePred" or g.dfg_edges]
        if n > reuse_cap * len(eligible):
            raise InsufficientGraphs(
                f"{task}/{view}: {n} samples from {len(eligible)} graphs exceeds the reuse cap {reuse_cap}")
        order = list(eligible)
        random.Random(stable_hash(rng_seed, view, task)).shuffle(order)
        for k in range(n):
            g = order[k % len(order)]
            seed = stable_hash(rng_seed, g.unit_id, view, task, k // len(order))
            samples.append(_make(task, view, g, seed, decoys))
    random.Random(stable_hash(rng_seed, "shuffle")).shuffle(samples)
    return samples, manifest(samples, rng_seed)


def build_downstream(graphs: Sequence[CodeGraph], n: int, rng_seed: int, reuse_cap: int = 3
                     ) -> list[AlignmentSample]:
    graphs = sorted(graphs, key=lambda g: g.unit_id)
    if n > reuse_cap * len(graphs):
        raise InsufficientGraphs(f"Downstream: {n} samples from {len(graphs)} units exceeds the reuse cap {reuse_cap}")
    order = list(graphs)
    random.Random(stable_hash(rng_seed, "downstream")).shuffle(order)
    out, seen = [], set()
    k = 0
    while len(out) < n:
        g = order[k % len(order)]
        s = make_downstream(g, stable_hash(rng_seed, g.unit_id, "downstream", k // len(order)))
        k += 1
        if (s.prompt, s.answer) in seen and k < 10 * reuse_cap * len(order):
            continue
        seen.add((s.prompt, s.answer))
        out.append(s)
    return out


def manifest(samples: Iterable[AlignmentSample], rng_seed: int) -> dict:
    cells = Counter(f"{s.graph_view}/{s.task}" for s in samples)
    tasks = Counter(s.task for s in samples)
    return {"seed": rng_seed, "total": sum(tasks.values()), "tasks": dict(sorted(tasks.items())),
            "cells": dict(sorted(cells.items()))}


def write_samples(path: str | Path, samples: Iterable[AlignmentSample]) -> str:
    """Write one JSON object per line; returns the sha256 of the file."""
    data = "".join(s.to_json() + "\n" for s in samples)
    Path(path).write_text(data, encoding="utf-8")
    return hashlib.sha256(data.encode("utf-8")).hexdigest()


def read_samples(path: str | Path) -> list[AlignmentSample]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            out.append(AlignmentSample.from_record(json.loads(line)))
    return out


def split_hash(samples: Iterable[AlignmentSample]) -> str:
    h = hashlib.sha256()
    for s in samples:
        h.update(s.to_json().encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def build_dataset(graphs: Sequence[CodeGraph], per_cell: int, n_downstream: int, rng_seed: int,
                  test_per_cell: int | None = None, negatives: str = "decoy",
                  cells: Sequence[tuple[str, str]] = ALIGN_CELLS, g2c_per_view: int | None = None) -> dict:
    """Train and test sample lists from one graph collection, split by unit hash.

    GraphQA cells get ``per_cell`` samples each; Graph2Code cells get ``g2c_per_view``
    (defaults to ``per_cell``).
    """
    by_split: dict[str, list[CodeGraph]] = {}
    for g in graphs:
        by_split.setdefault(split_of(g.unit_id), []).append(g)
    test_per_cell = per_cell // 4 if test_per_cell is None else test_per_cell
    g2c = per_cell if g2c_per_view is None else g2c_per_view
    train_counts = {c: (g2c if c[1] == "Graph2Code" else per_cell) for c in cells}
    train, _ = build_corpus(by_split.get("align-train", []), train_counts, rng_seed, negatives)
    test, _ = build_corpus(by_split.get("align-test", []), {c: test_per_cell for c in cells if c[1] != "Graph2Code"},
                           rng_seed + 1, negatives)
    down_train = build_downstream(by_split.get("downstream-train", []), n_downstream, rng_seed)
    down_units = by_split.get("downstream-test", [])
    down_test = build_downstream(down_units, len(down_units), rng_seed + 1, reuse_cap=1)
    train_all = train + down_train
    test_all = test + down_test
    return {
        "train": train_all,
        "test": test_all,
        "manifest": {
            "seed": rng_seed,
            "negatives": negatives,
            "train": manifest(train_all, rng_seed),
            "test": manifest(test_all, rng_seed + 1),
            "units": {k: len(v) for k, v in sorted(by_split.items())},
            "downstream_split_hash": split_hash(down_train + down_test),
        },
    }
