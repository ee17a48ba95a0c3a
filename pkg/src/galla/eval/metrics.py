"""Scoring generated answers against references."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ..data import templates as T
from ..data.samples import AlignmentSample
from ..nn.model import GallaModel
from ..train.encode import SampleEncoder

QA_TABLES = {"EdgePred": T.EDGE_PRED, "ParentPred": T.PARENT_PRED, "ChildPred": T.CHILD_PRED}
FACT_FIELDS = {"EdgePred": (), "ParentPred": ("parent", "parent_type"), "ChildPred": ("child_num", "child_nodes")}


class EmptySet(ValueError):
    pass


class DisjointnessViolation(AssertionError):
    pass


@dataclass
class EvalResult:
    task: str
    metric: str
    value: float
    n: int
    correct: int
    unparseable: int = 0
    seed: int | None = None
    per_seed: list[float] = field(default_factory=list)
    zero_graph: bool = False

    def to_record(self, run_id: str = "") -> dict:
        rec = {"run_id": run_id, "task": self.task, "metric": self.metric, "value": self.value,
               "n": self.n, "seed": self.seed}
        rec.update({k: v for k, v in asdict(self).items() if k not in rec})
        return rec


def parse_answer(task: str, text: str) -> tuple[str, dict[str, str]] | None:
    """(family, fields) where family is 'positive' or 'negative'; None when no template matches."""
    table = QA_TABLES[task]
    m = T.match_template(text, table.answer_templates_positive)
    if m is not None:
        return "positive", m[1]
    m = T.match_template(text, table.answer_templates_negative)
    if m is not None:
        return "negative", m[1]
    return None


def score_qa(task: str, reference: str, generated: str) -> tuple[bool, bool]:
    """(correct, parseable) for one GraphQA answer."""
    ref = parse_answer(task, reference)
    if ref is None:
        raise ValueError(f"reference answer does not match any {task} template: {reference!r}")
    got = parse_answer(task, generated)
    if got is None:
        return False, False
    if got[0] != ref[0]:
        return False, True
    if ref[0] == "negative":
        return True, True
    # Templates that omit a fact field cannot confirm it.
    ok = all(f in got[1] and got[1][f] == ref[1][f] for f in FACT_FIELDS[task] if f in ref[1])
    ok = ok and all(f in got[1] for f in FACT_FIELDS[task])
    return ok, True


def assert_disjoint(train_ids: Iterable[str | None], test_ids: Iterable[str | None]) -> None:
    overlap = {i for i in train_ids if i is not None} & {i for i in test_ids if i is not None}
    if overlap:
        raise DisjointnessViolation(f"{len(overlap)} graphs appear in both train and test, e.g. {sorted(overlap)[:3]}")


def generate_answers(model: GallaModel, encoder: SampleEncoder, samples: Sequence[AlignmentSample],
                     zero_graph: bool = False, batch_size: int = 64, max_new: int = 64) -> list[str]:
    """Greedy decoded answer text per sample, in input order."""
    examples = encoder.encode_all(samples)
    order = sorted(range(len(samples)), key=lambda i: len(examples[i].prompt_ids))
    out: list[str] = [""] * len(samples)
    for s in range(0, len(order), batch_size):
        idx = order[s : s + batch_size]
        ids = model.generate([examples[i] for i in idx], max_new=max_new, zero_graph=zero_graph)
        for i, toks in zip(idx, ids):
            out[i] = model.tokenizer.decode(toks)
    return out


def eval_graphqa(model: GallaModel, encoder: SampleEncoder, samples: Sequence[AlignmentSample],
                 zero_graph: bool = False, train_graph_ids: Iterable[str] | None = None,
                 batch_size: int = 64, max_new: int = 96) -> list[EvalResult]:
    """One result per GraphQA task present: accuracy for EdgePred, exact match otherwise."""
    samples = [s for s in samples if s.task in QA_TABLES]
    if not samples:
        raise EmptySet("no GraphQA samples to evaluate")
    if train_graph_ids is not None:
        assert_disjoint(train_graph_ids, (s.graph_id for s in samples))
    generated = generate_answers(model, encoder, samples, zero_graph, batch_size, max_new)
    results = []
    for task in QA_TABLES:
        idx = [i for i, s in enumerate(samples) if s.task == task]
        if not idx:
            continue
        scores = [score_qa(task, samples[i].answer, generated[i]) for i in idx]
        correct = sum(c for c, _ in scores)
        bad = sum(not p for _, p in scores)
        metric = "accuracy" if task == "EdgePred" else "exact_match"
        results.append(EvalResult(task, metric, correct / len(idx), len(idx), correct, bad, zero_graph=zero_graph))
    return results


def eval_downstream(model: GallaModel, encoder: SampleEncoder, samples: Sequence[AlignmentSample],
                    batch_size: int = 64, max_new: int = 64) -> EvalResult:
    samples = [s for s in samples if s.task == "Downstream"]
    if not samples:
        raise EmptySet("no downstream samples to evaluate")
    generated = generate_answers(model, encoder, samples, False, batch_size, max_new)
    correct = sum(g == s.answer for g, s in zip(generated, samples))
    return EvalResult("Downstream", "exact_match", correct / len(samples), len(samples), correct)


def two_proportion_test(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pearson chi-squared statistic (1 dof, no continuity correction) and its p-value."""
    if min(n1, n2) <= 0:
        raise EmptySet("both groups need at least one observation")
    table = np.array([[k1, n1 - k1], [k2, n2 - k2]], dtype=float)
    expected = table.sum(axis=1, keepdims=True) * table.sum(axis=0, keepdims=True) / table.sum()
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(expected > 0, (table - expected) ** 2 / expected, 0.0)
    chi2 = float(terms.sum())
    return chi2, math.erfc(math.sqrt(chi2 / 2.0))
