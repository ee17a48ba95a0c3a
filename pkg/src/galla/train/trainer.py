"""Training loops for LM pretraining, stage 1, stage 2 and the code-only control."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..nn.model import Example, GallaModel
from ..tensor import AdamW, no_grad
from ..tensor.checkpoint import checksum
from .plan import TrainPlan

log = logging.getLogger("galla.train")

TOKEN_BUDGET = 4096  # max padded positions per batch when bucketing


class FrozenParamDrift(RuntimeError):
    pass


class MixtureEmpty(ValueError):
    pass


@dataclass
class RunReport:
    stage: str
    seed: int
    epoch_loss: list[dict[str, float]] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    step_loss: list[float] = field(default_factory=list)
    selected_epoch: int | None = None
    checksums: dict[str, str] = field(default_factory=dict)
    metrics: list[dict] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def selected_checkpoint(self) -> str:
        return f"{self.stage.lower()}-seed{self.seed}-epoch{self.selected_epoch}"

    def to_json(self) -> str:
        d = dict(self.__dict__)
        d["selected_checkpoint"] = self.selected_checkpoint
        return json.dumps(d, indent=2, sort_keys=True)

    def table(self) -> str:
        tasks = sorted({t for e in self.epoch_loss for t in e})
        head = ["epoch"] + tasks + ["val"]
        rows = []
        for i, e in enumerate(self.epoch_loss):
            val = f"{self.val_loss[i]:.4f}" if i < len(self.val_loss) else "-"
            mark = " *" if self.selected_epoch == i + 1 else ""
            rows.append([str(i + 1)] + [f"{e[t]:.4f}" if t in e else "-" for t in tasks] + [val + mark])
        widths = [max(len(h), *(len(r[k]) for r in rows)) if rows else len(h) for k, h in enumerate(head)]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        lines = [f"{self.stage} (seed {self.seed})", fmt.format(*head)] + [fmt.format(*r) for r in rows]
        if self.metrics:
            lines.append("")
            lines.extend(f"{m['task']:<12} {m['metric']:<12} {m['value']:.4f}  n={m['n']}" for m in self.metrics)
        return "\n".join(lines)

    def save(self, out_dir: str | Path) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n")
        (out / "report.txt").write_text(self.table() + "\n")


# -- batching ---------------------------------------------------------------------

def example_length(model: GallaModel, ex: Example) -> int:
    n_graph = model.n_graph_tokens(ex.graph) if ex.graph is not None else 0
    return n_graph + len(ex.prompt_ids) + len(ex.answer_ids) + 1


def epoch_batches(model: GallaModel, examples: Sequence[Example], order: np.ndarray, batch_size: int,
                  rng: np.random.Generator) -> list[list[int]]:
    """Split a shuffled order into batches of similar length, then shuffle the batches.

    Samples are grouped in windows of 8 batches, sorted by length inside a window,
    and cut into batches of at most ``batch_size`` samples and ``TOKEN_BUDGET`` padded positions.
    """
    batches: list[list[int]] = []
    window = batch_size * 8
    for start in range(0, len(order), window):
        chunk = sorted(order[start : start + window], key=lambda i: example_length(model, examples[i]))
        cur: list[int] = []
        longest = 0
        for i in chunk:
            n = example_length(model, examples[i])
            if cur and (len(cur) == batch_size or max(longest, n) * (len(cur) + 1) > TOKEN_BUDGET):
                batches.append(cur)
                cur, longest = [], 0
            cur.append(int(i))
            longest = max(longest, n)
        if cur:
            batches.append(cur)
    perm = rng.permutation(len(batches))
    return [batches[k] for k in perm]


def mixture_order(tasks: dict[str, list[int]], plan: TrainPlan, epoch: int) -> np.ndarray:
    """Per epoch, round(w * |corpus_t|) samples of each task without replacement, shuffled together."""
    picked = []
    for k, task in enumerate(sorted(tasks)):
        w = plan.weight(task)
        idx = tasks[task]
        n = min(len(idx), int(round(w * len(idx))))
        if n <= 0:
            continue
        rng = np.random.default_rng([plan.seed, 2, epoch, k])
        sel = idx if n == len(idx) else [idx[j] for j in sorted(rng.choice(len(idx), n, replace=False))]
        picked.extend(sel)
    if not picked:
        raise MixtureEmpty("mixture weights select no samples")
    rng = np.random.default_rng([plan.seed, 1, epoch])
    return np.asarray(picked, dtype=np.int64)[rng.permutation(len(picked))]


# -- core loop ------------------------------------------------------------------------

def _per_token_nll(logits: np.ndarray, targets: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return lse - z[np.arange(len(targets)), targets]


def mean_loss(model: GallaModel, examples: Sequence[Example], batch_size: int = 64,
              zero_graph: bool = False) -> float:
    """Token-averaged loss over ``examples`` (no gradients)."""
    total, count = 0.0, 0
    order = sorted(range(len(examples)), key=lambda i: example_length(model, examples[i]))
    with no_grad():
        for s in range(0, len(order), batch_size):
            batch = model.splice([examples[i] for i in order[s : s + batch_size]], zero_graph=zero_graph)
            n = int(batch.target_mask.sum())
            total += float(model.batch_loss(batch).data) * n
            count += n
    return total / max(count, 1)


def run_epochs(model: GallaModel, examples: Sequence[Example], plan: TrainPlan, trainable,
               val: Sequence[Example] = (), report: RunReport | None = None,
               select_best: bool = False) -> RunReport:
    """Shared optimisation loop. ``trainable`` lists the parameters handed to AdamW."""
    report = report or RunReport(plan.stage, plan.seed)
    t0 = time.time()
    opt = AdamW(trainable, lr=plan.lr, weight_decay=plan.weight_decay, warmup_steps=plan.warmup)
    tasks: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        tasks.setdefault(ex.meta.get("task", "?"), []).append(i)
    best = (np.inf, None, None)
    for epoch in range(plan.epochs):
        order = mixture_order(tasks, plan, epoch)
        rng = np.random.default_rng([plan.seed, 3, epoch])
        drop_rng = np.random.default_rng([plan.seed, 4, epoch])
        sums: dict[str, list[float]] = {}
        for batch_idx in epoch_batches(model, examples, order, plan.batch_size, rng):
            batch_ex = [examples[i] for i in batch_idx]
            opt.zero_grad()
            drop = drop_rng.random(len(batch_ex)) < plan.graph_dropout if plan.graph_dropout else False
            batch = model.splice(batch_ex, zero_graph=drop)
            loss, logits, targets = model.batch_loss(batch, return_logits=True)
            loss.backward()
            opt.step()
            report.step_loss.append(float(loss.data))
            # Per-task token losses for the report, from the same forward pass.
            nll = _per_token_nll(logits, targets)
            owner = np.repeat(np.arange(len(batch_ex)), batch.target_mask.sum(axis=1))
            for j, ex in enumerate(batch_ex):
                acc = sums.setdefault(ex.meta.get("task", "?"), [0.0, 0])
                acc[0] += float(nll[owner == j].sum())
                acc[1] += int((owner == j).sum())
        report.epoch_loss.append({t: s / max(n, 1) for t, (s, n) in sorted(sums.items())})
        if val:
            v = mean_loss(model, val)
            report.val_loss.append(v)
            log.info("%s epoch %d: %s val=%.4f", plan.stage, epoch + 1, report.epoch_loss[-1], v)
            if select_best and v < best[0]:
                best = (v, epoch + 1, model.state_dict())
        else:
            log.info("%s epoch %d: %s", plan.stage, epoch + 1, report.epoch_loss[-1])
    if select_best and best[2] is not None:
        model.load_state_dict(best[2])
        report.selected_epoch = best[1]
    elif plan.epochs:
        report.selected_epoch = plan.epochs
    report.seconds += time.time() - t0
    return report


# -- stages -------------------------------------------------------------------------------

def pretrain_lm(model: GallaModel, examples: Sequence[Example], plan: TrainPlan) -> RunReport:
    """Causal LM training on raw code (no graphs)."""
    return run_epochs(model, examples, plan, model.lm.parameters())


def _graph_params(model: GallaModel):
    if not model.has_graph_modules:
        raise ValueError("stage needs graph modules")
    return model.encoder.parameters() + model.adapter.parameters()


def train_stage1(model: GallaModel, examples: Sequence[Example], plan: TrainPlan) -> RunReport:
    """Graph2Code with the LM frozen; raises FrozenParamDrift if any LM tensor changes."""
    if any(ex.graph is None for ex in examples):
        raise ValueError("stage 1 trains on Graph2Code samples with graphs")
    before = model.lm.checksum()
    model.lm.set_trainable(False)
    try:
        report = run_epochs(model, examples, plan, _graph_params(model))
    finally:
        model.lm.set_trainable(True)
    after = model.lm.checksum()
    report.checksums = {"lm_before": before, "lm_after": after,
                        "encoder": model.encoder.checksum(), "adapter": model.adapter.checksum()}
    if before != after:
        raise FrozenParamDrift(f"LM parameters changed during stage 1 ({before[:12]} -> {after[:12]})")
    return report


def train_stage2(model: GallaModel, examples: Sequence[Example], plan: TrainPlan,
                 val: Sequence[Example] = ()) -> RunReport:
    """Joint training on alignment and downstream samples; nothing is frozen.

    Downstream samples carry no graph and never touch the encoder or adapter.
    """
    params = model.lm.parameters() + (_graph_params(model) if model.has_graph_modules else [])
    return run_epochs(model, examples, plan, params, val=val, select_best=True)


def train_control(model: GallaModel, examples: Sequence[Example], plan: TrainPlan,
                  val: Sequence[Example] = ()) -> RunReport:
    """Stage-2 schedule without graphs; the model must not own graph modules."""
    if model.has_graph_modules:
        raise ValueError("the control run never instantiates the GNN or adapter")
    if any(ex.graph is not None for ex in examples):
        raise ValueError("control examples must not carry graphs")
    return run_epochs(model, examples, plan, model.lm.parameters(), val=val, select_best=True)


def lm_checksum(model: GallaModel) -> str:
    return checksum({n: p.data for n, p in model.lm.named_parameters()})
