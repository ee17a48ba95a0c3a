"""The default end-to-end run: data, tokenizers, LM pretraining, stage 1, stage 2, evaluation."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

from ..data import build_dataset, control_sample, is_validation, split_of
from ..data.samples import AlignmentSample
from ..minilang.uast import CodeGraph
from ..nn.bpe import BPE, train_bpe
from ..nn.model import GallaModel, ModelConfig
from .encode import SampleEncoder, code_example
from .plan import default_plan
from .trainer import RunReport, pretrain_lm, train_control, train_stage1, train_stage2

log = logging.getLogger("galla.pipeline")

LM_VOCAB = 1024
SUBTOKEN_VOCAB = 512
LM_SEED = 0


@dataclass
class RunConfig:
    g2c_per_view: int = 1000
    qa_per_cell: int = 1200
    n_downstream: int = 2000
    test_per_cell: int = 600
    negatives: str = "decoy"
    adapter: str = "cross_attn"
    views: tuple[str, ...] = ("AST", "DFG")
    graph_tasks: bool = True
    pretrain_epochs: int = 6
    stage1_epochs: int = 15
    stage2_epochs: int = 5
    batch_size: int = 32
    data_seed: int = 0


@dataclass
class RunArtifacts:
    model: GallaModel
    encoder: SampleEncoder
    train: list[AlignmentSample]
    test: list[AlignmentSample]
    reports: dict[str, RunReport] = field(default_factory=dict)


def train_tokenizers(graphs: Sequence[CodeGraph], samples: Sequence[AlignmentSample]) -> tuple[BPE, BPE]:
    code = [g.source for g in graphs]
    tokenizer = train_bpe(code + [s.prompt for s in samples] + [s.answer for s in samples], LM_VOCAB)
    subtokens = train_bpe(code, SUBTOKEN_VOCAB, specials=())
    return tokenizer, subtokens


def restrict_views(samples: Sequence[AlignmentSample], views: Sequence[str]) -> list[AlignmentSample]:
    return [s for s in samples if s.graph_view == "NONE" or s.graph_view in views]


def stage2_samples(train: Sequence[AlignmentSample], cfg: RunConfig) -> tuple[list, list]:
    """(training samples, downstream validation samples) for stage 2 or the control."""
    down = [s for s in train if s.task == "Downstream"]
    val = [s for s in down if is_validation(s)]
    keep = [s for s in train if s.task != "Downstream" or not is_validation(s)]
    if not cfg.graph_tasks:
        keep = [s for s in keep if s.task == "Downstream"]
    return keep, val


def pretrained_lm(graphs: Sequence[CodeGraph], tokenizer: BPE, subtokens: BPE, cfg: RunConfig, seed: int,
                  cache: Path | None = None) -> tuple[GallaModel, RunReport | None]:
    """LM pretrained on training-split code; reused from ``cache`` when present."""
    if cache is not None and cache.exists():
        model = GallaModel.load(cache, with_graph=False)
        return model, None
    model = GallaModel(ModelConfig(adapter=cfg.adapter), tokenizer, subtokens, seed=seed, with_graph=False)
    code = [code_example(tokenizer, g.source) for g in graphs if split_of(g.unit_id).endswith("train")]
    plan = default_plan("LMPretrain", epochs=cfg.pretrain_epochs, seed=seed, batch_size=cfg.batch_size)
    report = pretrain_lm(model, code, plan)
    if cache is not None:
        cache.parent.mkdir(parents=True, exist_ok=True)
        model.save(cache)
    return model, report


def run_galla(graphs: Sequence[CodeGraph], cfg: RunConfig, seed: int, workdir: Path | None = None,
              control: bool = False) -> RunArtifacts:
    """Full two-stage run (or the code-only control) for one seed."""
    t0 = time.time()
    data = build_dataset(graphs, cfg.qa_per_cell, cfg.n_downstream, cfg.data_seed, cfg.test_per_cell,
                         cfg.negatives, g2c_per_view=cfg.g2c_per_view)
    train = restrict_views(data["train"], cfg.views)
    test = restrict_views(data["test"], cfg.views)
    tokenizer, subtokens = train_tokenizers([g for g in graphs if split_of(g.unit_id).endswith("train")],
                                            data["train"])
    # Every seed starts from the same pretrained LM, the way all runs share one base model.
    cache = workdir / f"lm-base-e{cfg.pretrain_epochs}.ckpt" if workdir is not None else None
    model, pre_report = pretrained_lm(graphs, tokenizer, subtokens, cfg, LM_SEED, cache)
    model.config.adapter = cfg.adapter
    enc = SampleEncoder(model.tokenizer, model.subtokens, {g.unit_id: g for g in graphs})
    reports: dict[str, RunReport] = {}
    if pre_report is not None:
        reports["pretrain"] = pre_report
    s2_train, val = stage2_samples(train, cfg)
    val_ex = enc.encode_all(val)
    if control:
        ctl = [control_sample(s) if s.task == "Graph2Code" else s for s in s2_train]
        ctl = [s for s in ctl if s.task in ("Downstream", "ControlCodeOnly")] if cfg.graph_tasks else ctl
        plan = default_plan("Control", epochs=cfg.stage2_epochs, seed=seed, batch_size=cfg.batch_size)
        reports["control"] = train_control(model, enc.encode_all(ctl), plan, val_ex)
    else:
        model.attach_graph_modules(seed)
        g2c = [s for s in train if s.task == "Graph2Code"]
        plan1 = default_plan("Stage1", epochs=cfg.stage1_epochs, seed=seed, batch_size=cfg.batch_size,
                             adapter=cfg.adapter, views=cfg.views)
        reports["stage1"] = train_stage1(model, enc.encode_all(g2c), plan1)
        plan2 = default_plan("Stage2", epochs=cfg.stage2_epochs, seed=seed, batch_size=cfg.batch_size,
                             adapter=cfg.adapter, views=cfg.views)
        reports["stage2"] = train_stage2(model, enc.encode_all(s2_train), plan2, val_ex)
    log.info("run seed=%d control=%s finished in %.0fs", seed, control, time.time() - t0)
    return RunArtifacts(model, enc, train, test, reports)


def save_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def ablation_variants(base: RunConfig) -> dict[str, tuple[RunConfig, bool]]:
    """(config, control flag) per ablation row; all rows share the data seed and downstream split."""
    return {
        "galla": (base, False),
        "ast_only": (replace(base, views=("AST",)), False),
        "dfg_only": (replace(base, views=("DFG",)), False),
        "code_only": (base, True),
        "mlp_adapter": (replace(base, adapter="mlp"), False),
    }
