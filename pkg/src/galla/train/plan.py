"""Training plans: which parameters train, on what mixture, with which optimizer settings."""
from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

STAGES = ("LMPretrain", "Stage1", "Stage2", "Control")
FROZEN = {"LMPretrain": (), "Stage1": ("lm",), "Stage2": (), "Control": ()}

# Reference learning rates for the 7B setting; the tiny model here is tuned higher.
REFERENCE_LR = {"Stage1": 1e-4, "Stage2": 5e-5}

DEFAULTS = {
    "LMPretrain": dict(lr=1e-3, epochs=6, warmup=50, weight_decay=0.1),
    "Stage1": dict(lr=1e-3, epochs=15, warmup=50, weight_decay=0.1),
    "Stage2": dict(lr=1e-3, epochs=5, warmup=50, weight_decay=0.1, graph_dropout=0.1),
    "Control": dict(lr=1e-3, epochs=5, warmup=50, weight_decay=0.1),
}


@dataclass
class TrainPlan:
    stage: str
    lr: float = 1e-4
    epochs: int = 1
    warmup: int = 50
    weight_decay: float = 0.1
    batch_size: int = 32
    graph_dropout: float = 0.0  # fraction of graph samples trained with zeroed graph tokens
    seed: int = 0
    adapter: str = "cross_attn"
    views: tuple[str, ...] = ("AST", "DFG")
    mixture: dict[str, float] = field(default_factory=dict)
    paths: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}; expected one of {STAGES}")
        self.views = tuple(self.views)
        if any(v not in ("AST", "DFG") for v in self.views):
            raise ValueError(f"views must be AST and/or DFG, got {self.views}")
        if not 0.0 <= self.graph_dropout < 1.0:
            raise ValueError("graph_dropout must be in [0, 1)")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @property
    def frozen_sets(self) -> tuple[str, ...]:
        return FROZEN[self.stage]

    def weight(self, task: str) -> float:
        return float(self.mixture.get(task, 1.0))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["views"] = list(self.views)
        return d


def default_plan(stage: str, **overrides) -> TrainPlan:
    values = dict(DEFAULTS[stage])
    values.update(overrides)
    return TrainPlan(stage=stage, **values)


def load_plan(path: str | Path) -> TrainPlan:
    """Read a TOML plan; unspecified keys take the stage defaults."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    stage = raw.pop("stage", None)
    if stage is None:
        raise ValueError(f"{path}: missing 'stage'")
    mixture = raw.pop("weights", raw.pop("mixture", {}))
    paths = raw.pop("paths", {})
    known = set(TrainPlan.__dataclass_fields__) - {"stage", "mixture", "paths"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValueError(f"{path}: unknown plan keys {unknown}")
    return default_plan(stage, mixture=dict(mixture), paths=dict(paths), **raw)
