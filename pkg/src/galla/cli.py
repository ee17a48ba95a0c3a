"""Command line: extract, build-data, pretrain-lm, train, eval, ablate, inspect-graph.

Exit codes: 0 on success, 1 when inputs fail validation, 2 on usage errors.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import build_dataset, control_sample, read_samples, split_of, write_samples
from .data.corpus import InsufficientGraphs
from .eval.metrics import DisjointnessViolation, EmptySet, EvalResult, eval_downstream, eval_graphqa
from .minilang import (DEFAULT_MAX_TOKENS, MiniSyntaxError, Rejected, extract, graph_from_source, read_graphs,
                       write_graphs)
from .minilang.extract import iter_units
from .minilang.render import inspect
from .nn.model import GallaModel
from .tensor.checkpoint import CheckpointError
from .train.encode import SampleEncoder
from .train.pipeline import RunConfig, ablation_variants, pretrained_lm, run_galla, stage2_samples, train_tokenizers
from .train.plan import load_plan
from .train.trainer import FrozenParamDrift, MixtureEmpty, train_control, train_stage1, train_stage2

log = logging.getLogger("galla")


class ValidationFailure(Exception):
    """Raised for bad inputs; maps to exit code 1."""


VALIDATION_ERRORS = (ValidationFailure, CheckpointError, DisjointnessViolation, EmptySet, InsufficientGraphs,
                     FrozenParamDrift, MixtureEmpty, MiniSyntaxError, FileNotFoundError, KeyError, ValueError)


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _graphs_by_id(path: Path) -> dict:
    return {g.unit_id: g for g in read_graphs(path)}


# -- subcommands ---------------------------------------------------------------------

def cmd_extract(args) -> int:
    graphs, rejected = [], []
    for unit in iter_units(args.source):
        try:
            out = extract(unit, max_tokens=args.max_tokens)
        except SyntaxError as exc:
            out = Rejected(unit.id, f"SyntaxError: {exc}")
        (rejected if isinstance(out, Rejected) else graphs).append(out)
    if not graphs:
        raise ValidationFailure(f"no program under {args.source} was accepted")
    n = write_graphs(args.out, graphs)
    if args.rejected:
        _write_json(Path(args.rejected), [{"unit_id": r.unit_id, "reason": r.reason} for r in rejected])
    print(f"extracted {n} graphs, rejected {len(rejected)}")
    return 0


def cmd_build_data(args) -> int:
    if args.per_cell is not None:
        args.g2c_per_view = args.qa_per_cell = args.per_cell
    graphs = read_graphs(args.graphs)
    data = build_dataset(graphs, args.qa_per_cell, args.downstream, args.seed, args.test_per_cell,
                         args.negatives, g2c_per_view=args.g2c_per_view)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    man = data["manifest"]
    man["train_sha256"] = write_samples(out / "train.jsonl", data["train"])
    man["test_sha256"] = write_samples(out / "test.jsonl", data["test"])
    _write_json(out / "manifest.json", man)
    print(f"wrote {len(data['train'])} train and {len(data['test'])} test samples to {out}")
    return 0


def cmd_pretrain_lm(args) -> int:
    graphs = read_graphs(args.graphs)
    train = read_samples(Path(args.data) / "train.jsonl")
    train_graphs = [g for g in graphs if split_of(g.unit_id).endswith("train")]
    tokenizer, subtokens = train_tokenizers(train_graphs, train)
    cfg = RunConfig(pretrain_epochs=args.epochs, batch_size=args.batch_size, adapter=args.adapter)
    out = Path(args.out)
    if out.exists():
        out.unlink()
    _, report = pretrained_lm(graphs, tokenizer, subtokens, cfg, args.seed, cache=out)
    if report is not None:
        report.save(out.parent / f"{out.stem}-report")
        print(report.table())
    return 0


def cmd_train(args) -> int:
    plan = load_plan(args.plan)
    if args.seed is not None:
        plan.seed = args.seed
    paths = {k: Path(v) for k, v in plan.paths.items()}
    for key in ("init", "data", "graphs", "out"):
        if key not in paths:
            raise ValidationFailure(f"plan is missing paths.{key}")
    graphs = _graphs_by_id(paths["graphs"])
    train = [s for s in read_samples(paths["data"] / "train.jsonl")
             if s.graph_view == "NONE" or s.graph_view in plan.views]
    control = plan.stage == "Control"
    model = GallaModel.load(paths["init"], with_graph=not control)
    model.config.adapter = plan.adapter
    enc = SampleEncoder(model.tokenizer, model.subtokens, graphs)
    if plan.stage == "Stage1":
        if not model.has_graph_modules:
            model.attach_graph_modules(plan.seed)
        report = train_stage1(model, enc.encode_all([s for s in train if s.task == "Graph2Code"]), plan)
    elif plan.stage in ("Stage2", "Control"):
        keep, val = stage2_samples(train, RunConfig())
        if control:
            keep = [control_sample(s) for s in keep if s.task == "Graph2Code"] + \
                   [s for s in keep if s.task == "Downstream"]
            report = train_control(model, enc.encode_all(keep), plan, enc.encode_all(val))
        else:
            if not model.has_graph_modules:
                raise ValidationFailure("stage 2 starts from a stage-1 checkpoint with graph modules")
            report = train_stage2(model, enc.encode_all(keep), plan, enc.encode_all(val))
    else:
        raise ValidationFailure("use `galla pretrain-lm` for LM pretraining")
    out = paths["out"]
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / "model.ckpt")
    report.save(out)
    _write_json(out / "plan.json", plan.to_dict())
    print(report.table())
    return 0


def _table(records: list[dict]) -> str:
    head = ["run", "task", "metric", "value", "n", "unparseable", "zero_graph"]
    rows = [[str(r.get("run_id", "")), r["task"], r["metric"], f"{r['value']:.4f}", str(r["n"]),
             str(r.get("unparseable", 0)), "yes" if r.get("zero_graph") else "no"] for r in records]
    widths = [max(len(h), *(len(x[i]) for x in rows)) if rows else len(h) for i, h in enumerate(head)]
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    return "\n".join([fmt.format(*head), fmt.format(*("-" * w for w in widths))] + [fmt.format(*r) for r in rows])


def evaluate(model: GallaModel, enc: SampleEncoder, test, train_ids, probe: bool,
             max_samples: int | None) -> list[EvalResult]:
    qa = [s for s in test if s.task in ("EdgePred", "ParentPred", "ChildPred")]
    down = [s for s in test if s.task == "Downstream"]
    if max_samples:
        qa, down = qa[:max_samples], down[:max_samples]
    results: list[EvalResult] = []
    if qa and model.has_graph_modules:
        results += eval_graphqa(model, enc, qa, train_graph_ids=train_ids)
        if probe:
            results += eval_graphqa(model, enc, [s for s in qa if s.task == "EdgePred"], zero_graph=True,
                                    train_graph_ids=train_ids)
    if down:
        results.append(eval_downstream(model, enc, down))
    if not results:
        raise EmptySet("nothing to evaluate")
    return results


def cmd_eval(args) -> int:
    model = GallaModel.load(args.checkpoint, with_graph=not args.no_graph_modules)
    data = Path(args.data)
    test = read_samples(data / "test.jsonl")
    train_ids = {s.graph_id for s in read_samples(data / "train.jsonl")}
    enc = SampleEncoder(model.tokenizer, model.subtokens, _graphs_by_id(Path(args.graphs)))
    results = evaluate(model, enc, test, train_ids, not args.no_probe, args.max_samples)
    for r in results:
        r.seed = args.seed
    records = [r.to_record(args.run_id) for r in results]
    _write_json(Path(args.out), records)
    print(_table(records))
    return 0


def cmd_ablate(args) -> int:
    if args.results:
        records = []
        for path in args.results:
            records.extend(json.loads(Path(path).read_text()))
        table = _table(records)
    else:
        graphs = read_graphs(args.graphs)
        base = RunConfig(g2c_per_view=args.g2c_per_view, qa_per_cell=args.qa_per_cell,
                         n_downstream=args.downstream, test_per_cell=args.test_per_cell,
                         pretrain_epochs=args.pretrain_epochs, stage1_epochs=args.stage1_epochs,
                         stage2_epochs=args.stage2_epochs)
        workdir = Path(args.workdir)
        records = []
        for name, (cfg, control) in ablation_variants(base).items():
            if args.variants and name not in args.variants:
                continue
            art = run_galla(graphs, cfg, args.seed, workdir, control=control)
            train_ids = {s.graph_id for s in art.train}
            for r in evaluate(art.model, art.encoder, art.test, train_ids, not control, args.max_samples):
                r.seed = args.seed
                records.append(r.to_record(name))
        table = _table(records)
    if args.out:
        _write_json(Path(args.out), records)
        Path(args.out).with_suffix(".txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_inspect_graph(args) -> int:
    path = Path(args.file)
    print(inspect(graph_from_source(path.stem, path.read_text(encoding="utf-8"))), end="")
    return 0


# -- parser -------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="galla", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(fn=fn)
        return sp

    sp = add("extract", cmd_extract, "parse .mini files into graphs.jsonl")
    sp.add_argument("--in", dest="source", required=True, help="directory of .mini files")
    sp.add_argument("-o", "--out", required=True)
    sp.add_argument("--max-tokens", type=int, default=DEFAULT_MAX_TOKENS)
    sp.add_argument("--rejected", help="write rejected units to this JSON file")

    sp = add("build-data", cmd_build_data, "materialize alignment and downstream samples")
    sp.add_argument("--graphs", required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--g2c-per-view", type=int, default=1000)
    sp.add_argument("--qa-per-cell", type=int, default=1200)
    sp.add_argument("--downstream", type=int, default=2000)
    sp.add_argument("--test-per-cell", type=int, default=600)
    sp.add_argument("--negatives", choices=("decoy", "uniform"), default="decoy")
    sp.add_argument("--per-cell", type=int, help="one count for every training cell (overrides the two above)")

    sp = add("pretrain-lm", cmd_pretrain_lm, "train tokenizers and the decoder LM on training-split code")
    sp.add_argument("--graphs", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--out", required=True, help="checkpoint path")
    sp.add_argument("--epochs", type=int, default=6)
    sp.add_argument("--batch-size", type=int, default=32)
    sp.add_argument("--adapter", choices=("cross_attn", "mlp"), default="cross_attn")

    sp = add("train", cmd_train, "run one training stage described by a TOML plan")
    sp.add_argument("--plan", required=True)
    sp.set_defaults(seed=None)

    sp = add("eval", cmd_eval, "score a checkpoint on the held-out samples")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--data", required=True)
    sp.add_argument("--graphs", required=True)
    sp.add_argument("--out", required=True, help="results JSON path")
    sp.add_argument("--run-id", default="run")
    sp.add_argument("--max-samples", type=int)
    sp.add_argument("--no-probe", action="store_true", help="skip the zeroed-graph EdgePred probe")
    sp.add_argument("--no-graph-modules", action="store_true", help="load the LM only")

    sp = add("ablate", cmd_ablate, "run the ablation variants, or tabulate existing results")
    sp.add_argument("--results", nargs="+", help="tabulate these results files instead of training")
    sp.add_argument("--graphs")
    sp.add_argument("--workdir", default="ablation")
    sp.add_argument("--out")
    sp.add_argument("--variants", nargs="+", choices=("galla", "ast_only", "dfg_only", "code_only", "mlp_adapter"))
    sp.add_argument("--g2c-per-view", type=int, default=1000)
    sp.add_argument("--qa-per-cell", type=int, default=1200)
    sp.add_argument("--downstream", type=int, default=2000)
    sp.add_argument("--test-per-cell", type=int, default=600)
    sp.add_argument("--pretrain-epochs", type=int, default=6)
    sp.add_argument("--stage1-epochs", type=int, default=15)
    sp.add_argument("--stage2-epochs", type=int, default=5)
    sp.add_argument("--max-samples", type=int)

    sp = add("inspect-graph", cmd_inspect_graph, "print the AST and DFG tables of a .mini file")
    sp.add_argument("file")
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "ablate" and not args.results and not args.graphs:
        parser.error("ablate needs --graphs (or --results)")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(asctime)s %(message)s")
    try:
        return args.fn(args)
    except VALIDATION_ERRORS as exc:
        print(f"galla {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
