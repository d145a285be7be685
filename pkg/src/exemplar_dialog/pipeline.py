"""The six pipeline stages, each reading and writing artifacts under one work dir.

Layout::

    work_dir/
      resolved_config.yaml
      prepared/  train.jsonl dev.jsonl test.jsonl vocab.json split.json goals.json summary.json
      index/     index.bin reranker.json exemplars_{train,dev,test}.jsonl
      runs/<arch>/  model.ckpt history.json generations_<split>.jsonl eval_<split>.json
      report/    table.txt table.tsv report.json training_curves.png metrics.png

Every file is written to a temporary name and renamed, so a failed stage
leaves no partial artifact behind.
"""

from __future__ import annotations

import json
import logging
import math
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import corpus, plotting
from .config import PipelineConfig
from .container import atomic_write_text
from .errors import ConfigError, DataError
from .metrics import PUBLISHED_TARGETS, EvalReport, evaluate, render_table
from .metrics.report import METRIC_ROWS, display_value
from .model import ARCHITECTURES, EXEMPLAR, Batch, generate, init_params
from .retrieval import (
    RerankerModel,
    RetrievalResources,
    build_index,
    exemplar_for,
    save_index,
    train_reranker,
)
from .text import RESERVED, Vocabulary, build_vocab, decode, encode, load_embeddings
from .training import TrainHistory, load_checkpoint, save_checkpoint, train

logger = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
GEN_BATCH = 64


# ------------------------------------------------------------------------ helpers

def write_jsonl(path: Path, rows: Iterable[Mapping]) -> None:
    atomic_write_text(path, "".join(json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows))


def read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        raise DataError(f"file not found: {path}")
    rows = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise DataError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
    return rows


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False) + "\n")


def read_json(path: Path):
    if not path.exists():
        raise DataError(f"file not found: {path}")
    return json.loads(path.read_text(encoding="utf-8"))


class Layout:
    def __init__(self, work_dir: Path):
        self.root = Path(work_dir)
        self.prepared = self.root / "prepared"
        self.index_dir = self.root / "index"
        self.runs = self.root / "runs"
        self.report = self.root / "report"

    def triples(self, split: str) -> Path:
        return self.prepared / f"{split}.jsonl"

    @property
    def vocab(self) -> Path:
        return self.prepared / "vocab.json"

    @property
    def goals(self) -> Path:
        return self.prepared / "goals.json"

    @property
    def index(self) -> Path:
        return self.index_dir / "index.bin"

    @property
    def reranker(self) -> Path:
        return self.index_dir / "reranker.json"

    def exemplars(self, split: str) -> Path:
        return self.index_dir / f"exemplars_{split}.jsonl"

    def run(self, arch: str) -> Path:
        return self.runs / arch

    def checkpoint(self, arch: str) -> Path:
        return self.run(arch) / "model.ckpt"

    def history(self, arch: str) -> Path:
        return self.run(arch) / "history.json"

    def generations(self, arch: str, split: str) -> Path:
        return self.run(arch) / f"generations_{split}.jsonl"

    def evaluation(self, arch: str, split: str) -> Path:
        return self.run(arch) / f"eval_{split}.json"


def _require(path: Path, stage: str) -> None:
    if not path.exists():
        raise ConfigError(f"{path} is missing; run `exemplar-dialog {stage}` first")


def _check_arch(arch: str) -> None:
    if arch not in ARCHITECTURES:
        raise ConfigError(f"unknown architecture {arch!r}; expected one of {', '.join(ARCHITECTURES)}")


def _check_split(split: str, allowed=SPLITS) -> None:
    if split not in allowed:
        raise ConfigError(f"unknown split {split!r}; expected one of {', '.join(allowed)}")


def write_resolved_config(cfg: PipelineConfig, layout: Layout) -> None:
    layout.root.mkdir(parents=True, exist_ok=True)
    atomic_write_text(layout.root / "resolved_config.yaml", cfg.to_yaml())


def load_triples(layout: Layout, split: str) -> list[corpus.ContextTriple]:
    _require(layout.triples(split), "prepare")
    return [corpus.ContextTriple.from_json(r) for r in read_jsonl(layout.triples(split))]


def load_vocab(layout: Layout) -> Vocabulary:
    _require(layout.vocab, "prepare")
    return Vocabulary.from_dict(read_json(layout.vocab))


# ------------------------------------------------------------------------ prepare

def cmd_prepare(cfg: PipelineConfig) -> dict:
    """Tokenize, delexicalize and window the corpus; build the vocabulary."""
    cfg.require_inputs(("data", "ontology", "database"))
    layout = Layout(cfg.work_dir)
    ont = corpus.load_ontology(cfg.path("ontology"))
    corpus.load_database(cfg.path("database"))
    dialogues = corpus.load_dialogues(cfg.path("data"))
    dialogues = corpus.delexicalize_dialogues(dialogues, ont)
    c = cfg["corpus"]
    manifest = cfg["paths"].get("split")
    if manifest is not None and not Path(manifest).exists():
        raise ConfigError(f"paths.split does not exist: {manifest}")
    split = corpus.split_corpus(dialogues, manifest, c["dev_size"], c["test_size"], cfg.seed)
    if c["train_limit"] is not None:
        split.train = sorted(split.train, key=lambda d: d.dialogue_id)[: int(c["train_limit"])]
    triples = {name: corpus.make_triples(getattr(split, name)) for name in SPLITS}
    if not triples["train"]:
        raise DataError("training split produced no context triples")
    vocab = build_vocab(triples["train"], c["min_count"], c["max_size"])
    unknown_goal_slots = sorted({s for d in dialogues if d.goal for s in corpus.check_goal(d.goal, ont)})

    write_resolved_config(cfg, layout)
    for name in SPLITS:
        write_jsonl(layout.triples(name), (t.to_json() for t in triples[name]))
    write_json(layout.vocab, vocab.to_dict())
    manifest_out = {name: sorted(d.dialogue_id for d in getattr(split, name)) for name in SPLITS}
    write_json(layout.prepared / "split.json", manifest_out)
    goals = {d.dialogue_id: (d.goal.to_json() if d.goal else None)
             for name in SPLITS for d in getattr(split, name)}
    write_json(layout.goals, goals)
    summary = {
        "dialogues": {name: len(getattr(split, name)) for name in SPLITS},
        "triples": {name: len(triples[name]) for name in SPLITS},
        "vocab_size": len(vocab),
        "vocab_hash": vocab.hash(),
        "unknown_goal_slots": unknown_goal_slots,
    }
    write_json(layout.prepared / "summary.json", summary)
    print(f"dialogues: train={summary['dialogues']['train']} dev={summary['dialogues']['dev']} "
          f"test={summary['dialogues']['test']}")
    print(f"triples:   train={summary['triples']['train']} dev={summary['triples']['dev']} "
          f"test={summary['triples']['test']}")
    print(f"vocab:     {len(vocab)} entries")
    return summary


# -------------------------------------------------------------------------- index

def retrieval_resources(cfg: PipelineConfig, index) -> RetrievalResources:
    emb = None
    if cfg["paths"].get("embeddings"):
        cfg.require_inputs(("embeddings",))
        try:
            emb = load_embeddings(cfg.path("embeddings"), Vocabulary(t for t in index.idf.terms if t not in RESERVED))
        except ValueError as exc:
            raise DataError(str(exc)) from exc
    return RetrievalResources(index.idf, emb)


def _exemplar_rows(triples, index, reranker, resources, k: int):
    for tr in triples:
        cand = exemplar_for(tr.u.tokens, index, reranker, resources, tr.dialogue_id, k)
        row = {"dialogue_id": tr.dialogue_id, "turn_index": tr.turn_index, "query": list(tr.u.tokens)}
        if cand is None:
            row.update(record_id=None, exemplar=[corpus.SENTINEL_TOKEN], distance=None, score=None,
                       source_dialogue=None, matched_user=None)
        else:
            row.update(record_id=cand.record.record_id, exemplar=list(cand.record.response_tokens),
                       distance=cand.distance, score=cand.score, source_dialogue=cand.record.dialogue_id,
                       matched_user=list(cand.record.user_tokens))
        yield row


def cmd_index(cfg: PipelineConfig) -> dict:
    """Index training user turns, fit the reranker, and cache an exemplar per triple."""
    layout = Layout(cfg.work_dir)
    train_triples = load_triples(layout, "train")
    index = build_index(train_triples, cfg.index_config())
    resources = retrieval_resources(cfg, index)
    r = cfg["retrieval"]
    if r["reranker"] == "mlp":
        reranker = train_reranker(train_triples, index, resources, cfg.reranker_config())
    else:
        reranker = RerankerModel.heuristic()
    write_resolved_config(cfg, layout)
    layout.index_dir.mkdir(parents=True, exist_ok=True)
    save_index(index, layout.index)
    reranker.save(layout.reranker)
    counts = {}
    for split in SPLITS:
        rows = list(_exemplar_rows(load_triples(layout, split), index, reranker, resources, int(r["k"])))
        write_jsonl(layout.exemplars(split), rows)
        counts[split] = {"queries": len(rows), "missing": sum(row["record_id"] is None for row in rows)}
    print(f"index: {len(index)} records, {index.dim} terms, mode={index.config.mode}, reranker={reranker.kind}")
    return {"records": len(index), "exemplars": counts}


# -------------------------------------------------------------------------- train

def _load_exemplars(layout: Layout, split: str, triples) -> list[list[str]]:
    _require(layout.exemplars(split), "index")
    rows = read_jsonl(layout.exemplars(split))
    if [(r["dialogue_id"], r["turn_index"]) for r in rows] != [(t.dialogue_id, t.turn_index) for t in triples]:
        raise DataError(f"{layout.exemplars(split)} does not match the prepared {split} triples; rerun index")
    return [r["exemplar"] for r in rows]


def make_batch(triples, vocab: Vocabulary, exemplars: Sequence[Sequence[str]] | None = None) -> Batch:
    return Batch(
        [encode(t.s1.tokens, vocab) for t in triples],
        [encode(t.u.tokens, vocab) for t in triples],
        [encode(t.s2.tokens, vocab) for t in triples],
        [encode(e, vocab) for e in exemplars] if exemplars is not None else None,
        [(t.dialogue_id, t.turn_index) for t in triples],
    )


def _split_batch(layout: Layout, split: str, vocab: Vocabulary, arch: str):
    triples = load_triples(layout, split)
    exemplars = _load_exemplars(layout, split, triples) if arch == EXEMPLAR else None
    return triples, exemplars, make_batch(triples, vocab, exemplars)


def cmd_train(cfg: PipelineConfig, arch: str) -> TrainHistory:
    _check_arch(arch)
    layout = Layout(cfg.work_dir)
    vocab = load_vocab(layout)
    if arch == EXEMPLAR:
        _require(layout.index, "index")
    _, _, train_batch = _split_batch(layout, "train", vocab, arch)
    _, _, dev_batch = _split_batch(layout, "dev", vocab, arch)
    model_cfg = cfg.model_config(len(vocab), arch)
    train_cfg = cfg.train_config()
    params = init_params(model_cfg)
    logger.info("training %s: %d parameters, %d train / %d dev triples", arch, params.count(),
                len(train_batch), len(dev_batch))
    history, best, state = train(params, model_cfg, train_batch, dev_batch, train_cfg)
    write_resolved_config(cfg, layout)
    layout.run(arch).mkdir(parents=True, exist_ok=True)
    save_checkpoint(layout.checkpoint(arch), best, state, model_cfg, vocab.hash(), train_cfg,
                    {"best_epoch": history.best_epoch})
    write_json(layout.history(arch), history.to_dict())
    print(f"{arch}: {len(history.epochs)} epochs, best epoch {history.best_epoch}, "
          f"dev loss {history.best_dev_loss:.4f} ({history.stop_reason})")
    return history


# ----------------------------------------------------------------------- generate

def cmd_generate(cfg: PipelineConfig, arch: str, split: str = "test") -> Path:
    _check_arch(arch)
    _check_split(split, ("dev", "test"))
    layout = Layout(cfg.work_dir)
    vocab = load_vocab(layout)
    _require(layout.checkpoint(arch), f"train --arch {arch}")
    ckpt = load_checkpoint(layout.checkpoint(arch), vocab.hash())
    if ckpt.model_config.arch != arch:
        raise DataError(f"{layout.checkpoint(arch)} holds a {ckpt.model_config.arch} model, not {arch}")
    triples, exemplars, batch = _split_batch(layout, split, vocab, arch)
    hyps: list[list[int]] = []
    for start in range(0, len(batch), GEN_BATCH):
        part = batch.subset(range(start, min(start + GEN_BATCH, len(batch))))
        hyps.extend(generate(part, ckpt.params, ckpt.model_config))
    rows = []
    for i, (tr, ids) in enumerate(zip(triples, hyps)):
        row = {
            "dialogue_id": tr.dialogue_id,
            "turn_index": tr.turn_index,
            "context": [" ".join(tr.s1.tokens), " ".join(tr.u.tokens)],
            "gold": " ".join(tr.s2.tokens),
            "hypothesis": " ".join(decode(ids, vocab)),
        }
        if exemplars is not None:
            row["exemplar"] = " ".join(exemplars[i])
        rows.append(row)
    write_resolved_config(cfg, layout)
    out = layout.generations(arch, split)
    write_jsonl(out, rows)
    print(f"{arch}: wrote {len(rows)} generations to {out}")
    return out


# ----------------------------------------------------------------------- evaluate

def evaluation_settings(cfg: PipelineConfig) -> dict:
    return {"max_skip_fraction": cfg["metrics"]["max_skip_fraction"], "seed": cfg.seed}


def evaluate_rows(cfg: PipelineConfig, rows: list[dict], goals_path: Path | None = None) -> EvalReport:
    cfg.require_inputs(("ontology", "database", "embeddings"))
    if not rows:
        raise DataError("generations file is empty")
    for i, r in enumerate(rows):
        missing = {"dialogue_id", "turn_index", "gold", "hypothesis"} - set(r)
        if missing:
            raise DataError(f"generation row {i} lacks {sorted(missing)}")
    ont = corpus.load_ontology(cfg.path("ontology"))
    db = corpus.load_database(cfg.path("database"))
    goals = {}
    if goals_path is not None:
        goals = {d: corpus.GoalSpec.from_json(g) if g else None for d, g in read_json(goals_path).items()}
    # the embedding table covers every token that appears in the run, not just the model vocabulary
    tokens = sorted({t for r in rows for key in ("gold", "hypothesis") for t in r[key].split()} - set(RESERVED))
    try:
        emb = load_embeddings(cfg.path("embeddings"), Vocabulary(tokens))
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    emb.path = cfg.path("embeddings").name
    return evaluate(rows, emb, goals, db, ont, evaluation_settings(cfg), cfg["metrics"]["max_skip_fraction"])


def cmd_evaluate(cfg: PipelineConfig, arch: str, split: str = "test", generations: Path | None = None) -> EvalReport:
    _check_arch(arch)
    _check_split(split, ("dev", "test"))
    layout = Layout(cfg.work_dir)
    path = Path(generations) if generations else layout.generations(arch, split)
    _require(path, f"generate --arch {arch} --split {split}")
    _require(layout.goals, "prepare")
    report = evaluate_rows(cfg, read_jsonl(path), layout.goals)
    write_resolved_config(cfg, layout)
    layout.run(arch).mkdir(parents=True, exist_ok=True)
    atomic_write_text(layout.evaluation(arch, split), report.to_json())
    print(render_table({arch: report}))
    return report


# ------------------------------------------------------------------------- report

def perplexity_check(histories: Mapping[str, TrainHistory]) -> dict:
    """Soft check: does Exemplar-HRED reach a dev perplexity no worse than HRED?"""
    if "hred" not in histories or "exemplar" not in histories:
        return {"checked": False, "reason": "needs both runs"}
    ppl = {a: math.exp(min(h.best_dev_loss, 700.0)) for a, h in histories.items()}
    ok = ppl["exemplar"] <= ppl["hred"]
    msg = (f"soft check: exemplar dev perplexity {ppl['exemplar']:.3f} "
           f"{'<=' if ok else '>'} hred {ppl['hred']:.3f}")
    (logger.info if ok else logger.warning)(msg)
    return {"checked": True, "exemplar_le_hred": ok, "dev_perplexity": ppl, "message": msg}


def report_rows(reports: Mapping[str, EvalReport]) -> list[dict]:
    rows = []
    for key, label in METRIC_ROWS:
        for arch, rep in reports.items():
            rows.append({"metric": key, "label": label, "arch": arch, "value": getattr(rep, key),
                         "display": display_value(key, getattr(rep, key)),
                         "published": PUBLISHED_TARGETS.get(arch, {}).get(key)})
    return rows


def cmd_report(cfg: PipelineConfig, split: str = "test", archs: Sequence[str] = ARCHITECTURES) -> str:
    _check_split(split, ("dev", "test"))
    layout = Layout(cfg.work_dir)
    reports: dict[str, EvalReport] = {}
    histories: dict[str, TrainHistory] = {}
    for arch in archs:
        _check_arch(arch)
        if not layout.run(arch).is_dir():
            raise ConfigError(f"run directory {layout.run(arch)} is missing; train and evaluate {arch} first")
        _require(layout.evaluation(arch, split), f"evaluate --arch {arch} --split {split}")
        reports[arch] = EvalReport.from_dict(read_json(layout.evaluation(arch, split)))
        if layout.history(arch).exists():
            histories[arch] = TrainHistory.from_dict(read_json(layout.history(arch)))
    table = render_table(reports)
    check = perplexity_check(histories)
    rows = report_rows(reports)
    layout.report.mkdir(parents=True, exist_ok=True)
    atomic_write_text(layout.report / "table.txt", table)
    tsv = ["metric\tarch\tmeasured\tpublished"] + [
        f"{r['label']}\t{r['arch']}\t{r['display']}\t{'' if r['published'] is None else r['published']}" for r in rows]
    atomic_write_text(layout.report / "table.tsv", "\n".join(tsv) + "\n")
    write_json(layout.report / "report.json", {
        "split": split,
        "runs": {a: rep.to_dict() for a, rep in reports.items()},
        "published_targets": {a: PUBLISHED_TARGETS[a] for a in reports if a in PUBLISHED_TARGETS},
        "rows": rows,
        "perplexity_check": check,
        "note": "published values are reference targets from full-scale training, not expected at desk scale",
    })
    figures = []
    if histories:
        figures.append(plotting.training_curves(histories, layout.report / "training_curves.png"))
    figures.append(plotting.metric_bars(reports, PUBLISHED_TARGETS, layout.report / "metrics.png"))
    print(table, end="")
    print("published columns are full-scale results, shown as reference targets only")
    if check.get("checked"):
        print(check["message"])
    for f in figures:
        print(f"figure: {f}")
    return table


def run_all(cfg: PipelineConfig, archs: Sequence[str] = ARCHITECTURES, split: str = "test") -> str:
    cmd_prepare(cfg)
    cmd_index(cfg)
    for arch in archs:
        cmd_train(cfg, arch)
        cmd_generate(cfg, arch, split)
        cmd_evaluate(cfg, arch, split)
    return cmd_report(cfg, split, archs)


__all__ = [
    "Layout", "cmd_prepare", "cmd_index", "cmd_train", "cmd_generate", "cmd_evaluate", "cmd_report", "run_all",
    "make_batch", "perplexity_check", "read_jsonl", "evaluate_rows",
]
