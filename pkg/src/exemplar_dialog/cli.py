"""Command-line driver: ``exemplar-dialog <command> [options]``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from contextlib import nullcontext
from pathlib import Path

import yaml

from . import __version__, pipeline, synth
from .config import WORKDIR_ENV, PipelineConfig
from .errors import ConfigError, ExemplarDialogError
from .model import ARCHITECTURES

logger = logging.getLogger("exemplar_dialog")

COMMANDS = ("prepare", "index", "train", "generate", "evaluate", "report", "run")


def _parse_set(items) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        out[key.strip()] = yaml.safe_load(value)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="pipeline YAML file")
    common.add_argument("--work-dir", type=Path, help=f"artifact directory (fallback: ${WORKDIR_ENV})")
    common.add_argument("--seed", type=int, help="seed for every seeded component")
    common.add_argument("--deterministic", action="store_true",
                        help="single-threaded numerics so reruns give byte-identical outputs")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key, e.g. train.max_epochs=5 (repeatable)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="exemplar-dialog", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("prepare", parents=[common], help="tokenize, delexicalize and split the corpus")
    sub.add_parser("index", parents=[common], help="build the retrieval index and cache exemplars")
    p = sub.add_parser("train", parents=[common], help="train one architecture")
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p = sub.add_parser("generate", parents=[common], help="greedy-decode a split")
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p = sub.add_parser("evaluate", parents=[common], help="score a generations file")
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p.add_argument("--generations", type=Path, help="score this file instead of the run's own")
    p = sub.add_parser("report", parents=[common], help="side-by-side table and figures")
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p.add_argument("--arch", choices=ARCHITECTURES, action="append",
                   help="runs to include (default: both)")
    p = sub.add_parser("run", parents=[common], help="every stage for both architectures")
    p.add_argument("--split", choices=("dev", "test"), default="test")
    p.add_argument("--arch", choices=ARCHITECTURES, action="append")

    p = sub.add_parser("synth", help="write a synthetic MultiWOZ-style corpus and a matching config")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--dialogues", type=int, default=700)
    p.add_argument("--dev-size", type=int, default=100)
    p.add_argument("--test-size", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embedding-dim", type=int, default=50)
    return parser


def load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if args.config else PipelineConfig.from_mapping({})
    overrides = _parse_set(args.set)
    overrides["seed"] = args.seed
    if args.work_dir is not None:
        overrides["paths.work_dir"] = str(args.work_dir.resolve())
    return cfg.override(overrides)


def cmd_synth(args) -> int:
    paths = synth.write_corpus(args.out_dir, args.dialogues, args.seed, args.dev_size, args.test_size,
                               args.embedding_dim)
    config = {
        "seed": args.seed,
        "paths": {"data": paths["dialogues"].name, "ontology": paths["ontology"].name,
                  "database": paths["database"].name, "embeddings": paths["embeddings"].name,
                  "split": paths["split"].name, "work_dir": "work"},
    }
    cfg_path = Path(args.out_dir) / "config.yaml"
    cfg_path.write_text(yaml.safe_dump(config, sort_keys=False), encoding="utf-8")
    for name, path in paths.items():
        print(f"{name}: {path}")
    print(f"config: {cfg_path}")
    return 0


def dispatch(args) -> int:
    if args.command == "synth":
        return cmd_synth(args)
    cfg = load_config(args)
    if args.command == "prepare":
        pipeline.cmd_prepare(cfg)
    elif args.command == "index":
        pipeline.cmd_index(cfg)
    elif args.command == "train":
        pipeline.cmd_train(cfg, args.arch)
    elif args.command == "generate":
        pipeline.cmd_generate(cfg, args.arch, args.split)
    elif args.command == "evaluate":
        pipeline.cmd_evaluate(cfg, args.arch, args.split, args.generations)
    elif args.command == "report":
        pipeline.cmd_report(cfg, args.split, tuple(args.arch or ARCHITECTURES))
    elif args.command == "run":
        pipeline.run_all(cfg, tuple(args.arch or ARCHITECTURES), args.split)
    return 0


def _thread_limit(deterministic: bool):
    if not deterministic:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=1)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is already our config code
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if getattr(args, "verbose", False) else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        with _thread_limit(getattr(args, "deterministic", False)):
            return dispatch(args)
    except ExemplarDialogError as exc:
        logger.error("%s", exc)
        return exc.exit_code
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return 3


if __name__ == "__main__":
    sys.exit(main())
