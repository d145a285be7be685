"""Pipeline configuration: one YAML file, overridable from the command line.

Key tree (every key optional except ``paths``)::

    seed: 0
    paths:     {data, ontology, database, embeddings, split, work_dir}
    corpus:    {min_count, max_size, train_limit, dev_size, test_size}
    model:     {embedding_dim, hidden_dim, dropout, max_decode_len, share_encoders, init_scale,
                embedding_init_std}
    train:     {learning_rate, beta1, beta2, eps, max_epochs, patience, batch_size, clip_norm}
    retrieval: {mode, tables, bits, probe_radius, k, reranker, reranker_max_queries}
    metrics:   {max_skip_fraction}

Relative paths resolve against the config file's directory. ``seed`` is
copied into every seeded component.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import yaml

from .errors import ConfigError
from .model import ModelConfig
from .retrieval import IndexConfig, RerankerConfig
from .training import TrainConfig

WORKDIR_ENV = "EXEMPLAR_DIALOG_WORKDIR"

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "paths": {"data": None, "ontology": None, "database": None, "embeddings": None, "split": None,
              "work_dir": None},
    "corpus": {"min_count": 3, "max_size": 20000, "train_limit": None, "dev_size": 1000, "test_size": 1000},
    "model": {"embedding_dim": 256, "hidden_dim": 512, "dropout": 0.3, "max_decode_len": 50,
              "share_encoders": True, "init_scale": 0.08, "embedding_init_std": 1.0},
    "train": {"learning_rate": 0.001, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8, "max_epochs": 50,
              "patience": 10, "batch_size": 32, "clip_norm": 5.0},
    "retrieval": {"mode": "approximate", "tables": 16, "bits": 12, "probe_radius": 2, "k": 10,
                  "reranker": "heuristic", "reranker_max_queries": 2000},
    "metrics": {"max_skip_fraction": 0.01},
}

INPUT_PATHS = ("data", "ontology", "database", "embeddings")


def _merge(base: dict, override: Mapping, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"config key {where + key!r} must be a mapping")
            out[key] = _merge(base[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


@dataclass
class PipelineConfig:
    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))
    source: str | None = None

    # -- construction

    @classmethod
    def from_mapping(cls, mapping: Mapping | None, base_dir: str | Path | None = None,
                     source: str | None = None) -> "PipelineConfig":
        data = _merge(DEFAULTS, mapping or {})
        if base_dir is not None:
            for key, value in data["paths"].items():
                if value is not None and not Path(value).is_absolute():
                    data["paths"][key] = str((Path(base_dir) / value).resolve())
        cfg = cls(data, source)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
        if not isinstance(raw, Mapping):
            raise ConfigError(f"{path}: top level must be a mapping")
        return cls.from_mapping(raw, path.parent, str(path))

    def override(self, dotted: Mapping[str, Any]) -> "PipelineConfig":
        """Apply ``{"train.max_epochs": 3, "seed": 1}`` style overrides."""
        tree: dict = {}
        for key, value in dotted.items():
            if value is None:
                continue
            node = tree
            parts = key.split(".")
            for p in parts[:-1]:
                node = node.setdefault(p, {})
            node[parts[-1]] = value
        cfg = PipelineConfig(_merge(self.data, tree), self.source)
        cfg.validate()
        return cfg

    # -- accessors

    def __getitem__(self, section: str):
        return self.data[section]

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def work_dir(self) -> Path:
        wd = self.data["paths"]["work_dir"] or os.environ.get(WORKDIR_ENV)
        if not wd:
            raise ConfigError(f"no work dir: set paths.work_dir, pass --work-dir or set {WORKDIR_ENV}")
        return Path(wd)

    def path(self, name: str) -> Path:
        value = self.data["paths"].get(name)
        if value is None:
            raise ConfigError(f"paths.{name} is not set")
        return Path(value)

    def require_inputs(self, names=INPUT_PATHS) -> None:
        for name in names:
            p = self.path(name)
            if not p.exists():
                raise ConfigError(f"paths.{name} does not exist: {p}")

    def model_config(self, vocab_size: int, arch: str) -> ModelConfig:
        m = self.data["model"]
        return ModelConfig(vocab_size=vocab_size, arch=arch, seed=self.seed, **m)

    def train_config(self) -> TrainConfig:
        return TrainConfig(seed=self.seed, **self.data["train"])

    def index_config(self) -> IndexConfig:
        r = self.data["retrieval"]
        return IndexConfig(mode=r["mode"], tables=r["tables"], bits=r["bits"], probe_radius=r["probe_radius"],
                           seed=self.seed)

    def reranker_config(self) -> RerankerConfig:
        return RerankerConfig(seed=self.seed, max_queries=self.data["retrieval"]["reranker_max_queries"])

    def validate(self) -> None:
        try:
            self.model_config(10, "hred")
            self.train_config()
            self.index_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid configuration: {exc}") from exc
        r = self.data["retrieval"]
        if r["reranker"] not in ("heuristic", "mlp"):
            raise ConfigError(f"retrieval.reranker must be heuristic or mlp, got {r['reranker']!r}")
        if int(r["k"]) < 1:
            raise ConfigError("retrieval.k must be >= 1")
        c = self.data["corpus"]
        if c["train_limit"] is not None and int(c["train_limit"]) < 1:
            raise ConfigError("corpus.train_limit must be positive")
        if not 0.0 <= float(self.data["metrics"]["max_skip_fraction"]) <= 1.0:
            raise ConfigError("metrics.max_skip_fraction must be in [0, 1]")

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)
