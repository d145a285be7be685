"""Adam training loop with gradient clipping, early stopping and checkpoints."""

from __future__ import annotations

import logging
import math
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from . import container
from .errors import DataError, NumericalError
from .model import Batch, ModelConfig, ParamSet, forward_loss, init_params

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    max_epochs: int = 50
    patience: int = 10
    batch_size: int = 32
    clip_norm: float = 5.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.patience >= self.max_epochs:
            raise ValueError(f"patience ({self.patience}) must be smaller than max_epochs ({self.max_epochs})")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros(cls, params) -> "AdamState":
        return cls([np.zeros_like(p.value) for p in params], [np.zeros_like(p.value) for p in params], 0)


def adam_step(params, state: AdamState, config: TrainConfig, grads: Sequence[np.ndarray] | None = None) -> None:
    """Apply one bias-corrected Adam update in place and advance ``state.t``."""
    params = list(params)
    grads = [p.grad for p in params] if grads is None else list(grads)
    if len(grads) != len(params) or len(state.m) != len(params):
        raise ValueError("adam_step: parameter, gradient and state lengths differ")
    for p, g in zip(params, grads):
        if g.shape != p.value.shape:
            raise ValueError(f"adam_step: gradient shape {g.shape} != parameter shape {p.value.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for parameter {p.name or '?'}")
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.value -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.eps)


def clip_grad_norm(params, max_norm: float) -> float:
    """Scale gradients so their global L2 norm is at most ``max_norm``; return the pre-clip norm."""
    params = list(params)
    norm = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    if not math.isfinite(norm):
        raise NumericalError("non-finite gradient norm")
    if norm > max_norm:
        scale = max_norm / (norm + 1e-12)
        for p in params:
            p.grad *= scale
    post = math.sqrt(sum(float(np.sum(p.grad * p.grad)) for p in params))
    assert post <= max_norm * (1 + 1e-9), (post, max_norm)
    return norm


@dataclass
class TrainHistory:
    epochs: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_dev_loss: float = math.inf
    stop_reason: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainHistory":
        return cls(**data)

    @property
    def train_losses(self) -> list[float]:
        return [e["train_loss"] for e in self.epochs]

    @property
    def dev_losses(self) -> list[float]:
        return [e["dev_loss"] for e in self.epochs]


def evaluate_loss(params: ParamSet, model_cfg: ModelConfig, data: Batch, batch_size: int = 64) -> float:
    """Token-weighted mean cross-entropy over ``data`` with dropout off."""
    total, tokens = 0.0, 0
    for start in range(0, len(data), batch_size):
        part = data.subset(range(start, min(start + batch_size, len(data))))
        n = part.target_tokens()
        total += forward_loss(part, params, model_cfg, training=False).item() * n
        tokens += n
    return total / tokens


def train(params: ParamSet, model_cfg: ModelConfig, train_data: Batch, dev_data: Batch, config: TrainConfig,
          adam_state: AdamState | None = None, start_epoch: int = 0,
          on_epoch: Callable[[dict], None] | None = None,
          stop_when: Callable[[dict], bool] | None = None) -> tuple[TrainHistory, ParamSet, AdamState]:
    """Train in place and return (history, best-dev parameters, optimiser state).

    ``stop_when(record)`` can end training early after any epoch (used by
    overfitting checks); the epoch's parameters are still considered for best.

    Shuffling and dropout draw from generators seeded by (seed, epoch), so a
    run resumed from a checkpoint replays the same batches.
    """
    if len(train_data) == 0 or len(dev_data) == 0:
        raise DataError("training needs non-empty train and dev data")
    for name, data in (("train", train_data), ("dev", dev_data)):
        if model_cfg.uses_exemplar and data.exemplar is None:
            raise DataError(f"exemplar architecture needs precomputed exemplars for the {name} data")
    state = adam_state or AdamState.zeros(params)
    history = TrainHistory()
    best = params.copy()
    bad_epochs = 0
    for epoch in range(start_epoch + 1, config.max_epochs + 1):
        t0 = time.perf_counter()
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_data))
        drop_rng = np.random.default_rng([config.seed, epoch, 1])
        losses, max_norm = [], 0.0
        for start in range(0, len(order), config.batch_size):
            batch = train_data.subset(order[start:start + config.batch_size])
            params.zero_grad()
            loss = forward_loss(batch, params, model_cfg, drop_rng, training=True)
            if not math.isfinite(loss.item()):
                raise NumericalError(f"non-finite training loss at epoch {epoch}")
            ad.backward(loss)
            max_norm = max(max_norm, clip_grad_norm(params, config.clip_norm))
            adam_step(params, state, config)
            losses.append(loss.item())
        dev_loss = evaluate_loss(params, model_cfg, dev_data, max(config.batch_size, 64))
        if not math.isfinite(dev_loss):
            raise NumericalError(f"non-finite dev loss at epoch {epoch}")
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(losses)),
            "dev_loss": dev_loss,
            "dev_perplexity": math.exp(min(dev_loss, 700.0)),
            "max_grad_norm": max_norm,
        }
        history.epochs.append(record)
        logger.info("epoch %d train %.4f dev %.4f (ppl %.2f) %.1fs", epoch, record["train_loss"],
                    dev_loss, record["dev_perplexity"], time.perf_counter() - t0)
        if on_epoch:
            on_epoch(record)
        if dev_loss < history.best_dev_loss:
            history.best_dev_loss = dev_loss
            history.best_epoch = epoch
            best = params.copy()
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs >= config.patience:
                history.stop_reason = f"early stopping: no dev improvement for {config.patience} epochs"
                break
        if stop_when is not None and stop_when(record):
            history.stop_reason = "stop condition met"
            break
    else:
        history.stop_reason = f"reached max_epochs={config.max_epochs}"
    return history, best, state


# -------------------------------------------------------------------- checkpoints

@dataclass
class Checkpoint:
    params: ParamSet
    adam_state: AdamState | None
    model_config: ModelConfig
    train_config: TrainConfig | None
    vocab_hash: str
    extra: dict = field(default_factory=dict)


def save_checkpoint(path: str | Path, params: ParamSet, adam_state: AdamState | None, model_cfg: ModelConfig,
                    vocab_hash: str, train_cfg: TrainConfig | None = None, extra: dict | None = None) -> None:
    arrays: OrderedDict[str, np.ndarray] = OrderedDict(("param/" + k, v) for k, v in params.arrays().items())
    if adam_state is not None:
        for name, m, v in zip(params.names(), adam_state.m, adam_state.v):
            arrays["adam_m/" + name] = m
            arrays["adam_v/" + name] = v
    header = {
        "format": "exemplar-dialog-checkpoint",
        "version": CHECKPOINT_VERSION,
        "model_config": model_cfg.to_dict(),
        "train_config": train_cfg.to_dict() if train_cfg else None,
        "vocab_hash": vocab_hash,
        "adam_t": adam_state.t if adam_state is not None else None,
        "param_names": params.names(),
        "extra": extra or {},
    }
    container.save(path, "ckpt", header, arrays)


def load_checkpoint(path: str | Path, vocab_hash: str | None = None) -> Checkpoint:
    header, arrays = container.load(path, "ckpt")
    if header.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {header.get('version')!r}")
    if vocab_hash is not None and header["vocab_hash"] != vocab_hash:
        raise DataError(f"{path}: checkpoint was trained with a different vocabulary "
                        f"({header['vocab_hash'][:12]} != {vocab_hash[:12]})")
    model_cfg = ModelConfig(**header["model_config"])
    params = init_params(model_cfg)
    if params.names() != header["param_names"]:
        raise DataError(f"{path}: parameter layout does not match the model configuration")
    try:
        params.load_arrays({k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")})
    except (KeyError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    adam = None
    if header["adam_t"] is not None:
        adam = AdamState([arrays["adam_m/" + n] for n in params.names()],
                         [arrays["adam_v/" + n] for n in params.names()], int(header["adam_t"]))
    train_cfg = TrainConfig(**header["train_config"]) if header["train_config"] else None
    return Checkpoint(params, adam, model_cfg, train_cfg, header["vocab_hash"], header.get("extra", {}))
