"""HRED and Exemplar-HRED built from GRU cells on the autodiff engine.

Batches are time-major: utterances are padded to ``(T, B)`` id arrays and
carried with a ``(T, B)`` mask so shorter rows keep their last hidden state.
"""

from __future__ import annotations

import copy
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .text import EOS_ID, PAD_ID, SOS_ID

HRED = "hred"
EXEMPLAR = "exemplar"
ARCHITECTURES = (HRED, EXEMPLAR)


@dataclass
class ModelConfig:
    vocab_size: int
    embedding_dim: int = 256
    hidden_dim: int = 512
    dropout: float = 0.3
    max_decode_len: int = 50
    arch: str = HRED
    share_encoders: bool = True
    init_scale: float = 0.08
    embedding_init_std: float | None = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.embedding_dim <= 0 or self.hidden_dim <= 0:
            raise ValueError("embedding_dim and hidden_dim must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.arch not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.arch!r}; expected one of {ARCHITECTURES}")

    @property
    def uses_exemplar(self) -> bool:
        return self.arch == EXEMPLAR

    def to_dict(self) -> dict:
        return asdict(self)


GRU_PARTS = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")


@dataclass
class GruParams:
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    @property
    def input_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.U_z.shape[0]


class ParamSet:
    """Ordered name -> Tensor store; iteration order is the checkpoint order."""

    def __init__(self, tensors: "OrderedDict[str, Tensor]"):
        self.tensors = tensors

    def __iter__(self) -> Iterator[Tensor]:
        return iter(self.tensors.values())

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __len__(self) -> int:
        return len(self.tensors)

    def names(self) -> list[str]:
        return list(self.tensors)

    def items(self):
        return self.tensors.items()

    def count(self) -> int:
        return int(sum(t.value.size for t in self))

    def gru(self, prefix: str) -> GruParams:
        return GruParams(*(self.tensors[f"{prefix}.{p}"] for p in GRU_PARTS))

    def arrays(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((k, t.value.copy()) for k, t in self.tensors.items())

    def load_arrays(self, arrays) -> None:
        for name, t in self.tensors.items():
            value = np.asarray(arrays[name], dtype=np.float64)
            if value.shape != t.shape:
                raise ValueError(f"parameter {name}: shape {value.shape} != {t.shape}")
            t.value = value.copy()

    def copy(self) -> "ParamSet":
        return copy.deepcopy(self)

    def zero_grad(self) -> None:
        ad.zero_grad(self)


def _gru_shapes(prefix: str, n_in: int, n_hid: int):
    for gate in "zrh":
        yield f"{prefix}.W_{gate}", (n_in, n_hid)
    for gate in "zrh":
        yield f"{prefix}.U_{gate}", (n_hid, n_hid)
    for gate in "zrh":
        yield f"{prefix}.b_{gate}", (n_hid,)


def param_shapes(cfg: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    E, H, V = cfg.embedding_dim, cfg.hidden_dim, cfg.vocab_size
    shapes = [("embedding", (V, E))]
    shapes += _gru_shapes("encoder", E, H)
    if cfg.uses_exemplar and not cfg.share_encoders:
        shapes += _gru_shapes("exemplar_encoder", E, H)
    shapes += _gru_shapes("context", H, H)
    shapes += _gru_shapes("decoder", E, H)
    shapes += [("init.W", (H, H)), ("init.b", (H,)), ("out.W", (H, V)), ("out.b", (V,))]
    return shapes


def init_params(cfg: ModelConfig) -> ParamSet:
    """Uniform(-init_scale, init_scale) weights from ``cfg.seed``.

    Word embeddings are drawn from N(0, embedding_init_std^2) unless that is
    None. With small uniform embeddings the encoders' outputs barely differ
    between utterances and the decoder settles into an unconditional language
    model before the context path learns anything.
    """
    rng = np.random.default_rng(cfg.seed)
    tensors = OrderedDict()
    for name, shape in param_shapes(cfg):
        value = rng.uniform(-cfg.init_scale, cfg.init_scale, size=shape)
        if name == "embedding" and cfg.embedding_init_std is not None:
            value = rng.standard_normal(shape) * cfg.embedding_init_std
        tensors[name] = Tensor(value, requires_grad=True, name=name)
    return ParamSet(tensors)


# ------------------------------------------------------------------------ GRU cell

def _gru_weights(p: GruParams):
    """Concatenate gate matrices once per forward pass (one matmul per step)."""
    return (ad.concat([p.W_z, p.W_r, p.W_h], axis=-1),
            ad.concat([p.U_z, p.U_r], axis=-1),
            p.U_h,
            ad.concat([p.b_z, p.b_r, p.b_h], axis=-1))


def _gru_cell(xw: Tensor, h: Tensor, U_zr: Tensor, U_h: Tensor, H: int) -> Tensor:
    """GRU update given the precomputed input projection ``xw = x W + b``."""
    hu = h @ U_zr
    z = ad.sigmoid(xw[..., :H] + hu[..., :H])
    r = ad.sigmoid(xw[..., H:2 * H] + hu[..., H:])
    h_tilde = ad.tanh(xw[..., 2 * H:] + (r * h) @ U_h)
    return h + z * (h_tilde - h)


def gru_step(x, h, p: GruParams) -> Tensor:
    """One GRU transition.

    z = sigmoid(x W_z + h U_z + b_z), r = sigmoid(x W_r + h U_r + b_r),
    h~ = tanh(x W_h + (r * h) U_h + b_h), h' = (1 - z) * h + z * h~.
    """
    x, h = ad.as_tensor(x), ad.as_tensor(h)
    if x.shape[-1] != p.input_size or h.shape[-1] != p.hidden_size:
        raise ValueError(f"gru_step: input {x.shape} / hidden {h.shape} do not match "
                         f"params ({p.input_size} -> {p.hidden_size})")
    W, U_zr, U_h, b = _gru_weights(p)
    return _gru_cell(x @ W + b, h, U_zr, U_h, p.hidden_size)


def run_gru(inputs: Tensor, p: GruParams, mask: np.ndarray | None = None, h0: Tensor | None = None) -> Tensor:
    """Run a GRU over time-major ``inputs`` (T, B, D); return the last valid state (B, H)."""
    T, B = inputs.shape[0], inputs.shape[1]
    H = p.hidden_size
    W, U_zr, U_h, b = _gru_weights(p)
    xw = inputs @ W + b
    h = h0 if h0 is not None else Tensor(np.zeros((B, H)))
    for t in range(T):
        h_new = _gru_cell(xw[t], h, U_zr, U_h, H)
        if mask is None or mask[t].all():
            h = h_new
        else:
            h = h + Tensor(mask[t][:, None].astype(np.float64)) * (h_new - h)
    return h


def gru_states(inputs: Tensor, p: GruParams, h0: Tensor) -> list[Tensor]:
    """All hidden states of a GRU run (decoder side, no masking)."""
    H = p.hidden_size
    W, U_zr, U_h, b = _gru_weights(p)
    xw = inputs @ W + b
    h, states = h0, []
    for t in range(inputs.shape[0]):
        h = _gru_cell(xw[t], h, U_zr, U_h, H)
        states.append(h)
    return states


# ------------------------------------------------------------------------ batches

def pad_batch(seqs: Sequence[Sequence[int]], pad: int = PAD_ID) -> tuple[np.ndarray, np.ndarray]:
    """Pad id lists into time-major (T, B) ids and mask arrays."""
    if not seqs or any(len(s) == 0 for s in seqs):
        raise ValueError("cannot encode an empty sequence")
    T = max(len(s) for s in seqs)
    ids = np.full((T, len(seqs)), pad, dtype=np.int64)
    mask = np.zeros((T, len(seqs)), dtype=bool)
    for j, s in enumerate(seqs):
        ids[:len(s), j] = s
        mask[:len(s), j] = True
    return ids, mask


@dataclass
class Batch:
    """Encoded triples: every sequence already ends with EOS."""

    s1: list[list[int]]
    u: list[list[int]]
    s2: list[list[int]]
    exemplar: list[list[int]] | None = None
    keys: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.u)

    def subset(self, idx: Sequence[int]) -> "Batch":
        pick = lambda xs: [xs[i] for i in idx]  # noqa: E731
        return Batch(pick(self.s1), pick(self.u), pick(self.s2),
                     pick(self.exemplar) if self.exemplar is not None else None,
                     pick(self.keys) if self.keys else [])

    def target_tokens(self) -> int:
        return sum(len(s) for s in self.s2)


# ------------------------------------------------------------------ encoders/decoder

def _exemplar_gru(params: ParamSet) -> GruParams:
    return params.gru("exemplar_encoder") if "exemplar_encoder.W_z" in params else params.gru("encoder")


def encode_utterances(seqs: Sequence[Sequence[int]], params: ParamSet, gru: GruParams | None = None) -> Tensor:
    """Final encoder states (B, H) for a list of id sequences."""
    ids, mask = pad_batch(seqs)
    emb = ad.embedding_lookup(params["embedding"], ids)
    return run_gru(emb, gru or params.gru("encoder"), mask)


def encode_utterance(ids: Sequence[int], params: ParamSet, config: ModelConfig | None = None) -> Tensor:
    """Encode one utterance into a vector of size H."""
    if len(ids) == 0:
        raise ValueError("cannot encode an empty sequence")
    return encode_utterances([list(ids)], params)[0]


def encode_context(utterance_vectors: Sequence[Tensor], params: ParamSet,
                   config: ModelConfig | None = None) -> Tensor:
    """Run the context GRU over [s1, u] (HRED) or [s1, u, exemplar] (Exemplar-HRED)."""
    if config is not None:
        expected = 3 if config.uses_exemplar else 2
        if len(utterance_vectors) != expected:
            raise ValueError(f"{config.arch} expects {expected} context vectors, got {len(utterance_vectors)}")
    if not utterance_vectors:
        raise ValueError("empty context")
    seq = ad.stack([ad.as_tensor(v) for v in utterance_vectors], axis=0)
    if seq.value.ndim == 2:
        T, H = seq.shape
        return run_gru(ad.reshape(seq, (T, 1, H)), params.gru("context"))[0]
    return run_gru(seq, params.gru("context"))


def context_vector(batch: Batch, params: ParamSet, config: ModelConfig,
                   rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
    if config.uses_exemplar != (batch.exemplar is not None):
        raise ValueError(f"architecture {config.arch} {'requires' if config.uses_exemplar else 'does not take'} exemplars")
    B = len(batch)
    # s1 and u go through the encoder together as one 2B batch
    both = encode_utterances(batch.s1 + batch.u, params)
    vecs = [both[:B], both[B:]]
    if config.uses_exemplar:
        vecs.append(encode_utterances(batch.exemplar, params, _exemplar_gru(params)))
    vecs = [ad.dropout(v, config.dropout, rng, training) for v in vecs]
    return run_gru(ad.stack(vecs, axis=0), params.gru("context"))


def initial_decoder_state(ctx: Tensor, params: ParamSet) -> Tensor:
    return ad.tanh(ctx @ params["init.W"] + params["init.b"])


def forward_loss(batch: Batch, params: ParamSet, config: ModelConfig,
                 rng: np.random.Generator | None = None, training: bool = False) -> Tensor:
    """Teacher-forced mean token cross-entropy of the s2 targets."""
    if any(len(s) == 0 for s in batch.s2):
        raise ValueError("empty target sequence")
    ctx = context_vector(batch, params, config, rng, training)
    h0 = initial_decoder_state(ctx, params)
    targets, mask = pad_batch(batch.s2)
    inputs = np.vstack([np.full((1, len(batch)), SOS_ID, dtype=np.int64), targets[:-1]])
    emb = ad.dropout(ad.embedding_lookup(params["embedding"], inputs), config.dropout, rng, training)
    states = ad.stack(gru_states(emb, params.gru("decoder"), h0), axis=0)
    logits = states @ params["out.W"] + params["out.b"]
    return ad.softmax_cross_entropy(logits, targets, mask.astype(np.float64))


def decode_greedy(ctx: Tensor, params: ParamSet, config: ModelConfig,
                  max_len: int | None = None) -> list[list[int]]:
    """Greedy decoding from context vectors (B, H); returns ids without EOS."""
    max_len = config.max_decode_len if max_len is None else max_len
    ctx = ad.as_tensor(ctx)
    single = ctx.value.ndim == 1
    c = ctx.value[None, :] if single else ctx.value
    B = c.shape[0]
    h = np.tanh(c @ params["init.W"].value + params["init.b"].value)
    dec = params.gru("decoder")
    W = np.concatenate([dec.W_z.value, dec.W_r.value, dec.W_h.value], axis=1)
    b = np.concatenate([dec.b_z.value, dec.b_r.value, dec.b_h.value])
    U_zr = np.concatenate([dec.U_z.value, dec.U_r.value], axis=1)
    U_h = dec.U_h.value
    H = dec.hidden_size
    emb, W_out, b_out = params["embedding"].value, params["out.W"].value, params["out.b"].value
    prev = np.full(B, SOS_ID, dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    out: list[list[int]] = [[] for _ in range(B)]
    for _ in range(max_len):
        xw = emb[prev] @ W + b
        hu = h @ U_zr
        z = 0.5 * (1.0 + np.tanh(0.5 * (xw[:, :H] + hu[:, :H])))
        r = 0.5 * (1.0 + np.tanh(0.5 * (xw[:, H:2 * H] + hu[:, H:])))
        h_tilde = np.tanh(xw[:, 2 * H:] + (r * h) @ U_h)
        h = h + z * (h_tilde - h)
        prev = np.argmax(h @ W_out + b_out, axis=1)
        for j in np.flatnonzero(~done):
            if prev[j] == EOS_ID:
                done[j] = True
            else:
                out[j].append(int(prev[j]))
        if done.all():
            break
    return out[0] if single else out


def generate(batch: Batch, params: ParamSet, config: ModelConfig) -> list[list[int]]:
    ctx = context_vector(batch, params, config, training=False)
    return decode_greedy(ctx, params, config)
