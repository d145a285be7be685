"""Tokenization, vocabularies and word-vector tables."""

from __future__ import annotations

import hashlib
import json
import logging
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

PAD, SOS, EOS, UNK = "<pad>", "<sos>", "<eos>", "<unk>"
PAD_ID, SOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3
RESERVED = (PAD, SOS, EOS, UNK)

DEFAULT_MIN_COUNT = 3
DEFAULT_MAX_SIZE = 20000

# Words may carry inner hyphens, apostrophes, dots or colons so that
# placeholders (hotel-reference), times (05:51) and prices (23.60) stay whole.
_TOKEN_RE = re.compile(r"[^\W_]+(?:[-'.:/][^\W_]+)*|\S", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase ``text`` and split it into word and punctuation tokens."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: Iterable[str]) -> str:
    return " ".join(tokens)


class Vocabulary:
    """Bijective token/id mapping with fixed reserved ids 0..3."""

    def __init__(self, tokens: Sequence[str] = (), min_count: int = 1, max_size: int | None = None):
        self.itos: list[str] = list(RESERVED)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(RESERVED)}
        self.min_count = min_count
        self.max_size = max_size
        for tok in tokens:
            if tok in self.stoi:
                raise ValueError(f"duplicate vocabulary entry {tok!r}")
            self.stoi[tok] = len(self.itos)
            self.itos.append(tok)

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, token: str) -> int:
        return self.stoi.get(token, UNK_ID)

    def token(self, idx: int) -> str:
        if not 0 <= idx < len(self.itos):
            raise IndexError(f"token id {idx} out of range for vocabulary of size {len(self.itos)}")
        return self.itos[idx]

    def hash(self) -> str:
        payload = json.dumps(self.itos, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()

    def to_dict(self) -> dict:
        return {
            "min_count": self.min_count,
            "max_size": self.max_size,
            "tokens": self.itos[len(RESERVED):],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Vocabulary":
        return cls(data["tokens"], min_count=data.get("min_count", 1), max_size=data.get("max_size"))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), ensure_ascii=False, indent=1) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def count_tokens(token_lists: Iterable[Sequence[str]]) -> Counter:
    counts: Counter = Counter()
    for toks in token_lists:
        counts.update(toks)
    return counts


def vocab_from_counts(counts: Counter, min_count: int = DEFAULT_MIN_COUNT,
                      max_size: int | None = DEFAULT_MAX_SIZE) -> Vocabulary:
    """Keep tokens seen at least ``min_count`` times, most frequent first.

    ``max_size`` caps the number of non-reserved entries. Equal frequencies
    are broken lexicographically so the result does not depend on input order.
    """
    if not counts:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = [(tok, n) for tok, n in counts.items() if n >= min_count and tok not in RESERVED]
    kept.sort(key=lambda item: (-item[1], item[0]))
    if max_size is not None:
        kept = kept[:max_size]
    return Vocabulary([tok for tok, _ in kept], min_count=min_count, max_size=max_size)


def build_vocab(triples, min_count: int = DEFAULT_MIN_COUNT, max_size: int | None = DEFAULT_MAX_SIZE) -> Vocabulary:
    """Build a vocabulary from context triples.

    Each source utterance is counted once even though consecutive triples
    share utterances (the target of one window is the context of the next).
    """
    seen: dict[tuple[str, int], list[str]] = {}
    for tr in triples:
        for offset, utt in ((2, tr.s1), (1, tr.u), (0, tr.s2)):
            key = (tr.dialogue_id, tr.turn_index - offset)
            if key[1] >= 0:
                seen.setdefault(key, utt.tokens)
    return vocab_from_counts(count_tokens(seen.values()), min_count, max_size)


def encode(tokens: Sequence[str], vocab: Vocabulary) -> list[int]:
    """Map tokens to ids and append EOS."""
    return [vocab.id(t) for t in tokens] + [EOS_ID]


def decode(ids: Iterable[int], vocab: Vocabulary) -> list[str]:
    """Map ids back to tokens, stopping at the first EOS."""
    out = []
    for i in ids:
        tok = vocab.token(int(i))
        if tok == EOS:
            break
        out.append(tok)
    return out


@dataclass
class EmbeddingTable:
    """Word vectors aligned with a vocabulary.

    ``found[i]`` is True when row ``i`` came from the pretrained file; every
    other row holds the mean of all vectors in that file.
    """

    matrix: np.ndarray
    vocab: Vocabulary
    found: np.ndarray
    source: str = "pretrained"
    path: str | None = None
    report: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def lookup(self, tokens: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """Return (vectors, in_table mask) for ``tokens``."""
        ids = np.array([self.vocab.id(t) for t in tokens], dtype=np.int64)
        return self.matrix[ids], self.found[ids]


def _read_vectors(path: Path) -> tuple[list[str], np.ndarray]:
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise ValueError(f"cannot read embedding file {path}: {exc}") from exc
    lines = [ln for ln in lines if ln.strip()]
    if not lines:
        raise ValueError(f"embedding file {path} is empty")
    first = lines[0].split()
    if len(first) == 2 and all(p.isdigit() for p in first):
        lines = lines[1:]
    words: list[str] = []
    rows: list[list[float]] = []
    dim = None
    for lineno, line in enumerate(lines, start=1):
        parts = line.rstrip().split(" ")
        word, values = parts[0], parts[1:]
        if dim is None:
            dim = len(values)
            if dim == 0:
                raise ValueError(f"{path}: first entry has no vector components")
        if len(values) != dim:
            raise ValueError(f"{path}: entry {lineno} ({word!r}) has {len(values)} components, expected {dim}")
        try:
            rows.append([float(v) for v in values])
        except ValueError as exc:
            raise ValueError(f"{path}: entry {lineno} ({word!r}): {exc}") from exc
        words.append(word)
    mat = np.asarray(rows, dtype=np.float64)
    if not np.all(np.isfinite(mat)):
        raise ValueError(f"{path}: non-finite vector components")
    return words, mat


def load_embeddings(path: str | Path, vocab: Vocabulary) -> EmbeddingTable:
    path = Path(path)
    words, mat = _read_vectors(path)
    mean = mat.mean(axis=0)
    table = np.tile(mean, (len(vocab), 1))
    found = np.zeros(len(vocab), dtype=bool)
    for word, row in zip(words, mat):
        idx = vocab.stoi.get(word)
        if idx is not None and idx >= len(RESERVED) and not found[idx]:
            table[idx] = row
            found[idx] = True
    n_regular = len(vocab) - len(RESERVED)
    n_found = int(found.sum())
    missing = [t for t in vocab.itos[len(RESERVED):] if not found[vocab.stoi[t]]]
    report = {
        "path": str(path),
        "dim": int(mat.shape[1]),
        "file_entries": len(words),
        "vocab_size": len(vocab),
        "found": n_found,
        "missing": len(missing),
        "coverage": n_found / n_regular if n_regular else 0.0,
        "missing_tokens": missing[:50],
    }
    assert np.all(np.isfinite(table))
    logger.info("embeddings %s: dim=%d coverage=%.3f", path, mat.shape[1], report["coverage"])
    return EmbeddingTable(table, vocab, found, "pretrained", str(path), report)


def embedding_coverage(tokens: Iterable[str], table: EmbeddingTable) -> float:
    toks = list(tokens)
    if not toks:
        return math.nan
    return sum(bool(table.found[table.vocab.id(t)]) for t in toks) / len(toks)
