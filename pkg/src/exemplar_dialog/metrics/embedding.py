"""Word-embedding similarity metrics between a reference and a hypothesis.

Each function returns ``None`` when either side has no token found in the
pretrained table; callers count those pairs as skipped.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..text import EmbeddingTable


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity; 0 for a zero vector, exactly 1 for identical vectors."""
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    if np.array_equal(a, b):
        return 1.0
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _side(tokens: Sequence[str], emb: EmbeddingTable) -> np.ndarray | None:
    if len(tokens) == 0:
        return None
    vecs, found = emb.lookup(tokens)
    return vecs if found.any() else None


def average_vector(vecs: np.ndarray) -> np.ndarray:
    return vecs.mean(axis=0)


def extrema_vector(vecs: np.ndarray) -> np.ndarray:
    """Per dimension, the component with the largest magnitude (sign kept)."""
    pick = np.argmax(np.abs(vecs), axis=0)
    return vecs[pick, np.arange(vecs.shape[1])]


def avg_embedding_similarity(reference: Sequence[str], hypothesis: Sequence[str], emb: EmbeddingTable) -> float | None:
    a, b = _side(reference, emb), _side(hypothesis, emb)
    if a is None or b is None:
        return None
    return cosine(average_vector(a), average_vector(b))


def vector_extrema_similarity(reference: Sequence[str], hypothesis: Sequence[str], emb: EmbeddingTable) -> float | None:
    a, b = _side(reference, emb), _side(hypothesis, emb)
    if a is None or b is None:
        return None
    return cosine(extrema_vector(a), extrema_vector(b))


def _directed_greedy(src_tokens, src, dst_tokens, dst) -> float:
    sn = np.linalg.norm(src, axis=1)
    dn = np.linalg.norm(dst, axis=1)
    denom = np.outer(sn, dn)
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, (src @ dst.T) / denom, 0.0)
    sims = np.clip(sims, -1.0, 1.0)
    same = np.array([[s == d for d in dst_tokens] for s in src_tokens])
    sims[same & (denom > 0)] = 1.0
    return float(sims.max(axis=1).mean())


def greedy_matching(reference: Sequence[str], hypothesis: Sequence[str], emb: EmbeddingTable) -> float | None:
    """Mean best-match cosine from each side to the other, averaged over both directions."""
    a, b = _side(reference, emb), _side(hypothesis, emb)
    if a is None or b is None:
        return None
    return (_directed_greedy(reference, a, hypothesis, b) + _directed_greedy(hypothesis, b, reference, a)) / 2.0
