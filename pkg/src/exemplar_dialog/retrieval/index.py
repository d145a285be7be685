"""TF-IDF vectors and a random-hyperplane LSH index over training user turns.

Cosine distance ``1 - cos(q, x)`` is the metric throughout. ``Exact`` mode
scans every record; ``Approximate`` mode gathers candidates from the LSH
buckets of the query (plus all buckets within ``probe_radius`` bit flips)
and ranks them by true distance.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .. import container
from ..errors import DataError

logger = logging.getLogger(__name__)

INDEX_VERSION = 1
EXACT = "exact"
APPROXIMATE = "approximate"


@dataclass(frozen=True)
class ExemplarRecord:
    record_id: int
    user_tokens: tuple[str, ...]
    response_tokens: tuple[str, ...]
    dialogue_id: str
    turn_index: int

    @property
    def user_text(self) -> str:
        return " ".join(self.user_tokens)

    @property
    def response_text(self) -> str:
        return " ".join(self.response_tokens)


@dataclass(frozen=True)
class SparseVector:
    indices: np.ndarray
    values: np.ndarray
    norm: float

    @property
    def empty(self) -> bool:
        return self.norm == 0.0

    def dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        out[self.indices] = self.values
        return out

    def dot(self, other: "SparseVector") -> float:
        common, ia, ib = np.intersect1d(self.indices, other.indices, assume_unique=True, return_indices=True)
        return float(np.dot(self.values[ia], other.values[ib])) if len(common) else 0.0

    def cosine(self, other: "SparseVector") -> float:
        if self.empty or other.empty:
            return 0.0
        if np.array_equal(self.indices, other.indices) and np.array_equal(self.values, other.values):
            return 1.0
        return min(1.0, max(-1.0, self.dot(other) / (self.norm * other.norm)))


class IdfTable:
    """Term dimensions and smoothed idf weights from the training user turns."""

    def __init__(self, terms: Sequence[str], df: Sequence[int], n_docs: int, avgdl: float):
        self.terms = list(terms)
        self.dim_of = {t: i for i, t in enumerate(self.terms)}
        self.df = np.asarray(df, dtype=np.int64)
        self.n_docs = int(n_docs)
        self.avgdl = float(avgdl)
        self.idf = np.log((1.0 + self.n_docs) / (1.0 + self.df)) + 1.0

    @property
    def dim(self) -> int:
        return len(self.terms)

    def bm25_idf(self, term: str) -> float:
        i = self.dim_of.get(term)
        df = int(self.df[i]) if i is not None else 0
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))

    def to_dict(self) -> dict:
        return {"terms": self.terms, "df": self.df.tolist(), "n_docs": self.n_docs, "avgdl": self.avgdl}

    @classmethod
    def from_dict(cls, data: dict) -> "IdfTable":
        return cls(data["terms"], data["df"], data["n_docs"], data["avgdl"])


def build_idf(docs: Iterable[Sequence[str]]) -> IdfTable:
    df: Counter = Counter()
    n, total_len = 0, 0
    for doc in docs:
        df.update(set(doc))
        n += 1
        total_len += len(doc)
    if n == 0:
        raise DataError("cannot build idf statistics from an empty training set")
    terms = sorted(df)
    return IdfTable(terms, [df[t] for t in terms], n, total_len / n)


def vectorize(tokens: Sequence[str], idf: IdfTable) -> SparseVector:
    """L2-normalised TF-IDF vector; unknown tokens are dropped.

    An utterance with no known token gives the zero vector (``empty``).
    """
    counts = Counter(idf.dim_of[t] for t in tokens if t in idf.dim_of)
    if not counts:
        return SparseVector(np.zeros(0, dtype=np.int64), np.zeros(0), 0.0)
    idx = np.array(sorted(counts), dtype=np.int64)
    w = np.array([counts[i] for i in idx], dtype=np.float64) * idf.idf[idx]
    w /= np.linalg.norm(w)
    return SparseVector(idx, w, 1.0)


@dataclass
class Candidate:
    record: ExemplarRecord
    distance: float
    score: float | None = None
    features: list[float] | None = None


@dataclass
class CandidateSet:
    query_tokens: tuple[str, ...]
    candidates: list[Candidate] = field(default_factory=list)
    exclude_dialogue: str | None = None

    def __len__(self) -> int:
        return len(self.candidates)

    def __iter__(self):
        return iter(self.candidates)

    def record_ids(self) -> list[int]:
        return [c.record.record_id for c in self.candidates]


@dataclass
class IndexConfig:
    mode: str = APPROXIMATE
    tables: int = 16
    bits: int = 12
    probe_radius: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.mode not in (EXACT, APPROXIMATE):
            raise ValueError(f"unknown index mode {self.mode!r}")
        if not 1 <= self.bits <= 62:
            raise ValueError("bits must be in [1, 62]")


class AnnIndex:
    def __init__(self, records: Sequence[ExemplarRecord], matrix: sp.csr_matrix, idf: IdfTable | None,
                 config: IndexConfig, signatures: np.ndarray | None = None):
        if len(records) == 0:
            raise DataError("cannot build an index without records")
        if matrix.shape[0] != len(records):
            raise ValueError("matrix rows must match records")
        self.records = list(records)
        self.matrix = matrix.tocsr()
        self.idf = idf
        self.config = config
        self.dialogue_ids = np.array([r.dialogue_id for r in self.records], dtype=object)
        self.planes = self._hyperplanes()
        self.signatures = self._signatures(self.matrix) if signatures is None else np.asarray(signatures, dtype=np.int64)
        self._buckets = self._build_buckets()

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return len(self.records)

    def _hyperplanes(self) -> np.ndarray:
        rng = np.random.default_rng(self.config.seed)
        return rng.standard_normal((self.dim, self.config.tables * self.config.bits))

    def _keys(self, proj: np.ndarray) -> np.ndarray:
        L, b = self.config.tables, self.config.bits
        bits = (proj >= 0).reshape(proj.shape[0], L, b).astype(np.int64)
        return (bits << np.arange(b, dtype=np.int64)).sum(axis=2)

    def _signatures(self, rows: sp.csr_matrix) -> np.ndarray:
        return self._keys(np.asarray(rows @ self.planes))

    def _build_buckets(self) -> list[dict[int, np.ndarray]]:
        tables = []
        for t in range(self.config.tables):
            col = self.signatures[:, t]
            order = np.argsort(col, kind="stable")
            keys, starts = np.unique(col[order], return_index=True)
            ends = list(starts[1:]) + [len(order)]
            tables.append({int(k): order[s:e] for k, s, e in zip(keys, starts, ends)})
        return tables

    def _probe_masks(self) -> list[int]:
        masks = [0]
        for r in range(1, self.config.probe_radius + 1):
            for bits in itertools.combinations(range(self.config.bits), r):
                masks.append(sum(1 << b for b in bits))
        return masks

    def query_dense(self, q: SparseVector) -> np.ndarray:
        out = np.zeros(self.dim)
        out[q.indices] = q.values
        return out

    def candidates_lsh(self, q: SparseVector) -> np.ndarray:
        proj = self.query_dense(q) @ self.planes
        keys = self._keys(proj[None, :])[0]
        found = []
        masks = self._probe_masks()
        for t, key in enumerate(keys):
            bucket = self._buckets[t]
            for m in masks:
                hit = bucket.get(int(key) ^ m)
                if hit is not None:
                    found.append(hit)
        if not found:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(found))


def build_index_from_vectors(vectors: Sequence[SparseVector] | sp.csr_matrix, dim: int | None,
                             records: Sequence[ExemplarRecord], config: IndexConfig,
                             idf: IdfTable | None = None) -> AnnIndex:
    if sp.issparse(vectors):
        matrix = vectors.tocsr().astype(np.float64)
    else:
        indptr = np.cumsum([0] + [len(v.indices) for v in vectors])
        indices = np.concatenate([v.indices for v in vectors]) if vectors else np.zeros(0, dtype=np.int64)
        data = np.concatenate([v.values for v in vectors]) if vectors else np.zeros(0)
        matrix = sp.csr_matrix((data, indices, indptr), shape=(len(vectors), dim))
    return AnnIndex(records, matrix, idf, config)


def build_index(triples, config: IndexConfig | None = None) -> AnnIndex:
    """Index every training triple's user turn, keyed to its system response."""
    config = config or IndexConfig()
    triples = list(triples)
    if not triples:
        raise DataError("cannot build an index from an empty training set")
    records = [ExemplarRecord(i, tuple(tr.u.tokens), tuple(tr.s2.tokens), tr.dialogue_id, tr.turn_index)
               for i, tr in enumerate(triples)]
    idf = build_idf(r.user_tokens for r in records)
    vectors = [vectorize(r.user_tokens, idf) for r in records]
    index = build_index_from_vectors(vectors, idf.dim, records, config, idf)
    logger.info("index: %d records, %d dims, mode=%s", len(index), idf.dim, config.mode)
    return index


def query_knn(index: AnnIndex, query_vector: SparseVector, k: int = 10, exclude_dialogue: str | None = None,
              mode: str | None = None, query_tokens: Sequence[str] = ()) -> CandidateSet:
    """The ``k`` closest records by cosine distance, ties broken by record id.

    Records from ``exclude_dialogue`` are never returned. Asking for more
    than the index holds returns everything that is eligible.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    mode = mode or index.config.mode
    if mode == EXACT:
        ids = np.arange(len(index))
    else:
        ids = index.candidates_lsh(query_vector)
    if exclude_dialogue is not None and len(ids):
        ids = ids[index.dialogue_ids[ids] != exclude_dialogue]
    result = CandidateSet(tuple(query_tokens), [], exclude_dialogue)
    if len(ids) == 0:
        return result
    if query_vector.empty:
        sims = np.zeros(len(ids))
    else:
        sims = index.matrix[ids] @ index.query_dense(query_vector)
    dist = np.maximum(0.0, 1.0 - sims)
    order = np.lexsort((ids, dist))[:k]
    result.candidates = [Candidate(index.records[ids[j]], float(dist[j])) for j in order]
    return result


# -------------------------------------------------------------------- persistence

def save_index(index: AnnIndex, path: str | Path) -> None:
    m = index.matrix
    header = {
        "format": "exemplar-dialog-index",
        "version": INDEX_VERSION,
        "config": {"mode": index.config.mode, "tables": index.config.tables, "bits": index.config.bits,
                   "probe_radius": index.config.probe_radius, "seed": index.config.seed},
        "hyperplanes": {"distribution": "standard_normal", "rng": "numpy.default_rng", "shape": list(index.planes.shape)},
        "dim": index.dim,
        "idf": index.idf.to_dict() if index.idf is not None else None,
        "records": [[list(r.user_tokens), list(r.response_tokens), r.dialogue_id, r.turn_index] for r in index.records],
    }
    arrays = {"indptr": m.indptr, "indices": m.indices, "data": m.data, "signatures": index.signatures}
    container.save(path, "index", header, arrays)


def load_index(path: str | Path) -> AnnIndex:
    header, arrays = container.load(path, "index")
    if header.get("version") != INDEX_VERSION:
        raise DataError(f"{path}: unsupported index version {header.get('version')!r}")
    records = [ExemplarRecord(i, tuple(u), tuple(s), d, int(t)) for i, (u, s, d, t) in enumerate(header["records"])]
    matrix = sp.csr_matrix((arrays["data"], arrays["indices"], arrays["indptr"]), shape=(len(records), header["dim"]))
    idf = IdfTable.from_dict(header["idf"]) if header["idf"] is not None else None
    return AnnIndex(records, matrix, idf, IndexConfig(**header["config"]), arrays["signatures"])
