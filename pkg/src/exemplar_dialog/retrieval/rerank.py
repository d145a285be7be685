"""Feed-forward reranking of retrieved neighbours and exemplar selection.

Five textual-similarity features are scored either by a fixed weighted sum
or by a one-hidden-layer MLP trained with a pairwise hinge loss on weakly
labelled pairs (best vs. worst candidate response by BLEU-2 against the
gold response).
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .. import autodiff as ad
from ..container import atomic_write_text
from ..errors import DataError
from ..metrics.bleu import sentence_bleu
from ..metrics.embedding import avg_embedding_similarity
from ..text import EmbeddingTable
from .index import APPROXIMATE, EXACT, AnnIndex, Candidate, CandidateSet, IdfTable, query_knn, vectorize

logger = logging.getLogger(__name__)

FEATURE_NAMES = ("tfidf_cosine", "token_jaccard", "bm25", "length_ratio", "avg_embedding_cosine")
HEURISTIC_WEIGHTS = (0.4, 0.2, 0.2, 0.1, 0.1)
DEFAULT_K = 10


@dataclass
class RetrievalResources:
    idf: IdfTable
    emb: EmbeddingTable | None = None
    k1: float = 1.5
    b: float = 0.75


def bm25(query: Sequence[str], doc: Sequence[str], idf: IdfTable, k1: float = 1.5, b: float = 0.75) -> float:
    if not doc:
        return 0.0
    tf = Counter(doc)
    norm = k1 * (1.0 - b + b * len(doc) / max(idf.avgdl, 1e-9))
    score = 0.0
    for term in set(query):
        f = tf.get(term, 0)
        if f:
            score += idf.bm25_idf(term) * f * (k1 + 1.0) / (f + norm)
    return score


def feature_vector(query: Sequence[str], candidate, resources: RetrievalResources) -> list[float]:
    """[tfidf_cosine, token_jaccard, bm25, length_ratio, avg_embedding_cosine].

    Ranges: cosine and Jaccard in [0, 1], BM25 >= 0, length ratio (shorter /
    longer) in [0, 1], embedding cosine in [-1, 1] (0 without a table).
    """
    cand = candidate.user_tokens if hasattr(candidate, "user_tokens") else tuple(candidate)
    q_vec, c_vec = vectorize(query, resources.idf), vectorize(cand, resources.idf)
    qs, cs = set(query), set(cand)
    union = qs | cs
    jaccard = len(qs & cs) / len(union) if union else 0.0
    longest = max(len(query), len(cand))
    ratio = min(len(query), len(cand)) / longest if longest else 0.0
    emb_cos = 0.0
    if resources.emb is not None:
        emb_cos = avg_embedding_similarity(query, cand, resources.emb) or 0.0
    return [q_vec.cosine(c_vec), jaccard, bm25(query, cand, resources.idf, resources.k1, resources.b), ratio, emb_cos]


@dataclass
class RerankerModel:
    kind: str = "heuristic"
    feature_names: tuple[str, ...] = FEATURE_NAMES
    weights: list[float] = field(default_factory=lambda: list(HEURISTIC_WEIGHTS))
    mlp: dict | None = None
    report: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.feature_names)
        if self.kind == "heuristic" and len(self.weights) != n:
            raise ValueError(f"{len(self.weights)} weights for {n} features")
        if self.kind == "mlp" and np.asarray(self.mlp["W1"]).shape[0] != n:
            raise ValueError("MLP input width does not match the feature count")

    @classmethod
    def heuristic(cls, weights: Sequence[float] = HEURISTIC_WEIGHTS) -> "RerankerModel":
        return cls("heuristic", FEATURE_NAMES, list(weights))

    def score(self, features) -> np.ndarray:
        x = np.atleast_2d(np.asarray(features, dtype=np.float64))
        if self.kind == "heuristic":
            return x @ np.asarray(self.weights)
        m = self.mlp
        z = (x - np.asarray(m["mean"])) / np.asarray(m["std"])
        hidden = np.tanh(z @ np.asarray(m["W1"]) + np.asarray(m["b1"]))
        return (hidden @ np.asarray(m["w2"]) + m["b2"]).reshape(-1)

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | Path) -> "RerankerModel":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data["feature_names"] = tuple(data["feature_names"])
        return cls(**data)


def rerank(candidates: CandidateSet, model: RerankerModel, resources: RetrievalResources | None = None) -> CandidateSet:
    """Order candidates by descending model score; ties keep the distance order."""
    scored = []
    for pos, c in enumerate(candidates.candidates):
        if c.features is None:
            if resources is None:
                raise ValueError("rerank needs resources to compute features")
            c = Candidate(c.record, c.distance, None, feature_vector(candidates.query_tokens, c.record, resources))
        scored.append((pos, c))
    if scored:
        scores = model.score([c.features for _, c in scored])
        scored = [(pos, Candidate(c.record, c.distance, float(s), c.features)) for (pos, c), s in zip(scored, scores)]
    scored.sort(key=lambda item: (-item[1].score, item[1].distance, item[0]))
    return CandidateSet(candidates.query_tokens, [c for _, c in scored], candidates.exclude_dialogue)


def retrieve(query: Sequence[str], index: AnnIndex, resources: RetrievalResources,
             exclude_dialogue: str | None = None, k: int = DEFAULT_K) -> CandidateSet:
    q = vectorize(query, resources.idf)
    cands = query_knn(index, q, k, exclude_dialogue, query_tokens=query)
    if len(cands) == 0 and index.config.mode == APPROXIMATE:
        # empty LSH probe: fall back to a full scan rather than returning nothing
        cands = query_knn(index, q, k, exclude_dialogue, mode=EXACT, query_tokens=query)
    return cands


def exemplar_for(query: Sequence[str], index: AnnIndex, reranker: RerankerModel, resources: RetrievalResources,
                 exclude_dialogue: str | None = None, k: int = DEFAULT_K) -> Candidate | None:
    """Top reranked neighbour among the ``k`` nearest; ``None`` if nothing is eligible."""
    if index is None or len(index) == 0:
        raise DataError("exemplar retrieval needs a non-empty index")
    ranked = rerank(retrieve(query, index, resources, exclude_dialogue, k), reranker, resources)
    return ranked.candidates[0] if len(ranked) else None


# ------------------------------------------------------------------------ training

@dataclass
class RerankerConfig:
    hidden: int = 16
    epochs: int = 200
    patience: int = 10
    learning_rate: float = 0.01
    batch_size: int = 64
    heldout_fraction: float = 0.1
    max_queries: int = 2000
    min_pairs: int = 20
    margin: float = 1.0
    seed: int = 0


def _hinge(pos: ad.Tensor, neg: ad.Tensor, margin: float) -> ad.Tensor:
    return ad.mean(ad.relu(margin - (pos - neg)))


def fit_pairwise(pos_features, neg_features, config: RerankerConfig | None = None) -> RerankerModel:
    """Train the MLP so that each positive outscores its paired negative."""
    from ..training import AdamState, TrainConfig, adam_step

    config = config or RerankerConfig()
    pos = np.asarray(pos_features, dtype=np.float64)
    neg = np.asarray(neg_features, dtype=np.float64)
    if len(pos) != len(neg):
        raise ValueError("positive and negative feature lists differ in length")
    if len(pos) < config.min_pairs:
        raise DataError(f"only {len(pos)} training pairs for the reranker (minimum {config.min_pairs})")
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(pos))
    n_held = max(1, int(round(config.heldout_fraction * len(pos))))
    held, fit = order[:n_held], order[n_held:]
    both = np.vstack([pos[fit], neg[fit]])
    mean = both.mean(axis=0)
    std = both.std(axis=0)
    std[std < 1e-12] = 1.0
    zp, zn = (pos - mean) / std, (neg - mean) / std

    n_feat = pos.shape[1]
    params = [
        ad.Tensor(rng.uniform(-0.5, 0.5, (n_feat, config.hidden)), requires_grad=True, name="W1"),
        ad.Tensor(np.zeros(config.hidden), requires_grad=True, name="b1"),
        ad.Tensor(rng.uniform(-0.5, 0.5, (config.hidden, 1)), requires_grad=True, name="w2"),
        ad.Tensor(np.zeros(1), requires_grad=True, name="b2"),
    ]
    W1, b1, w2, b2 = params

    def forward(x):
        return ad.tanh(x @ W1 + b1) @ w2 + b2

    def heldout_loss():
        return _hinge(forward(ad.Tensor(zp[held])), forward(ad.Tensor(zn[held])), config.margin).item()

    opt_cfg = TrainConfig(learning_rate=config.learning_rate, max_epochs=config.epochs,
                          patience=min(config.patience, config.epochs - 1), batch_size=config.batch_size,
                          seed=config.seed)
    state = AdamState.zeros(params)
    best_loss, best_values, best_epoch, bad = math.inf, None, 0, 0
    curve = []
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(fit)
        for start in range(0, len(perm), config.batch_size):
            idx = perm[start:start + config.batch_size]
            ad.zero_grad(params)
            loss = _hinge(forward(ad.Tensor(zp[idx])), forward(ad.Tensor(zn[idx])), config.margin)
            ad.backward(loss)
            adam_step(params, state, opt_cfg)
        h = heldout_loss()
        curve.append(h)
        if h < best_loss - 1e-12:
            best_loss, best_epoch, bad = h, epoch, 0
            best_values = [p.value.copy() for p in params]
        else:
            bad += 1
            if bad >= config.patience:
                break
    for p, v in zip(params, best_values):
        p.value = v

    model = RerankerModel("mlp", FEATURE_NAMES[:n_feat] if n_feat <= len(FEATURE_NAMES) else
                          tuple(f"f{i}" for i in range(n_feat)), [], {
        "mean": mean.tolist(), "std": std.tolist(), "W1": W1.value.tolist(), "b1": b1.value.tolist(),
        "w2": w2.value.tolist(), "b2": float(b2.value[0]),
    })

    def accuracy(idx):
        return float(np.mean(model.score(pos[idx]) > model.score(neg[idx]))) if len(idx) else math.nan

    model.report = {
        "pairs": int(len(pos)), "fit_pairs": int(len(fit)), "heldout_pairs": int(len(held)),
        "epochs_run": len(curve), "best_epoch": best_epoch, "heldout_loss_curve": curve,
        "fit_accuracy": accuracy(fit), "heldout_accuracy": accuracy(held),
    }
    return model


def weak_pairs(triples, index: AnnIndex, resources: RetrievalResources, config: RerankerConfig,
               k: int = DEFAULT_K) -> tuple[np.ndarray, np.ndarray, dict]:
    """Best/worst candidate features per training query, judged by BLEU-2 against gold."""
    triples = list(triples)
    rng = np.random.default_rng(config.seed)
    chosen = np.arange(len(triples))
    if len(triples) > config.max_queries:
        chosen = np.sort(rng.choice(len(triples), config.max_queries, replace=False))
    pos, neg = [], []
    skipped = 0
    for i in chosen:
        tr = triples[i]
        query = tuple(tr.u.tokens)
        cands = retrieve(query, index, resources, tr.dialogue_id, k)
        if len(cands) < 2:
            skipped += 1
            continue
        gains = [sentence_bleu(tr.s2.tokens, c.record.response_tokens, max_n=2) for c in cands]
        if max(gains) == min(gains):
            skipped += 1
            continue
        best, worst = int(np.argmax(gains)), int(np.argmin(gains))
        pos.append(feature_vector(query, cands.candidates[best].record, resources))
        neg.append(feature_vector(query, cands.candidates[worst].record, resources))
    stats = {"queries": int(len(chosen)), "pairs": len(pos), "skipped_queries": skipped}
    return np.asarray(pos).reshape(-1, len(FEATURE_NAMES)), np.asarray(neg).reshape(-1, len(FEATURE_NAMES)), stats


def train_reranker(triples, index: AnnIndex, resources: RetrievalResources,
                   config: RerankerConfig | None = None) -> RerankerModel:
    config = config or RerankerConfig()
    pos, neg, stats = weak_pairs(triples, index, resources, config)
    logger.info("reranker: %d weakly labelled pairs from %d queries", stats["pairs"], stats["queries"])
    model = fit_pairwise(pos, neg, config)
    model.report.update(stats)
    return model
