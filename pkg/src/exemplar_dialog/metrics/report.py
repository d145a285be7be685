"""EvalReport: all six generation metrics for one run, plus table rendering."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

from ..corpus import Database, GoalSpec, Ontology
from ..errors import DataError
from ..text import EmbeddingTable
from .bleu import bleu_stats
from .embedding import avg_embedding_similarity, greedy_matching, vector_extrema_similarity
from .success import CONVENTION_VERSION, group_by_dialogue, inform_request

# Published numbers for the two architectures (BLEU and greedy matching on a x100 scale).
PUBLISHED_TARGETS = {
    "hred": {"bleu": 23.6, "vector_extrema": 0.59, "avg_embedding": 0.93, "greedy_matching": 23.1,
             "inform": 60.4, "request": 44.5},
    "exemplar": {"bleu": 24.1, "vector_extrema": 0.65, "avg_embedding": 0.95, "greedy_matching": 23.9,
                 "inform": 77.6, "request": 70.1},
}

METRIC_ROWS = [
    ("bleu", "BLEU"),
    ("vector_extrema", "Vector Extrema"),
    ("avg_embedding", "Average Embedding Similarity"),
    ("greedy_matching", "Greedy Matching"),
    ("inform", "Inform"),
    ("request", "Request"),
]

MAX_SKIP_FRACTION = 0.01


@dataclass(frozen=True)
class EvalPair:
    reference: tuple[str, ...]
    hypothesis: tuple[str, ...]
    dialogue_id: str = ""
    turn_index: int = 0

    def __post_init__(self):
        if len(self.reference) == 0:
            raise ValueError("reference must be non-empty")


@dataclass
class EvalReport:
    bleu: float
    avg_embedding: float
    vector_extrema: float
    greedy_matching: float
    inform: float
    request: float
    pairs: int
    skipped_pairs: int
    fingerprint: str
    tool_version: str
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data: Mapping) -> "EvalReport":
        return cls(**data)

    def validate(self) -> None:
        for name in ("avg_embedding", "vector_extrema", "greedy_matching"):
            if not -1.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [-1, 1]")
        if not 0.0 <= self.bleu <= 1.0:
            raise ValueError("bleu outside [0, 1]")
        for name in ("inform", "request"):
            if not 0.0 <= getattr(self, name) <= 100.0:
                raise ValueError(f"{name} outside [0, 100]")


def pairs_from_rows(rows: Sequence[Mapping]) -> list[EvalPair]:
    def toks(x):
        return tuple(x.split()) if isinstance(x, str) else tuple(x)
    return [EvalPair(toks(r["gold"]), toks(r["hypothesis"]), r["dialogue_id"], int(r["turn_index"])) for r in rows]


def _mean(values: list[float]) -> float:
    return math.fsum(values) / len(values) if values else 0.0


def evaluate(rows: Sequence[Mapping], emb: EmbeddingTable, goals: Mapping[str, GoalSpec | None],
             db: Database, ont: Ontology, settings: Mapping | None = None,
             max_skip_fraction: float = MAX_SKIP_FRACTION) -> EvalReport:
    """Compute every metric over generation rows ({dialogue_id, turn_index, gold, hypothesis})."""
    from .. import __version__

    pairs = pairs_from_rows(rows)
    if not pairs:
        raise DataError("no generations to evaluate")
    stats = bleu_stats([(p.reference, p.hypothesis) for p in pairs])
    avg, ext, greedy = [], [], []
    skipped = 0
    for p in pairs:
        a = avg_embedding_similarity(p.reference, p.hypothesis, emb)
        if a is None:
            skipped += 1
            continue
        avg.append(a)
        ext.append(vector_extrema_similarity(p.reference, p.hypothesis, emb))
        greedy.append(greedy_matching(p.reference, p.hypothesis, emb))
    if skipped > max_skip_fraction * len(pairs):
        raise DataError(f"{skipped} of {len(pairs)} pairs have no in-table tokens on one side "
                        f"(limit {max_skip_fraction:.0%}); check the embedding file")
    ir = inform_request(group_by_dialogue(rows), goals, db, ont)
    fp_source = {
        "settings": dict(settings or {}),
        "embeddings": emb.path,
        "embedding_dim": emb.dim,
        "bleu": "corpus, max_n=4, add-one smoothing for n>=2",
        "inform_request": CONVENTION_VERSION,
    }
    fingerprint = hashlib.sha256(json.dumps(fp_source, sort_keys=True).encode()).hexdigest()[:16]
    report = EvalReport(
        bleu=stats.score,
        avg_embedding=_mean(avg),
        vector_extrema=_mean(ext),
        greedy_matching=_mean(greedy),
        inform=ir.inform,
        request=ir.request,
        pairs=len(pairs),
        skipped_pairs=skipped,
        fingerprint=fingerprint,
        tool_version=__version__,
        details={
            "bleu_precisions": stats.precisions,
            "brevity_penalty": stats.brevity_penalty,
            "embeddings": emb.path,
            "fingerprint_source": fp_source,
            "inform_dialogues": ir.inform_dialogues,
            "inform_successes": ir.inform_successes,
            "excluded_no_goal": ir.excluded_no_goal,
            "excluded_no_inform_domain": ir.excluded_no_inform_domain,
            "requested_slots": ir.requested_slots,
            "requested_hits": ir.requested_hits,
        },
    )
    report.validate()
    return report


def display_value(metric: str, value: float) -> str:
    """Format like the published tables: BLEU and greedy x100, cosines as .xx."""
    if metric in ("bleu", "greedy_matching"):
        return f"{100.0 * value:.1f}"
    if metric in ("inform", "request"):
        return f"{value:.1f}"
    return f"{value:.2f}"


def render_table(reports: Mapping[str, EvalReport], targets: Mapping[str, Mapping[str, float]] | None = None) -> str:
    """Aligned text table, one column per run, with published values alongside."""
    targets = PUBLISHED_TARGETS if targets is None else targets
    header = ["Metric"]
    for name in reports:
        header.append(name)
        if name in targets:
            header.append(f"{name} (published)")
    rows = [header]
    for key, label in METRIC_ROWS:
        row = [label]
        for name, rep in reports.items():
            row.append(display_value(key, getattr(rep, key)))
            if name in targets:
                t = targets[name][key]
                row.append(f"{t:.1f}" if key not in ("vector_extrema", "avg_embedding") else f"{t:.2f}")
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
    lines = []
    for j, r in enumerate(rows):
        lines.append(" | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths))))
        if j == 0:
            lines.append("-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
