"""Corpus BLEU with clipped n-gram precision and a brevity penalty.

Smoothing: when a corpus-level n-gram order n >= 2 has no matches, its
precision becomes 1 / (count + 1) (add-one on numerator and denominator).
Zero unigram matches give a score of 0.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence


def ngram_counts(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


@dataclass
class BleuStats:
    score: float
    precisions: list[float]
    matches: list[int]
    totals: list[int]
    brevity_penalty: float
    ref_len: int
    hyp_len: int


def bleu_stats(pairs: Iterable[tuple[Sequence[str], Sequence[str]]], max_n: int = 4) -> BleuStats:
    """Corpus statistics for (reference, hypothesis) token pairs."""
    matches = [0] * max_n
    totals = [0] * max_n
    ref_len = hyp_len = 0
    n_pairs = 0
    for ref, hyp in pairs:
        n_pairs += 1
        ref_len += len(ref)
        hyp_len += len(hyp)
        for n in range(1, max_n + 1):
            hyp_ngrams = ngram_counts(hyp, n)
            ref_ngrams = ngram_counts(ref, n)
            matches[n - 1] += sum(min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items())
            totals[n - 1] += sum(hyp_ngrams.values())
    if n_pairs == 0:
        raise ValueError("BLEU needs at least one hypothesis")

    precisions = []
    for n in range(1, max_n + 1):
        m, t = matches[n - 1], totals[n - 1]
        if m > 0:
            precisions.append(m / t)
        elif n == 1:
            precisions.append(0.0)
        else:
            precisions.append(1.0 / (t + 1))
    if hyp_len == 0:
        bp = 0.0
    elif hyp_len < ref_len:
        bp = math.exp(1.0 - ref_len / hyp_len)
    else:
        bp = 1.0
    if precisions[0] == 0.0 or bp == 0.0:
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / max_n)
    return BleuStats(score, precisions, matches, totals, bp, ref_len, hyp_len)


def bleu(pairs, max_n: int = 4) -> float:
    """Corpus BLEU in [0, 1]. ``pairs`` holds (reference, hypothesis) token lists
    or objects with ``reference``/``hypothesis`` attributes."""
    return bleu_stats(_as_tuples(pairs), max_n).score


def sentence_bleu(reference: Sequence[str], hypothesis: Sequence[str], max_n: int = 4) -> float:
    return bleu_stats([(reference, hypothesis)], max_n).score


def _as_tuples(pairs):
    for p in pairs:
        if hasattr(p, "reference"):
            yield p.reference, p.hypothesis
        else:
            yield p
