from .bleu import bleu, bleu_stats, ngram_counts, sentence_bleu
from .embedding import avg_embedding_similarity, cosine, greedy_matching, vector_extrema_similarity
from .report import PUBLISHED_TARGETS, EvalPair, EvalReport, evaluate, render_table
from .success import InformRequestResult, group_by_dialogue, inform_request

__all__ = [
    "bleu", "bleu_stats", "ngram_counts", "sentence_bleu", "avg_embedding_similarity", "cosine",
    "greedy_matching", "vector_extrema_similarity", "PUBLISHED_TARGETS", "EvalPair", "EvalReport", "evaluate",
    "render_table", "InformRequestResult", "group_by_dialogue", "inform_request",
]
