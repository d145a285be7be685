from .index import (
    APPROXIMATE,
    EXACT,
    AnnIndex,
    Candidate,
    CandidateSet,
    ExemplarRecord,
    IdfTable,
    IndexConfig,
    SparseVector,
    build_idf,
    build_index,
    build_index_from_vectors,
    load_index,
    query_knn,
    save_index,
    vectorize,
)
from .rerank import (
    FEATURE_NAMES,
    HEURISTIC_WEIGHTS,
    RerankerConfig,
    RerankerModel,
    RetrievalResources,
    bm25,
    exemplar_for,
    feature_vector,
    fit_pairwise,
    rerank,
    retrieve,
    train_reranker,
    weak_pairs,
)

__all__ = [
    "APPROXIMATE", "EXACT", "AnnIndex", "Candidate", "CandidateSet", "ExemplarRecord", "IdfTable",
    "IndexConfig", "SparseVector", "build_idf", "build_index", "build_index_from_vectors", "load_index",
    "query_knn", "save_index", "vectorize", "FEATURE_NAMES", "HEURISTIC_WEIGHTS", "RerankerConfig",
    "RerankerModel", "RetrievalResources", "bm25", "exemplar_for", "feature_vector", "fit_pairwise",
    "rerank", "retrieve", "train_reranker", "weak_pairs",
]
