import math
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

import oracles
from exemplar_dialog.corpus import ContextTriple, Speaker, Utterance
from exemplar_dialog.errors import DataError
from exemplar_dialog.retrieval import (
    FEATURE_NAMES,
    HEURISTIC_WEIGHTS,
    CandidateSet,
    ExemplarRecord,
    IndexConfig,
    RerankerConfig,
    RerankerModel,
    RetrievalResources,
    bm25,
    build_idf,
    build_index,
    build_index_from_vectors,
    exemplar_for,
    feature_vector,
    fit_pairwise,
    load_index,
    query_knn,
    rerank,
    save_index,
    vectorize,
)
from exemplar_dialog.retrieval.index import Candidate, SparseVector
from exemplar_dialog.text import tokenize


def triple(user, response, did, turn=1):
    return ContextTriple(Utterance.make(Speaker.SYSTEM, "hello"), Utterance.make(Speaker.USER, user),
                         Utterance.make(Speaker.SYSTEM, response), did, turn)


CORPUS = [
    triple("i need a cheap hotel in the north", "the acorn is cheap and in the north", "d1"),
    triple("i want an expensive restaurant", "the golden wok is expensive", "d2"),
    triple("find me a train to ely", "tr1234 goes to ely", "d3"),
    triple("i need a cheap hotel", "how about the alpha", "d4"),
    triple("book a taxi please", "your taxi is booked", "d5"),
]


def test_idf_and_tfidf_vectors():
    idf = build_idf([["a", "b"], ["a"], ["c"]])
    assert idf.terms == ["a", "b", "c"]
    assert idf.idf[0] == pytest.approx(math.log(4 / 3) + 1)
    assert idf.idf[1] == pytest.approx(math.log(4 / 2) + 1)
    v = vectorize(["a", "a", "b", "zzz"], idf)
    assert v.norm == 1.0 and np.linalg.norm(v.values) == pytest.approx(1.0)
    w = np.array([2 * idf.idf[0], idf.idf[1]])
    assert np.allclose(v.values, w / np.linalg.norm(w))
    assert vectorize(["zzz"], idf).empty


def test_exact_search_excludes_same_dialogue_and_orders_by_distance():
    index = build_index(CORPUS, IndexConfig(mode="exact"))
    q = vectorize(tokenize("i need a cheap hotel in the north"), index.idf)
    got = query_knn(index, q, k=3)
    assert got.record_ids()[0] == 0 and got.candidates[0].distance == pytest.approx(0.0, abs=1e-12)
    got = query_knn(index, q, k=3, exclude_dialogue="d1")
    assert 0 not in got.record_ids() and got.record_ids()[0] == 3
    assert [c.distance for c in got] == sorted(c.distance for c in got)


def test_k_larger_than_index_returns_all_eligible():
    index = build_index(CORPUS, IndexConfig(mode="exact"))
    got = query_knn(index, vectorize(["hotel"], index.idf), k=50, exclude_dialogue="d2")
    assert len(got) == 4


def test_ties_are_broken_by_record_id():
    recs = [ExemplarRecord(i, ("x",), ("y",), f"d{i}", 1) for i in range(4)]
    vecs = [SparseVector(np.array([0]), np.array([1.0]), 1.0)] * 4
    index = build_index_from_vectors(vecs, 1, recs, IndexConfig(mode="exact"))
    assert query_knn(index, vecs[0], k=3).record_ids() == [0, 1, 2]


def random_sparse(n, dim, seed, density=0.3):
    rng = np.random.default_rng(seed)
    m = sp.random(n, dim, density=density, random_state=np.random.RandomState(seed), format="csr")
    m.data = rng.uniform(0.1, 1.0, m.nnz)
    norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1))).ravel()
    norms[norms == 0] = 1.0
    return sp.csr_matrix(sp.diags(1.0 / norms) @ m)


def as_sparse_vector(row):
    row = row.tocsr()
    nz = np.linalg.norm(row.data)
    return SparseVector(row.indices.astype(np.int64), row.data, 1.0 if nz else 0.0)


def test_exact_matches_exhaustive_oracle():
    m = random_sparse(300, 40, 0)
    recs = [ExemplarRecord(i, (), (), f"d{i % 7}", 1) for i in range(300)]
    index = build_index_from_vectors(m, 40, recs, IndexConfig(mode="exact"))
    dense = m.toarray().tolist()
    for qi in (0, 17, 150):
        q = as_sparse_vector(m[qi])
        for k in (1, 5, 10):
            want = oracles.exhaustive_knn(dense, dense[qi], k, exclude=lambda i: recs[i].dialogue_id == recs[qi].dialogue_id)
            got = query_knn(index, q, k, exclude_dialogue=recs[qi].dialogue_id)
            assert got.record_ids() == want
            for c in got:
                assert c.distance == pytest.approx(1.0 - oracles.cos(dense[qi], dense[c.record.record_id]), abs=1e-12)


def test_lsh_candidates_include_exact_duplicates():
    m = random_sparse(500, 60, 1)
    recs = [ExemplarRecord(i, (), (), f"d{i}", 1) for i in range(500)]
    index = build_index_from_vectors(m, 60, recs, IndexConfig(tables=8, bits=10, probe_radius=0))
    for qi in (3, 99, 400):
        assert qi in index.candidates_lsh(as_sparse_vector(m[qi]))


def test_lsh_recall_on_small_text_corpus():
    lines = Path(__file__).with_name("data").joinpath("multiwoz_user_utterances.txt").read_text().splitlines()[:2000]
    utts = [tokenize(line) for line in lines]
    idf = build_idf(utts)
    vecs = [vectorize(u, idf) for u in utts]
    recs = [ExemplarRecord(i, tuple(u), (), f"d{i}", 1) for i, u in enumerate(utts)]
    index = build_index_from_vectors(vecs, idf.dim, recs, IndexConfig())
    recall = []
    for i in range(0, 2000, 20):
        exact = set(query_knn(index, vecs[i], 10, f"d{i}", mode="exact").record_ids())
        approx = set(query_knn(index, vecs[i], 10, f"d{i}").record_ids())
        recall.append(len(exact & approx) / len(exact))
    assert np.mean(recall) >= 0.9


def test_save_load_round_trip_is_bit_exact(tmp_path):
    index = build_index(CORPUS, IndexConfig(seed=5))
    save_index(index, tmp_path / "a.bin")
    loaded = load_index(tmp_path / "a.bin")
    save_index(loaded, tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    assert np.array_equal(loaded.planes, index.planes)
    assert loaded.records == index.records
    q = vectorize(tokenize("cheap hotel"), index.idf)
    assert query_knn(loaded, q, 3).record_ids() == query_knn(index, q, 3).record_ids()


def test_same_seed_rebuild_gives_identical_file(tmp_path):
    save_index(build_index(CORPUS, IndexConfig(seed=2)), tmp_path / "a.bin")
    save_index(build_index(CORPUS, IndexConfig(seed=2)), tmp_path / "b.bin")
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()


def test_empty_index_is_an_error():
    with pytest.raises(DataError):
        build_index([])


def test_bm25_hand_value():
    idf = build_idf([["a", "b"], ["b", "c", "c"]])
    # avgdl 2.5; query "c" against doc ["b","c","c"]: idf = ln(1 + (2-1+0.5)/(1+0.5)) = ln 2
    k1, b = 1.5, 0.75
    norm = k1 * (1 - b + b * 3 / 2.5)
    expected = math.log(2.0) * 2 * (k1 + 1) / (2 + norm)
    assert bm25(["c"], ["b", "c", "c"], idf) == pytest.approx(expected)
    assert bm25(["zzz"], ["b"], idf) == 0.0


def test_feature_vector_ranges():
    index = build_index(CORPUS)
    res = RetrievalResources(index.idf)
    f = feature_vector(tokenize("i need a cheap hotel"), index.records[0], res)
    assert len(f) == len(FEATURE_NAMES)
    assert 0 <= f[0] <= 1 and 0 <= f[1] <= 1 and f[2] >= 0 and 0 <= f[3] <= 1 and f[4] == 0.0
    same = feature_vector(index.records[0].user_tokens, index.records[0], res)
    assert same[0] == 1.0 and same[1] == 1.0 and same[3] == 1.0


def test_heuristic_rerank_and_exemplar_choice():
    index = build_index(CORPUS, IndexConfig(mode="exact"))
    res = RetrievalResources(index.idf)
    model = RerankerModel.heuristic()
    assert list(model.weights) == list(HEURISTIC_WEIGHTS)
    query = tuple(tokenize("i need a cheap hotel in the north"))
    best = exemplar_for(query, index, model, res, exclude_dialogue="d1")
    assert best.record.dialogue_id == "d4"
    cands = CandidateSet(query, [Candidate(index.records[2], 0.9), Candidate(index.records[3], 0.5)])
    ranked = rerank(cands, model, res)
    assert [c.record.record_id for c in ranked] == [3, 2]
    assert ranked.candidates[0].score >= ranked.candidates[1].score


def test_no_eligible_candidate_gives_none():
    index = build_index(CORPUS[:1], IndexConfig(mode="exact"))
    assert exemplar_for(("hotel",), index, RerankerModel.heuristic(), RetrievalResources(index.idf), "d1") is None


def test_pairwise_mlp_learns_a_separable_preference(tmp_path):
    rng = np.random.default_rng(0)
    pos = rng.uniform(0, 1, (200, 5))
    neg = rng.uniform(0, 1, (200, 5))
    pos[:, 1] += 1.0  # the preferred candidate always has more token overlap
    model = fit_pairwise(pos, neg, RerankerConfig(epochs=60, seed=1))
    assert model.kind == "mlp"
    assert model.report["heldout_accuracy"] >= 0.9
    assert np.mean(model.score(pos) > model.score(neg)) >= 0.9
    model.save(tmp_path / "r.json")
    again = RerankerModel.load(tmp_path / "r.json")
    assert np.allclose(again.score(pos[:5]), model.score(pos[:5]))
