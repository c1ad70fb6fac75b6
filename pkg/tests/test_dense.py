import math
import random

import numpy as np
import pytest

from ragbench.dense import (
    EmbeddingError,
    HashingEmbedder,
    build_dense_index,
    cosine_similarity,
    dense_retrieve,
)

from conftest import make_corpus
from oracles import ref_dense_rank


def test_cosine_identity():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0, abs=1e-9)


def test_cosine_orthogonal():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(0.0, abs=1e-9)


def test_cosine_antiparallel():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(-1.0, abs=1e-9)


def test_cosine_symmetry():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=8), rng.normal(size=8)
    assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-12)


def test_cosine_dim_mismatch():
    with pytest.raises(ValueError, match="dim mismatch"):
        cosine_similarity(np.ones(2), np.ones(3))


def test_cosine_zero_vector():
    with pytest.raises(ValueError, match="zero"):
        cosine_similarity(np.zeros(3), np.ones(3))


def test_hashing_embedder_deterministic():
    e = HashingEmbedder(dim=8)
    v1 = e.embed("the quick brown fox")
    v2 = e.embed("the quick brown fox")
    np.testing.assert_array_equal(v1, v2)
    assert np.linalg.norm(v1) == pytest.approx(1.0, abs=1e-9)


def test_hashing_embedder_known_hash_stability():
    # sha1-based bucketing must survive process restarts; freeze one vector.
    v = HashingEmbedder(dim=4).embed("cat")
    bucket = int(np.argmax(v))
    assert v[bucket] == pytest.approx(1.0)
    assert HashingEmbedder(dim=4).embed("cat")[bucket] == pytest.approx(1.0)


def test_hashing_embedder_tokenless_text():
    v = HashingEmbedder(dim=8).embed("!!! ...")
    assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-9)


def test_build_index_counts():
    corpus = make_corpus({"a": "one", "b": "two", "c": "three"})
    index = build_dense_index(corpus, HashingEmbedder(dim=8))
    assert index.doc_count == 3
    assert index.dim == 8


def test_build_index_empty_corpus():
    index = build_dense_index(make_corpus({}), HashingEmbedder(dim=8))
    assert index.doc_count == 0
    assert dense_retrieve(index, np.ones(8), 5) == []


class _DriftingProvider:
    def __init__(self):
        self.n = 0

    def dim(self):
        return 8

    def embed(self, text):
        return self.embed_batch([text])[0]

    def embed_batch(self, texts):
        out = []
        for _ in texts:
            self.n += 1
            out.append(np.ones(8 if self.n == 1 else 16))
        return out


def test_build_index_dim_drift():
    corpus = make_corpus({"a": "one", "b": "two"})
    with pytest.raises(EmbeddingError, match="dim drift"):
        build_dense_index(corpus, _DriftingProvider(), batch_size=1)


class _FixedProvider:
    def __init__(self, vectors):
        self.vectors = vectors

    def dim(self):
        return len(next(iter(self.vectors.values())))

    def embed(self, text):
        return np.asarray(self.vectors[text], dtype=np.float64)

    def embed_batch(self, texts):
        return [self.embed(t) for t in texts]


def test_retrieve_cosine_ordering():
    vecs = {"a": [1.0, 0.0], "b": [0.0, 1.0], "c": [0.9, 0.1]}
    corpus = make_corpus({k: k for k in vecs})
    index = build_dense_index(corpus, _FixedProvider(vecs))
    results = dense_retrieve(index, np.array([1.0, 0.0]), 2)
    assert [p.doc_id for p in results] == ["a", "c"]
    assert [p.rank for p in results] == [1, 2]


def test_retrieve_k_beyond_count():
    vecs = {"a": [1.0, 0.0], "b": [0.0, 1.0]}
    index = build_dense_index(make_corpus({k: k for k in vecs}), _FixedProvider(vecs))
    results = dense_retrieve(index, np.array([1.0, 0.2]), 10)
    assert len(results) == 2


def test_retrieve_dim_mismatch():
    index = build_dense_index(make_corpus({"a": "x"}), HashingEmbedder(dim=8))
    with pytest.raises(ValueError, match="dim mismatch"):
        dense_retrieve(index, np.ones(4), 1)


def test_identical_vectors_tie_break_by_id():
    vecs = {"b": [1.0, 0.0], "a": [1.0, 0.0]}
    index = build_dense_index(make_corpus({k: k for k in vecs}), _FixedProvider(vecs))
    results = dense_retrieve(index, np.array([1.0, 0.0]), 2)
    assert [p.doc_id for p in results] == ["a", "b"]


def _random_index(rng, n_docs=50, dim=16):
    names = [f"doc{i:03d}" for i in range(n_docs)]
    vectors = {name: [rng.gauss(0, 1) for _ in range(dim)] for name in names}
    corpus = make_corpus({name: name for name in names})
    index = build_dense_index(corpus, _FixedProvider(vectors))
    entries = [(name, np.asarray(vectors[name])) for name in names]
    return index, entries


def test_exactness_against_bruteforce():
    rng = random.Random(42)
    for _ in range(10):
        index, entries = _random_index(rng)
        query = np.array([rng.gauss(0, 1) for _ in range(16)])
        for k in (1, 3, 10, 50):
            got = dense_retrieve(index, query, k)
            want = ref_dense_rank(entries, query, k)
            assert [p.doc_id for p in got] == [d for d, _ in want]
            for p, (_, s) in zip(got, want):
                assert p.score == pytest.approx(s, abs=1e-9)


def test_prefix_property():
    rng = random.Random(5)
    index, _ = _random_index(rng, n_docs=30)
    query = np.array([rng.gauss(0, 1) for _ in range(16)])
    for k in range(0, 31):
        small = [p.doc_id for p in dense_retrieve(index, query, k)]
        big = [p.doc_id for p in dense_retrieve(index, query, k + 1)]
        assert big[: len(small)] == small


def test_scores_within_unit_interval():
    rng = random.Random(6)
    index, _ = _random_index(rng, n_docs=20)
    query = np.array([rng.gauss(0, 1) for _ in range(16)])
    for p in dense_retrieve(index, query, 20):
        assert -1.0 - 1e-9 <= p.score <= 1.0 + 1e-9
