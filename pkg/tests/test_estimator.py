from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hiermem.encoder import hash_embed
from hiermem.estimator import HashEmbeddingTransformer, HierarchicalMemory

TEXTS = [
    "I went skiing in the alps last winter",
    "my guitar needs new strings",
    "we cooked pasta with fresh basil",
    "the marathon training plan starts monday",
]


def test_params_round_trip_through_clone():
    est = HierarchicalMemory(levels=3, dim=64, k_per_level=4)
    params = clone(est).get_params()
    assert params["levels"] == 3 and params["dim"] == 64 and params["k_per_level"] == 4


def test_fit_resets_and_partial_fit_appends():
    est = HierarchicalMemory(dim=64).fit(TEXTS[:2])
    assert est.n_episodes_ == 2
    est.partial_fit(TEXTS[2:])
    assert est.n_episodes_ == 4
    est.fit(TEXTS[:1])
    assert est.n_episodes_ == 1


def test_partial_fit_without_fit():
    est = HierarchicalMemory(dim=64).partial_fit(TEXTS)
    assert len(est.store_) == 4


def test_kneighbors_shapes_and_padding():
    est = HierarchicalMemory(dim=64).fit(TEXTS)
    dist, ind = est.kneighbors(["guitar strings", "pasta"], n_neighbors=6)
    assert dist.shape == ind.shape == (2, 6)
    assert (ind[:, 4:] == -1).all() and np.isinf(dist[:, 4:]).all()
    assert est.texts([ind[0, 0]]) == ["my guitar needs new strings"]
    assert (np.diff(dist[:, :4], axis=1) >= 0).all()
    only = est.kneighbors(["pasta"], n_neighbors=2, return_distance=False)
    assert only.shape == (1, 2)


def test_vector_queries_and_predict():
    est = HierarchicalMemory(dim=64).fit(TEXTS)
    q = np.stack([hash_embed("skiing alps", 64)])
    assert est.kneighbors(q, n_neighbors=1, return_distance=False)[0, 0] == 0
    assert est.predict(["skiing in the alps"]) == [TEXTS[0]]
    with pytest.raises(Exception):
        est.kneighbors(np.ones((1, 8)))


def test_unfitted_and_bad_input():
    with pytest.raises(NotFittedError):
        HierarchicalMemory().kneighbors(["x"])
    with pytest.raises(TypeError):
        HierarchicalMemory(dim=16).fit("a single string")


def test_transformer():
    t = HashEmbeddingTransformer(dim=32)
    X = t.fit_transform(TEXTS)
    assert X.shape == (4, 32)
    np.testing.assert_array_equal(X[1], hash_embed(TEXTS[1], 32))
    assert clone(t).get_params() == {"dim": 32}
