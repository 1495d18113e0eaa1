from __future__ import annotations

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.metrics import pairwise_distances

from metric_ramsey.estimators import RamseyEmbedding
from metric_ramsey.instances import random_metric


def test_fit_precomputed():
    X = random_metric(30, 0)
    est = RamseyEmbedding(alpha=4.0).fit(np.asarray(X.d))
    assert est.n_samples_fit_ == 30
    assert est.support_.sum() == len(est.subset_)
    assert est.distortion_ <= 4 * (1 + 1e-9)
    assert np.array_equal(est.get_support(indices=True), est.subset_)


def test_transform_is_isometric_to_tree():
    X = random_metric(25, 1)
    est = RamseyEmbedding(alpha=3.0).fit(np.asarray(X.d))
    Y = est.transform(None)
    D = pairwise_distances(Y)
    assert np.allclose(D, est.tree_distances(), rtol=1e-9, atol=1e-12)
    with pytest.raises(ValueError):
        est.transform(np.zeros((3, 3)))


def test_feature_input_and_clone():
    rng = np.random.default_rng(2)
    P = rng.normal(size=(40, 3))
    est = RamseyEmbedding(alpha=6.0, metric="euclidean")
    Y = est.fit_transform(P)
    assert Y.shape[0] == len(est.subset_)
    c = clone(est)
    assert c.get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        c.get_support()


def test_sample_weight():
    X = random_metric(20, 3)
    w = np.ones(20)
    w[[0, 1]] = 1e4
    est = RamseyEmbedding(alpha=3.0).fit(np.asarray(X.d), sample_weight=w)
    assert est.result_.weighted_ok
