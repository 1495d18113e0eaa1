"""Property-based checks on random inputs."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from metric_ramsey.hst import embed_l2, exact_k_hst, hst_metric, tree_from_nested, tree_from_ultrametric
from metric_ramsey.metric import (
    aspect_ratio,
    build_metric,
    c_ultrametric,
    distortion,
    is_ultrametric,
    shortest_path_metric,
    subdominant_ultrametric,
)
from metric_ramsey.ramsey import equilateral_extract, ramsey_extract
from metric_ramsey.sequences import balance_binary, decompose_sequence, is_q_decomposable
from metric_ramsey.spectral import krawtchouk

from .conftest import random_nested


@st.composite
def graph_metrics(draw, max_n=9, exact=False):
    """Shortest-path metric of a random connected weighted graph."""
    n = draw(st.integers(2, max_n))
    edges = [(i, draw(st.integers(0, i - 1))) for i in range(1, n)]  # spanning tree
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges += [(u, v) for u, v in extra if u != v]
    if exact:
        wts = [Fraction(draw(st.integers(1, 30)), draw(st.integers(1, 6))) for _ in edges]
    else:
        wts = [draw(st.floats(0.1, 10.0)) for _ in edges]
    return shortest_path_metric((n, edges), wts, exact=exact)


@given(graph_metrics(exact=True))
def test_subdominant_is_optimal_ultrametric(X):
    u, c = subdominant_ultrametric(X)
    assert is_ultrametric(u, exact=True)
    U = build_metric(u * c, exact=True, validate=False)
    rep = distortion(X, U)
    assert rep.distortion == c
    assert rep.contraction <= 1  # u * c dominates X


@given(graph_metrics(exact=True))
def test_c_um_bounded_by_aspect_ratio_and_size(X):
    c = c_ultrametric(X)
    assert 1 <= c <= min(aspect_ratio(X), X.n - 1)


@given(graph_metrics(exact=True), graph_metrics(exact=True))
def test_distortion_is_product_and_symmetric(X, Y):
    m = min(X.n, Y.n)
    X, Y = X.sub(range(m)), Y.sub(range(m))
    a, b = distortion(X, Y), distortion(Y, X)
    assert a.distortion == a.expansion * a.contraction
    assert a.distortion == b.distortion
    assert a.distortion >= 1


@given(st.integers(2, 60), st.integers(0, 2 ** 32 - 1))
def test_embed_l2_isometry(n, seed):
    t = tree_from_nested(random_nested(np.random.default_rng(seed), n))
    Y = embed_l2(t)
    D = np.sqrt(((Y[:, None] - Y[None]) ** 2).sum(axis=2))
    M = hst_metric(t).d
    off = ~np.eye(n, dtype=bool)
    assert np.max(np.abs(D[off] - M[off]) / M[off]) <= 1e-9


@given(graph_metrics(), st.sampled_from([2.0, 3.0, 10.0]))
def test_exact_k_hst_of_subdominant(X, k):
    u, _ = subdominant_ultrametric(X)
    t = tree_from_ultrametric(u)
    out, rep = exact_k_hst(t, k)
    assert float(rep.distortion) <= k * (1 + 1e-9)


@given(graph_metrics(max_n=12), st.floats(2.05, 12.0))
def test_ramsey_extract_verified(X, alpha):
    res = ramsey_extract(X, alpha)
    T = hst_metric(res.tree)
    rep = distortion(X.sub(res.subset.indices), T)
    assert float(rep.distortion) <= alpha * (1 + 1e-9)
    assert res.weighted_ok
    assert len(res.subset) >= X.n ** res.psi * (1 - 1e-9)


@given(graph_metrics(max_n=12), st.floats(1.0, 20.0))
def test_equilateral_aspect_ratio(X, alpha):
    S = equilateral_extract(X, alpha)
    if len(S) > 1:
        assert float(aspect_ratio(X.sub(S.indices))) <= alpha * (1 + 1e-12)


positive = st.lists(st.floats(1e-3, 1e3), min_size=1, max_size=40)


@given(positive, st.sampled_from([16.0, 32.0, 256.0]))
def test_decompose_sequence(x, q):
    dec = decompose_sequence(x, q)
    xs = np.asarray(x)
    assert np.all(dec.y <= xs * (1 + 1e-12))
    assert np.sum(dec.y ** dec.p) >= xs.sum() ** dec.p * (1 - 1e-9)
    assert is_q_decomposable(dec.y ** dec.p, q, rtol=1e-6)


@given(positive)
def test_balance_binary(x):
    bb = balance_binary(x)
    assert np.sqrt(bb.y).sum() >= math.sqrt(sum(x)) * (1 - 1e-9)
    assert np.all(bb.y <= np.asarray(x))


@given(st.integers(1, 14), st.data())
def test_krawtchouk_symmetries(d, data):
    k = data.draw(st.integers(0, d))
    x = data.draw(st.integers(0, d))
    # reciprocity C(d, x) K_k(x) = C(d, k) K_x(k) and the reflection K_k(d - x) = (-1)^k K_k(x)
    assert math.comb(d, x) * krawtchouk(d, k, x) == math.comb(d, k) * krawtchouk(d, x, k)
    assert krawtchouk(d, k, d - x) == (-1) ** k * krawtchouk(d, k, x)
