from __future__ import annotations

import math

import numpy as np
import pytest

from metric_ramsey.errors import DTooLarge, InfeasibleDegree, InvalidParameters, RejectionLimit
from metric_ramsey.instances import (
    FAMILIES,
    GENERATOR_NAME,
    InstanceSpec,
    gen_high_girth_dense,
    gen_hypercube,
    gen_random_regular,
    generate,
    grid,
    gv_code,
    gv_sum,
    random_metric,
    rng_for,
)
from metric_ramsey.metric import build_metric


def test_rng_streams_are_independent_and_reproducible():
    a = rng_for(5, 0).random(4)
    assert np.array_equal(a, rng_for(5, 0).random(4))
    assert not np.array_equal(a, rng_for(5, 1).random(4))
    assert not np.array_equal(a, rng_for(6, 0).random(4))


def test_hypercube():
    G, X = gen_hypercube(4)
    assert G.n == 16 and G.degree == 4
    assert X.labels[5] == "0101"
    assert X.d[0, 15] == 4
    assert np.array_equal(G.distances, X.d)
    with pytest.raises(DTooLarge):
        gen_hypercube(17)


def test_random_regular():
    G = gen_random_regular(50, 4, 3)
    assert G.is_simple and G.degree == 4
    assert np.array_equal(G.adjacency, gen_random_regular(50, 4, 3).adjacency)
    assert not np.array_equal(G.adjacency, gen_random_regular(50, 4, 4).adjacency)
    with pytest.raises(InfeasibleDegree):
        gen_random_regular(7, 3)
    with pytest.raises(InfeasibleDegree):
        gen_random_regular(4, 4)
    with pytest.raises(RejectionLimit):
        gen_random_regular(20, 3, 0, min_girth=10, max_tries=5)


def test_random_regular_girth():
    G = gen_random_regular(64, 3, 1, min_girth=5)
    assert G.girth >= 5


def test_high_girth_dense():
    G = gen_high_girth_dense(256, 4, 0)
    assert G.girth >= 4 and G.n >= 128
    with pytest.raises(InvalidParameters):
        gen_high_girth_dense(10, 8)


def test_gv_code():
    res = gv_code(8, 3)
    words = list(res.code.indices)
    for i, a in enumerate(words):
        for b in words[i + 1:]:
            assert bin(a ^ b).count("1") >= 3
    assert res.size >= 2 ** 8 / gv_sum(8, 3)
    assert gv_sum(8, 3) == 1 + 8 + 28 + 56
    assert float(res.report.distortion) <= res.distortion_bound * (1 + 1e-9)
    # greedy lexicode is maximal: every word is within distance < 3 of the code
    for w in range(256):
        assert min(bin(w ^ c).count("1") for c in words) < 3 or w in words


def test_random_metric_is_a_metric():
    X = random_metric(30, 2)
    build_metric(X.d)
    Y = random_metric(30, 2)
    assert X == Y
    assert float(X.d.max()) <= 1.0


def test_instance_spec_roundtrip():
    spec = InstanceSpec("cycle", {"n": 8}, 3)
    d = spec.as_dict()
    assert d["generator"] == GENERATOR_NAME
    assert InstanceSpec.from_dict(d) == spec
    with pytest.raises(InvalidParameters):
        InstanceSpec("nope")
    with pytest.raises(InvalidParameters):
        InstanceSpec("cycle", {"n": 3}, -1)


@pytest.mark.parametrize(
    "family, params",
    [
        ("hypercube", {"d": 3}),
        ("random_regular", {"n": 12, "d": 3}),
        ("high_girth_dense", {"N": 256, "g": 4}),
        ("gv_code", {"d": 6, "min_dist": 2}),
        ("cycle", {"n": 7}),
        ("path", {"n": 5}),
        ("complete", {"n": 4}),
        ("equilateral", {"n": 4, "scale": 2.5}),
        ("random_metric", {"n": 9}),
        ("composed", {"outer": 3, "inner": 3, "beta": 2.0}),
    ],
)
def test_generate_every_family(family, params):
    inst = generate(InstanceSpec(family, params, 1))
    build_metric(inst.metric.d)
    assert inst.metric == generate(InstanceSpec(family, params, 1)).metric
    assert family in FAMILIES


def test_cycle_and_path_values():
    assert generate(InstanceSpec("cycle", {"n": 6})).metric.d[0, 3] == 3
    assert generate(InstanceSpec("path", {"n": 6})).metric.d[0, 5] == 5


def test_grid_order():
    specs = grid("random_metric", {"n": [4, 8]}, [0, 1])
    assert [(s.params["n"], s.seed) for s in specs] == [(4, 0), (4, 1), (8, 0), (8, 1)]


def test_composed_structure():
    X = generate(InstanceSpec("composed", {"outer": 3, "inner": 4, "beta": 4.0}, 0)).metric
    d = np.asarray(X.d)
    inner_max = max(d[4 * z:4 * z + 4, 4 * z:4 * z + 4].max() for z in range(3))
    cross_min = min(d[4 * a:4 * a + 4, 4 * b:4 * b + 4].min() for a in range(3) for b in range(3) if a != b)
    assert cross_min >= 4.0 * inner_max * (1 - 1e-12)
    assert math.isfinite(cross_min)
