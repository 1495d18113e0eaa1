from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from metric_ramsey.errors import AllZero, QTooSmall
from metric_ramsey.sequences import (
    balance_binary,
    certified_exponent,
    decompose_sequence,
    decomposition_exponent,
    is_q_decomposable,
    pinfty_bound_check,
    weighted_condition,
)


def test_decomposition_exponent_value():
    # p = 1 - log2(log2 16)/log2 16 = 1 - 2/4
    assert decomposition_exponent(16) == pytest.approx(0.5)
    assert decomposition_exponent(256) == pytest.approx(1 - 3 / 8)


@pytest.mark.parametrize("q", [16, 64, 1024])
def test_decompose_sequence_properties(q):
    rng = np.random.default_rng(q)
    for _ in range(30):
        n = int(rng.integers(1, 80))
        x = rng.pareto(1.0, size=n) + 1e-3
        dec = decompose_sequence(x, q)
        assert np.all(dec.y <= x * (1 + 1e-12))
        assert np.sum(dec.y ** dec.p) >= np.sum(x) ** dec.p * (1 - 1e-9)
        assert is_q_decomposable(dec.y ** dec.p, q)


def test_decompose_sequence_errors():
    with pytest.raises(QTooSmall):
        decompose_sequence([1, 2], 8)
    with pytest.raises(AllZero):
        decompose_sequence([0, 0], 16)


def test_is_q_decomposable_examples():
    assert is_q_decomposable([10, 1, 1, 1], 4)
    assert not is_q_decomposable([100, 1, 2, 1, 1, 1, 1], 4)


def test_pinfty_bound_holds_on_random_sequences():
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.exponential(size=int(rng.integers(1, 50)))
        p = float(rng.uniform(0.05, 0.95))
        assert pinfty_bound_check(x, p)


def test_balance_binary_properties():
    rng = np.random.default_rng(1)
    for _ in range(100):
        x = rng.pareto(0.8, size=int(rng.integers(1, 40))) + 1e-6
        bb = balance_binary(x)
        assert np.all(bb.y <= x)
        assert np.sqrt(bb.y).sum() >= math.sqrt(x.sum()) * (1 - 1e-9)
        pos = bb.y[bb.y > 0]
        if bb.kind == "pair":
            assert len(pos) == 2
        else:
            assert np.all(pos == bb.omega)


def test_weighted_condition_exact_boundary():
    # four unit weights, two kept: 2 * 1 >= 4^(1/2) holds with equality
    assert weighted_condition([1, 1], [1, 1, 1, 1], 0.5, exact=True)
    assert not weighted_condition([1, 1], [1, 1, 1, 1], 0.51, exact=True)
    assert weighted_condition([Fraction(1, 3)] * 3, [Fraction(1, 3)] * 9, 0.5, exact=True)


def test_certified_exponent_is_the_threshold():
    psi = certified_exponent([1, 1], [1] * 8)
    # 2 = 8^psi at psi = 1/3
    assert psi == pytest.approx(1 / 3, abs=1e-12)
    assert weighted_condition([1, 1], [1] * 8, psi, exact=True)
    assert certified_exponent([], [1, 2]) == 0.0
