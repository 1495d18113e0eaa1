from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
import pytest

from metric_ramsey.errors import (
    AsymmetricMatrix,
    DisconnectedGraph,
    InstanceTooLarge,
    InvalidSubset,
    NegativeDistance,
    NotSquare,
    SizeMismatch,
    TriangleViolation,
    ZeroOffDiagonal,
)
from metric_ramsey.metric import (
    PointSubset,
    WeightedMetric,
    aspect_ratio,
    build_metric,
    c_ultrametric,
    distortion,
    exact_ramsey_oracle,
    is_ultrametric,
    shortest_path_metric,
    subdominant_ultrametric,
)

from .conftest import euclidean_metric


def line(points, exact=True):
    p = np.asarray(points, dtype=object)
    return build_metric([[abs(a - b) for b in p] for a in p], exact=exact)


def brute_distortion(A, B):
    """Independent oracle: max ratio over pairs times max inverse ratio over pairs."""
    exp = con = Fraction(0)
    for i, j in itertools.combinations(range(A.n), 2):
        r = Fraction(B.d[i, j]) / Fraction(A.d[i, j])
        exp = max(exp, r)
        con = max(con, 1 / r)
    return exp * con


def brute_c_um(X):
    """Minimax path distance by Floyd-Warshall with max instead of plus."""
    n = X.n
    u = [[X.d[i, j] for j in range(n)] for i in range(n)]
    for k in range(n):
        for i in range(n):
            for j in range(n):
                u[i][j] = min(u[i][j], max(u[i][k], u[k][j]))
    return max(X.d[i, j] / u[i][j] for i, j in itertools.combinations(range(n), 2))


class TestBuildMetric:
    def test_accepts_valid_matrix(self):
        X = build_metric([[0, 1], [1, 0]])
        assert X.n == 2 and X.labels == ("0", "1")

    def test_triangle_witness_triple(self):
        with pytest.raises(TriangleViolation) as exc:
            build_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
        assert exc.value.witness == (0, 1, 2)

    @pytest.mark.parametrize(
        "matrix, err",
        [
            ([[0, 1, 2], [1, 0, 1]], NotSquare),
            ([[0, 1], [2, 0]], AsymmetricMatrix),
            ([[0, -1], [-1, 0]], NegativeDistance),
            ([[0, 0], [0, 0]], ZeroOffDiagonal),
        ],
    )
    def test_rejections(self, matrix, err):
        with pytest.raises(err):
            build_metric(matrix)

    def test_label_count_mismatch(self):
        with pytest.raises(SizeMismatch):
            build_metric([[0, 1], [1, 0]], labels=["a"])

    def test_exact_strings(self):
        X = build_metric([["0", "3/2"], ["3/2", "0"]], exact=True)
        assert X.exact and X.d[0, 1] == Fraction(3, 2)

    def test_skip_validation_keeps_matrix(self):
        X = build_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]], validate=False)
        assert X.d[0, 2] == 5


class TestShortestPath:
    def test_path_graph(self):
        X = shortest_path_metric((4, [(0, 1), (1, 2), (2, 3)]))
        assert X.d[0, 3] == 3 and aspect_ratio(X) == 3

    def test_disconnected(self):
        with pytest.raises(DisconnectedGraph):
            shortest_path_metric((3, [(0, 1)]))

    def test_weighted_exact(self):
        X = shortest_path_metric((3, [(0, 1), (1, 2), (0, 2)]), [Fraction(1, 2), Fraction(1, 3), 5], exact=True)
        assert X.d[0, 2] == Fraction(5, 6)


class TestDistortion:
    def test_identity(self):
        X = line([0, 1, 3])
        r = distortion(X, X)
        assert r.distortion == 1

    def test_line_example_against_brute_force(self):
        # {0,1,3} mapped onto {0,1,2}: ratios 1, 1/2, 2/3 -> expansion 1, contraction 2
        X, Y = line([0, 1, 3]), line([0, 1, 2])
        r = distortion(X, Y)
        assert (r.expansion, r.contraction, r.distortion) == (1, 2, 2)
        assert r.distortion == brute_distortion(X, Y)

    def test_random_against_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            X = line(sorted(rng.choice(100, size=6, replace=False).tolist()))
            Y = line(sorted(rng.choice(100, size=6, replace=False).tolist()))
            assert distortion(X, Y).distortion == brute_distortion(X, Y)

    def test_scaling_invariance(self):
        X = euclidean_metric(8, 1)
        r = distortion(X, X.scaled(3.0))
        assert r.distortion == pytest.approx(1.0)
        assert r.expansion == pytest.approx(3.0)


class TestUltrametric:
    def test_c_um_line(self):
        assert c_ultrametric(line([0, 1, 2])) == 2

    def test_subdominant_is_ultrametric_and_below(self):
        X = euclidean_metric(12, 4, exact=True)
        u, c = subdominant_ultrametric(X)
        assert is_ultrametric(u)
        assert all(u[i, j] <= X.d[i, j] for i in range(12) for j in range(12))
        assert c == brute_c_um(X)

    def test_ultrametric_input_has_c_um_one(self):
        X = build_metric([[0, 2, 4], [2, 0, 4], [4, 4, 0]], exact=True)
        assert is_ultrametric(X.d) and c_ultrametric(X) == 1


class TestAspectRatio:
    def test_single_point(self):
        assert aspect_ratio(build_metric([[0]])) == 1

    def test_path(self):
        assert aspect_ratio(line([0, 1, 2, 3])) == 3


class TestSubsetsAndWeights:
    def test_subset_sorted(self):
        assert PointSubset((3, 1)).indices == (1, 3)

    def test_subset_duplicates(self):
        with pytest.raises(InvalidSubset):
            PointSubset((1, 1))

    def test_subset_out_of_range(self):
        with pytest.raises(InvalidSubset):
            PointSubset((5,)).validate_for(line([0, 1]))

    def test_weights_must_be_positive(self):
        with pytest.raises(Exception):
            WeightedMetric(line([0, 1]), np.array([1.0, 0.0]))


class TestOracle:
    def test_small_example(self):
        # {0,1,2,4}: subdominant gives u(0,4) = 2 so the whole set fits alpha = 2
        assert exact_ramsey_oracle(line([0, 1, 2, 4]), 2).indices == (0, 1, 2, 3)

    def test_matches_brute_force(self):
        X = euclidean_metric(7, 2, exact=True)
        for alpha in (Fraction(1), Fraction(3, 2), Fraction(2)):
            best = 0
            for r in range(X.n, 1, -1):
                if any(brute_c_um(X.sub(c)) <= alpha for c in itertools.combinations(range(X.n), r)):
                    best = r
                    break
            assert len(exact_ramsey_oracle(X, alpha)) == max(best, 1)

    def test_lexicographic_tie_break(self):
        X = build_metric(1 - np.eye(4))
        assert exact_ramsey_oracle(X, 1, "EQ").indices == (0, 1, 2, 3)
        Y = line([0, 1, 2], exact=True)
        assert exact_ramsey_oracle(Y, 1, "EQ").indices == (0, 1)

    def test_cap(self):
        with pytest.raises(InstanceTooLarge):
            exact_ramsey_oracle(euclidean_metric(16, 0), 2)
