"""Finite metric spaces, distortion accounting and exact small-instance oracles.

Distances are stored either as ``float64`` arrays (fast mode) or as ``object``
arrays of :class:`fractions.Fraction` (exact mode).  Float comparisons use a
relative tolerance of ``RTOL``; exact comparisons use no tolerance at all.
"""

from __future__ import annotations

import heapq
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import shortest_path

from .errors import (
    AsymmetricMatrix,
    DisconnectedGraph,
    InstanceTooLarge,
    InvalidParameters,
    InvalidSubset,
    NegativeDistance,
    NotBijection,
    NotSquare,
    SizeMismatch,
    TriangleViolation,
    ZeroOffDiagonal,
)

RTOL = 1e-9
ORACLE_CAP = 15


# ---------------------------------------------------------------------------
# scalar helpers


def to_fraction(value: Any) -> Fraction:
    """Convert a number or a ``"p/q"`` / decimal string to an exact Fraction.

    Floats are converted exactly (their binary value), not via their repr.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, (float, np.floating)):
        if not np.isfinite(value):
            raise InvalidParameters(f"non-finite value {value!r}")
        return Fraction(float(value))
    return Fraction(value)


def exact_array(a: Any) -> np.ndarray:
    """Return an object array of Fractions with the shape of ``a``."""
    arr = np.asarray(a, dtype=object)
    out = np.empty(arr.shape, dtype=object)
    for idx in np.ndindex(arr.shape):
        out[idx] = to_fraction(arr[idx])
    return out


def is_exact_array(a: np.ndarray) -> bool:
    return a.dtype == object


def leq(a, b, exact: bool) -> bool:
    """``a <= b`` with relative slack in float mode, none in exact mode."""
    if exact:
        return a <= b
    return float(a) <= float(b) * (1.0 + RTOL) + 0.0


# ---------------------------------------------------------------------------
# data types


@dataclass(frozen=True, eq=False)
class FiniteMetric:
    """A validated finite metric space.

    Attributes
    ----------
    d:
        ``n x n`` distance matrix; ``float64`` or an object array of Fractions.
    labels:
        One identifier per point.
    """

    d: np.ndarray
    labels: tuple[str, ...]

    @property
    def n(self) -> int:
        return int(self.d.shape[0])

    @property
    def exact(self) -> bool:
        return is_exact_array(self.d)

    def diameter(self):
        if self.n <= 1:
            return Fraction(0) if self.exact else 0.0
        return self.d.max()

    def min_distance(self):
        """Smallest positive interpoint distance (0 for a single point)."""
        if self.n <= 1:
            return Fraction(0) if self.exact else 0.0
        iu = np.triu_indices(self.n, 1)
        return self.d[iu].min()

    def sub(self, indices: Sequence[int]) -> "FiniteMetric":
        """Induced subspace on ``indices`` (no revalidation needed)."""
        idx = np.asarray(list(indices), dtype=np.int64)
        return FiniteMetric(self.d[np.ix_(idx, idx)].copy(), tuple(self.labels[i] for i in idx))

    def to_exact(self) -> "FiniteMetric":
        if self.exact:
            return self
        return FiniteMetric(exact_array(self.d), self.labels)

    def to_float(self) -> "FiniteMetric":
        if not self.exact:
            return self
        return FiniteMetric(self.d.astype(np.float64), self.labels)

    def scaled(self, factor) -> "FiniteMetric":
        return FiniteMetric(self.d * factor, self.labels)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FiniteMetric):
            return NotImplemented
        return self.labels == other.labels and self.d.shape == other.d.shape and bool(
            np.all(self.d == other.d)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class WeightedMetric:
    """A finite metric with a strictly positive weight per point."""

    base: FiniteMetric
    w: np.ndarray

    def __post_init__(self) -> None:
        w = self.w
        if not isinstance(w, np.ndarray):
            w = np.asarray(w)
            object.__setattr__(self, "w", w)
        if w.shape != (self.base.n,):
            raise SizeMismatch(f"weight vector has length {w.shape}, metric has {self.base.n} points")
        if self.base.n and not all(x > 0 for x in w):
            raise InvalidParameters("weights must be strictly positive; drop zero-weight points first")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def total(self):
        return sum(self.w) if is_exact_array(self.w) else float(np.sum(self.w))

    def sub(self, indices: Sequence[int]) -> "WeightedMetric":
        idx = list(indices)
        return WeightedMetric(self.base.sub(idx), self.w[np.asarray(idx, dtype=np.int64)])

    @staticmethod
    def uniform(X: FiniteMetric) -> "WeightedMetric":
        if X.exact:
            w = np.array([Fraction(1)] * X.n, dtype=object)
        else:
            w = np.ones(X.n)
        return WeightedMetric(X, w)


@dataclass(frozen=True)
class EmbeddingReport:
    """Expansion, contraction and distortion of a bijection.

    ``distortion == expansion * contraction`` holds exactly; in exact mode the
    three values are Fractions.  ``witness_pairs`` holds the pair attaining the
    expansion followed by the pair attaining the contraction.
    """

    expansion: Any
    contraction: Any
    distortion: Any
    witness_pairs: tuple[tuple[int, int], tuple[int, int]]

    @staticmethod
    def trivial(exact: bool = False) -> "EmbeddingReport":
        one = Fraction(1) if exact else 1.0
        return EmbeddingReport(one, one, one, ((0, 0), (0, 0)))

    def as_dict(self) -> dict:
        return {
            "expansion": self.expansion,
            "contraction": self.contraction,
            "distortion": self.distortion,
            "witness_pairs": [list(p) for p in self.witness_pairs],
        }


@dataclass(frozen=True)
class PointSubset:
    """Distinct indices into a FiniteMetric, kept sorted."""

    indices: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if len(set(idx)) != len(idx):
            raise InvalidSubset("subset indices must be distinct")
        if any(i < 0 for i in idx):
            raise InvalidSubset("subset indices must be nonnegative")
        object.__setattr__(self, "indices", tuple(sorted(idx)))

    def __len__(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def validate_for(self, X: FiniteMetric) -> None:
        if any(i >= X.n for i in self.indices):
            raise InvalidSubset(f"subset index out of range for a {X.n}-point metric")

    def induced(self, X: FiniteMetric) -> FiniteMetric:
        self.validate_for(X)
        return X.sub(self.indices)


# ---------------------------------------------------------------------------
# construction


def build_metric(
    matrix: Any,
    labels: Iterable[Any] | None = None,
    *,
    exact: bool = False,
    validate: bool = True,
) -> FiniteMetric:
    """Validate a square matrix and wrap it as a :class:`FiniteMetric`.

    In exact mode, entries are converted to Fractions (strings such as
    ``"3/2"`` or ``"0.1"`` are accepted).  Validation checks symmetry,
    nonnegativity, positive off-diagonal entries and the triangle inequality.
    ``validate=False`` skips the O(n^3) triangle scan for trusted input.
    """
    if exact:
        d = exact_array(matrix)
    else:
        raw = np.asarray(matrix, dtype=object) if _has_strings(matrix) else np.asarray(matrix)
        d = exact_array(raw).astype(np.float64) if raw.dtype == object else raw.astype(np.float64)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise NotSquare(f"distance matrix must be square, got shape {d.shape}")
    n = d.shape[0]
    if labels is None:
        labs = tuple(str(i) for i in range(n))
    else:
        labs = tuple(str(x) for x in labels)
        if len(labs) != n:
            raise SizeMismatch(f"{len(labs)} labels for {n} points")
    if validate:
        _validate(d, exact)
    else:
        d = d.copy()
        for i in range(n):
            d[i, i] = Fraction(0) if exact else 0.0
    d.setflags(write=False)
    return FiniteMetric(d, labs)


def _has_strings(matrix: Any) -> bool:
    if isinstance(matrix, np.ndarray):
        return matrix.dtype == object
    try:
        return any(isinstance(x, str) for row in matrix for x in row)
    except TypeError:
        return False


def _validate(d: np.ndarray, exact: bool) -> None:
    n = d.shape[0]
    if not exact and not np.all(np.isfinite(d)):
        raise NegativeDistance("distance matrix contains non-finite entries")
    for i in range(n):
        if d[i, i] != 0:
            raise ZeroOffDiagonal(f"d[{i}][{i}] = {d[i, i]} must be 0")
    neg = d < 0
    if np.any(neg):
        i, j = map(int, np.argwhere(neg)[0])
        raise NegativeDistance(f"d[{i}][{j}] = {d[i, j]} is negative")
    if exact:
        asym = d != d.T
    else:
        asym = np.abs(d - d.T) > RTOL * np.maximum(np.abs(d), np.abs(d.T))
    if np.any(asym):
        i, j = map(int, np.argwhere(asym)[0])
        raise AsymmetricMatrix(f"d[{i}][{j}] = {d[i, j]} differs from d[{j}][{i}] = {d[j, i]}")
    off = ~np.eye(n, dtype=bool)
    zero = (d == 0) & off
    if np.any(zero):
        i, j = map(int, np.argwhere(zero)[0])
        raise ZeroOffDiagonal(f"d[{i}][{j}] = 0 for distinct points")
    # triangle inequality: for every middle point j, d[i,k] <= d[i,j] + d[j,k]
    best: tuple[int, int, int] | None = None
    for j in range(n):
        via = d[:, j][:, None] + d[j, :][None, :]
        bad = d > via if exact else d > via * (1.0 + RTOL)
        if np.any(bad):
            i, k = map(int, np.argwhere(bad)[0])
            cand = (i, j, k)
            if best is None or (cand[0], cand[2], cand[1]) < (best[0], best[2], best[1]):
                best = cand
    if best is not None:
        i, j, k = best
        raise TriangleViolation(
            f"triangle inequality violated at ({i},{k}) via {j}: "
            f"{d[i, k]} > {d[i, j]} + {d[j, k]}",
            witness=best,
        )


def shortest_path_metric(graph: Any, edge_weights: Sequence[float] | None = None,
                         *, exact: bool = False) -> FiniteMetric:
    """All-pairs shortest-path metric of a connected graph.

    ``graph`` is any object with ``n`` and ``edges`` attributes, or a pair
    ``(n, edges)``.  Unit edge lengths are used unless ``edge_weights`` is
    given (one positive weight per edge).
    """
    if isinstance(graph, tuple):
        n, edges = graph
    else:
        n, edges = graph.n, graph.edges
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n == 0:
        raise InvalidParameters("graph has no vertices")
    if edge_weights is None:
        wts = np.ones(len(edges))
    else:
        wts = exact_array(edge_weights) if exact else np.asarray(edge_weights, dtype=np.float64)
        if wts.shape != (len(edges),):
            raise SizeMismatch("one weight per edge is required")
        if np.any(wts <= 0):
            raise NegativeDistance("edge weights must be positive")
    keep = edges[:, 0] != edges[:, 1]
    edges, wts = edges[keep], wts[keep]
    # csgraph keeps the minimum over parallel edges only for dense input, so
    # reduce parallel edges explicitly before building the sparse matrix
    best: dict[tuple[int, int], float] = {}
    for (u, v), w in zip(edges.tolist(), wts.tolist()):
        key = (min(u, v), max(u, v))
        if key not in best or w < best[key]:
            best[key] = w
    if best:
        rows, cols = zip(*best.keys())
        vals = list(best.values())
    else:
        rows, cols, vals = (), (), ()
    if exact and edge_weights is not None:
        return build_metric(_exact_dijkstra(n, best), exact=True, validate=False)
    A = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    dist = shortest_path(A, directed=False, unweighted=edge_weights is None)
    if not np.all(np.isfinite(dist)):
        raise DisconnectedGraph("graph is disconnected")
    if edge_weights is None:
        dist = np.rint(dist)
    return build_metric(dist, exact=exact, validate=False)


def _exact_dijkstra(n: int, edges: dict[tuple[int, int], Fraction]) -> np.ndarray:
    """All-pairs shortest paths with Fraction lengths (one Dijkstra per source)."""
    adj: list[list[tuple[int, Fraction]]] = [[] for _ in range(n)]
    for (u, v), w in edges.items():
        adj[u].append((v, w))
        adj[v].append((u, w))
    d = np.empty((n, n), dtype=object)
    for s in range(n):
        dist: dict[int, Fraction] = {s: Fraction(0)}
        heap = [(Fraction(0), s)]
        done: set[int] = set()
        while heap:
            du, u = heapq.heappop(heap)
            if u in done:
                continue
            done.add(u)
            for v, w in adj[u]:
                if v not in dist or du + w < dist[v]:
                    dist[v] = du + w
                    heapq.heappush(heap, (dist[v], v))
        if len(dist) < n:
            raise DisconnectedGraph("graph is disconnected")
        for t in range(n):
            d[s, t] = dist[t]
    return d


# ---------------------------------------------------------------------------
# basic quantities


def aspect_ratio(X: FiniteMetric):
    """Diameter over minimum interpoint distance; 1 for a single point."""
    if X.n <= 1:
        return Fraction(1) if X.exact else 1.0
    return X.diameter() / X.min_distance()


def is_ultrametric(d: np.ndarray, exact: bool | None = None) -> bool:
    """Check the strong triangle inequality ``d(x,z) <= max(d(x,y), d(y,z))``."""
    exact = is_exact_array(d) if exact is None else exact
    n = d.shape[0]
    for j in range(n):
        col = d[:, j][:, None]
        row = d[j, :][None, :]
        mx = np.where(col > row, col, row)
        bad = d > mx if exact else d > mx * (1.0 + RTOL)
        if np.any(bad):
            return False
    return True


def _match(X: FiniteMetric, Y: FiniteMetric) -> tuple[np.ndarray, np.ndarray]:
    if X.exact or Y.exact:
        return X.to_exact().d, Y.to_exact().d
    return X.d, Y.d


def distortion(X: FiniteMetric, Y: FiniteMetric, f: Sequence[int] | None = None) -> EmbeddingReport:
    """Distortion of the bijection ``i -> f[i]`` from X onto Y.

    Expansion is ``max d_Y(f i, f j) / d_X(i, j)``, contraction is
    ``max d_X / d_Y``; the distortion is their product.  If either metric is
    exact the computation is carried out in Fractions.
    """
    if X.n != Y.n:
        raise SizeMismatch(f"|X| = {X.n} but |Y| = {Y.n}")
    n = X.n
    perm = np.arange(n) if f is None else np.asarray(list(f), dtype=np.int64)
    if perm.shape != (n,) or sorted(perm.tolist()) != list(range(n)):
        raise NotBijection("f must be a permutation of range(n)")
    dx, dy = _match(X, Y)
    exact = is_exact_array(dx)
    if n < 2:
        return EmbeddingReport.trivial(exact)
    iu, ju = np.triu_indices(n, 1)
    a = dx[iu, ju]
    b = dy[perm[iu], perm[ju]]
    exp_ratio = b / a
    con_ratio = a / b
    ie = int(np.argmax(exp_ratio))
    ic = int(np.argmax(con_ratio))
    expansion = exp_ratio[ie]
    contraction = con_ratio[ic]
    if not exact:
        expansion, contraction = float(expansion), float(contraction)
    return EmbeddingReport(
        expansion,
        contraction,
        expansion * contraction,
        ((int(iu[ie]), int(ju[ie])), (int(iu[ic]), int(ju[ic]))),
    )


def subdominant_ultrametric(X: FiniteMetric) -> tuple[np.ndarray, Any]:
    """Maximal ultrametric below ``d`` and the optimal distortion ``max d/u``.

    ``u(x, y)`` is the minimax path length (single linkage): the smallest
    possible largest step over all chains from x to y.  Computed with Prim's
    algorithm: when vertex v joins the tree through edge (p, v) of length
    ``e``, ``u(v, t) = max(e, u(p, t))`` for every earlier vertex t.
    """
    d = X.d
    n = X.n
    exact = X.exact
    u = np.zeros_like(d) if not exact else np.array(
        [[Fraction(0)] * n for _ in range(n)], dtype=object).reshape(n, n)
    if n <= 1:
        return u, (Fraction(1) if exact else 1.0)
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    order = [0]
    best = d[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    for _ in range(n - 1):
        cand = np.where(~in_tree)[0]
        v = int(cand[np.argmin(best[cand])])
        e = best[v]
        p = int(parent[v])
        prev = np.asarray(order, dtype=np.int64)
        up = u[p, prev]
        vals = np.where(up > e, up, e) if exact else np.maximum(up, e)
        vals[prev == p] = e
        u[v, prev] = vals
        u[prev, v] = vals
        in_tree[v] = True
        order.append(v)
        closer = (~in_tree) & (d[v] < best)
        best[closer] = d[v][closer]
        parent[closer] = v
    iu, ju = np.triu_indices(n, 1)
    c_um = (d[iu, ju] / u[iu, ju]).max()
    if not exact:
        c_um = float(c_um)
    return u, c_um


def c_ultrametric(X: FiniteMetric):
    return subdominant_ultrametric(X)[1]


def exact_ramsey_oracle(
    X: FiniteMetric,
    alpha: Any,
    target: str = "UM",
    *,
    cap: int = ORACLE_CAP,
    exact: bool | None = None,
) -> PointSubset:
    """Brute-force a largest subset that embeds into the target class with distortion ``<= alpha``.

    ``target`` is ``"UM"`` (ultrametrics, decided by the subdominant
    ultrametric) or ``"EQ"`` (equilateral spaces, decided by the aspect
    ratio).  Among maximum-cardinality answers the lexicographically smallest
    index set is returned.  Exact arithmetic is used by default when the
    input is exact.
    """
    if X.n > cap:
        raise InstanceTooLarge(f"oracle limited to n <= {cap}, got {X.n}")
    target = target.upper()
    if target not in ("UM", "EQ"):
        raise InvalidParameters(f"unknown target class {target!r}")
    use_exact = X.exact if exact is None else exact
    Y = X.to_exact() if use_exact else X.to_float()
    a = to_fraction(alpha) if use_exact else float(alpha)
    n = Y.n
    if n == 0:
        return PointSubset(())
    check = c_ultrametric if target == "UM" else aspect_ratio
    for size in range(n, 1, -1):
        for combo in itertools.combinations(range(n), size):
            val = check(Y.sub(combo))
            if leq(val, a, use_exact):
                return PointSubset(combo)
    return PointSubset((0,))
