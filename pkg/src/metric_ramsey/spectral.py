"""Spectral, Poincare and Markov-type certificates on finite graphs.

Graphs are stored as dense symmetric integer adjacency matrices, so parallel
edges (entries above 1) and loops (diagonal entries) are representable.
Everything here works at desk scale (``n <= 4096``).
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import shortest_path

from .errors import (
    DisconnectedGraph,
    InstanceTooLarge,
    InvalidParameters,
    NotRegular,
    OutOfRange,
    StateSpaceTooLarge,
    SubsetTooSmall,
    TOutOfRange,
)
from .metric import FiniteMetric, PointSubset

#: largest graph handled by the dense routines
MAX_VERTICES = 4096
#: largest graph for exhaustive subset enumeration
SELF_MIXING_CAP = 20
#: absolute slack on eigenvalue-based comparisons, relative to the degree
EIG_TOL = 1e-8


# ---------------------------------------------------------------------------
# graphs


@dataclass(frozen=True, eq=False)
class Graph:
    """Undirected multigraph on vertices ``0..n-1`` given by its adjacency matrix."""

    adjacency: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.adjacency, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidParameters("adjacency must be a square matrix")
        if a.shape[0] > MAX_VERTICES:
            raise InstanceTooLarge(f"graphs are limited to {MAX_VERTICES} vertices")
        if np.any(a < 0) or not np.array_equal(a, a.T):
            raise InvalidParameters("adjacency must be symmetric and nonnegative")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[Sequence[int]]) -> "Graph":
        a = np.zeros((n, n), dtype=np.int64)
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidParameters(f"edge ({u}, {v}) out of range for n = {n}")
            a[u, v] += 1
            if u != v:
                a[v, u] += 1
        return cls(a)

    @property
    def n(self) -> int:
        return int(self.adjacency.shape[0])

    def edges(self) -> list[tuple[int, int]]:
        """Edge list with ``u <= v``, repeated by multiplicity, in lexicographic order."""
        out: list[tuple[int, int]] = []
        iu, ju = np.nonzero(np.triu(self.adjacency))
        for u, v in zip(iu.tolist(), ju.tolist()):
            out.extend([(u, v)] * int(self.adjacency[u, v]))
        return out

    @property
    def is_simple(self) -> bool:
        return bool(np.all(self.adjacency <= 1) and not np.any(np.diag(self.adjacency)))

    @cached_property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    @property
    def degree(self) -> int | None:
        """Common degree if the graph is regular, else ``None``."""
        if self.n == 0:
            return None
        d = self.degrees
        return int(d[0]) if np.all(d == d[0]) else None

    def require_regular(self) -> int:
        d = self.degree
        if d is None or d == 0:
            raise NotRegular("graph is not regular")
        return d

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        """Adjacency eigenvalues in nonincreasing order."""
        return np.linalg.eigvalsh(self.adjacency.astype(np.float64))[::-1].copy()

    @cached_property
    def distances(self) -> np.ndarray:
        """All-pairs shortest-path distances (``inf`` between components)."""
        a = sparse.csr_matrix((self.adjacency > 0).astype(np.float64))
        return shortest_path(a, method="D", unweighted=True, directed=False)

    @property
    def is_connected(self) -> bool:
        return bool(np.all(np.isfinite(self.distances)))

    @property
    def diameter(self) -> int:
        if not self.is_connected:
            raise DisconnectedGraph("graph is disconnected")
        return int(self.distances.max()) if self.n else 0

    @cached_property
    def girth(self) -> float:
        """Length of a shortest cycle (``inf`` for forests)."""
        length, _ = find_short_cycle(self)
        return length

    def neighbors(self) -> list[list[int]]:
        return [np.flatnonzero(row).tolist() for row in self.adjacency]

    def induced(self, vertices: Sequence[int]) -> "Graph":
        idx = np.asarray(vertices, dtype=np.int64)
        return Graph(self.adjacency[np.ix_(idx, idx)])

    def to_metric(self) -> FiniteMetric:
        """Shortest-path metric; requires a connected graph."""
        if not self.is_connected:
            raise DisconnectedGraph("graph is disconnected")
        d = self.distances.copy()
        d.setflags(write=False)
        return FiniteMetric(d, tuple(str(i) for i in range(self.n)))

    def as_dict(self) -> dict:
        return {"n": self.n, "edges": [list(e) for e in self.edges()]}


def find_short_cycle(G: Graph, below: float = math.inf) -> tuple[float, list[int]]:
    """Shortest cycle of ``G`` as ``(length, vertices)``; ``(inf, [])`` if none is shorter than ``below``.

    Loops have length 1 and parallel edges length 2.  Otherwise a breadth
    first search from every vertex finds the shortest cycle through it.
    """
    a = G.adjacency
    loops = np.flatnonzero(np.diag(a))
    if len(loops):
        return (1, [int(loops[0])]) if 1 < below else (math.inf, [])
    multi = np.argwhere(np.triu(a, 1) > 1)
    if len(multi):
        u, v = multi[0]
        return (2, [int(u), int(v)]) if 2 < below else (math.inf, [])
    nbrs = G.neighbors()
    best: float = below
    witness: list[int] = []
    for root in range(G.n):
        dist = {root: 0}
        parent = {root: -1}
        q = deque([root])
        while q:
            u = q.popleft()
            if 2 * dist[u] + 1 >= best:
                break
            for w in nbrs[u]:
                if w == parent[u]:
                    continue
                if w in dist:
                    length = dist[u] + dist[w] + 1
                    if length < best:
                        best = length
                        witness = _cycle_vertices(parent, u, w)
                else:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    q.append(w)
    if not witness:
        return math.inf, []
    return best, witness


def _cycle_vertices(parent: dict[int, int], u: int, w: int) -> list[int]:
    def path(x: int) -> list[int]:
        out = []
        while x != -1:
            out.append(x)
            x = parent[x]
        return out

    pu, pw = path(u), path(w)
    common = set(pu) & set(pw)
    a = [x for x in pu if x not in common]
    b = [x for x in pw if x not in common]
    lca = next(x for x in pu if x in common)
    return a + [lca] + b[::-1]


# ---------------------------------------------------------------------------
# spectra


@dataclass(frozen=True)
class SpectralProfile:
    """Multiplicative spectral gaps of a d-regular graph."""

    d: int
    gamma: float
    gamma_plus: float
    lambda_min: float
    eigenvalues: np.ndarray

    def as_dict(self) -> dict:
        return {"d": self.d, "gamma": self.gamma, "gamma_plus": self.gamma_plus,
                "lambda_min": self.lambda_min}


def spectral_profile(G: Graph) -> SpectralProfile:
    """``gamma = lambda_2/d`` and ``gamma_plus = max(lambda_2, -lambda_n)/d``."""
    d = G.require_regular()
    lam = G.eigenvalues
    lam2 = float(lam[1]) if G.n > 1 else 0.0
    lmin = float(lam[-1])
    return SpectralProfile(d, lam2 / d, max(lam2, -lmin) / d, lmin, lam)


def self_mixing(G: Graph, mode: str = "spectral") -> float:
    """Self-mixing parameter ``max_S |S|/|V| - 2|E(S)|/(d|S|)``.

    ``mode="exact"`` enumerates all nonempty subsets (``n <= 20``);
    ``mode="spectral"`` returns the upper bound ``-lambda_n/d``.
    """
    d = G.require_regular()
    if mode == "spectral":
        return float(-G.eigenvalues[-1] / d)
    if mode != "exact":
        raise InvalidParameters(f"mode must be 'exact' or 'spectral', got {mode!r}")
    n = G.n
    if n > SELF_MIXING_CAP:
        raise InstanceTooLarge(f"exact self-mixing enumerates 2^n subsets; n = {n} exceeds {SELF_MIXING_CAP}")
    masks = np.arange(1, 1 << n, dtype=np.int64)
    size = np.zeros_like(masks)
    for v in range(n):
        size += (masks >> v) & 1
    # 2|E(S)| = 1_S^T A 1_S
    two_e = np.zeros_like(masks)
    a = G.adjacency
    for u in range(n):
        bu = (masks >> u) & 1
        for v in range(n):
            if a[u, v]:
                two_e += a[u, v] * (bu & ((masks >> v) & 1))
    values = size / n - two_e / (d * size)
    return float(values.max())


def edges_between(G: Graph, S: Sequence[int], T: Sequence[int]) -> int:
    """Number of directed edges ``(u, v)`` with ``u in S`` and ``v in T``."""
    s = np.asarray(sorted(set(int(x) for x in S)), dtype=np.int64)
    t = np.asarray(sorted(set(int(x) for x in T)), dtype=np.int64)
    if len(s) == 0 or len(t) == 0:
        return 0
    return int(G.adjacency[np.ix_(s, t)].sum())


def expander_mixing_check(G: Graph, S: Sequence[int], T: Sequence[int]) -> bool:
    """``| |E(S,T)| - d|S||T|/n | <= gamma_plus d sqrt(|S||T|)``."""
    prof = spectral_profile(G)
    s, t = len(set(S)), len(set(T))
    dev = abs(edges_between(G, S, T) - prof.d * s * t / G.n)
    bound = prof.gamma_plus * prof.d * math.sqrt(s * t)
    return bool(dev <= bound + EIG_TOL * prof.d * max(1.0, math.sqrt(s * t)))


# ---------------------------------------------------------------------------
# subsets satisfying a Poincare inequality


@dataclass(frozen=True)
class PruneResult:
    """Output of :func:`expander_subset_prune` with the degree band it targets."""

    subset: PointSubset
    lower: float
    upper: float
    precondition_met: bool

    def degrees(self, G: Graph) -> np.ndarray:
        idx = np.asarray(self.subset.indices, dtype=np.int64)
        return G.adjacency[np.ix_(idx, idx)].sum(axis=1)

    def band_ok(self, G: Graph) -> bool:
        deg = self.degrees(G)
        return bool(np.all(deg >= self.lower * (1 - 1e-12)) and np.all(deg <= self.upper * (1 + 1e-12)))


def _precondition(G: Graph, B: Sequence[int], enforce: bool) -> tuple[int, float, bool]:
    prof = spectral_profile(G)
    k = len(set(B))
    met = k >= 8 * prof.gamma_plus * G.n
    if enforce and not met:
        raise SubsetTooSmall(
            f"|B| = {k} is below 8 gamma_plus n = {8 * prof.gamma_plus * G.n:.6g}")
    return prof.d, prof.gamma_plus, met


def expander_subset_prune(G: Graph, B: Sequence[int], *, enforce: bool = True) -> PruneResult:
    """Subset ``C`` of ``B`` whose induced degrees lie in ``[dk/8n, 4dk/n]``, ``k = |B|``.

    Vertices of ``B`` with induced degree above ``4dk/n`` are dropped; then a
    vertex of minimum induced degree (lowest index on ties) is removed while
    that minimum is at most ``dk/8n``.  When ``|B| >= 8 gamma_plus n`` the
    result has ``|C| >= |B|/3``.  ``enforce=False`` runs the procedure even
    when that precondition fails; ``precondition_met`` records the outcome.
    """
    d, _, met = _precondition(G, B, enforce)
    bset = sorted(set(int(x) for x in B))
    n, k = G.n, len(bset)
    upper = 4 * d * k / n
    lower = d * k / (8 * n)
    a = G.adjacency
    idx = np.asarray(bset, dtype=np.int64)
    deg_b = a[np.ix_(idx, idx)].sum(axis=1)
    cur = [v for v, dv in zip(bset, deg_b.tolist()) if dv <= upper]
    alive = np.asarray(cur, dtype=np.int64)
    deg = a[np.ix_(alive, alive)].sum(axis=1).astype(np.int64) if len(alive) else np.zeros(0, np.int64)
    mask = np.ones(len(alive), dtype=bool)
    while mask.any():
        live = np.flatnonzero(mask)
        j = live[np.argmin(deg[live])]
        if deg[j] > lower:
            break
        mask[j] = False
        deg -= a[alive, alive[j]]
    C = tuple(int(v) for v in alive[mask])
    return PruneResult(PointSubset(C), lower, upper, met)


@dataclass(frozen=True)
class PoincareCertificate:
    """Both sides of ``sum_{u,v in C} ||f(u)-f(v)||_p^p <= (32p)^p n/d sum_{E(C)} ||f(u)-f(v)||_p^p``.

    The left side sums over ordered pairs; the right side over edges of the
    induced subgraph counted with multiplicity.
    """

    subset: PointSubset
    p: float
    lhs: float
    edge_sum: float
    constant: float
    rhs: float
    ratio: float
    precondition_met: bool

    @property
    def valid(self) -> bool:
        return self.lhs <= self.rhs * (1 + 1e-12)

    def as_dict(self) -> dict:
        return {"subset": list(self.subset.indices), "p": self.p, "lhs": repr(self.lhs),
                "edge_sum": repr(self.edge_sum), "constant": repr(self.constant),
                "rhs": repr(self.rhs), "ratio": repr(self.ratio),
                "precondition_met": self.precondition_met, "valid": self.valid}


def poincare_check(G: Graph, B: Sequence[int], f: Any, p: float, *, enforce: bool = True) -> PoincareCertificate:
    """Evaluate the Poincare inequality on the pruned subset of ``B``.

    ``f`` has one row per vertex of ``G`` (a vector or a scalar per vertex).
    """
    if not p >= 1:
        raise InvalidParameters(f"p must be at least 1, got {p}")
    pr = expander_subset_prune(G, B, enforce=enforce)
    F = np.asarray(f, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != G.n:
        raise InvalidParameters(f"f has {F.shape[0]} rows for {G.n} vertices")
    idx = np.asarray(pr.subset.indices, dtype=np.int64)
    Fc = F[idx]
    diff = np.abs(Fc[:, None, :] - Fc[None, :, :]) ** p
    pair = diff.sum(axis=2)
    lhs = math.fsum(pair.ravel().tolist())
    sub_a = G.adjacency[np.ix_(idx, idx)]
    edge_sum = math.fsum((np.triu(sub_a, 1) * pair).ravel().tolist())
    d = G.require_regular()
    const = (32 * p) ** p * G.n / d
    rhs = const * edge_sum
    ratio = 0.0 if lhs == 0 else (math.inf if rhs == 0 else lhs / rhs)
    return PoincareCertificate(pr.subset, float(p), lhs, edge_sum, const, rhs, ratio, pr.precondition_met)


# ---------------------------------------------------------------------------
# distance graphs and the hypercube


def distance_graph(G: Graph, t: int) -> Graph:
    """Simple graph joining vertices at shortest-path distance exactly ``t``."""
    t = int(t)
    if not 1 <= t <= G.diameter:
        raise TOutOfRange(f"t = {t} outside [1, {G.diameter}]")
    return Graph((G.distances == t).astype(np.int64))


def distance_graph_regularity(G: Graph, t: int) -> int | None:
    """Expected degree ``d(d-1)^(t-1)`` of the t-distance graph when ``girth > 2t``, else ``None``."""
    d = G.degree
    if d is None or not G.girth > 2 * t:
        return None
    return d * (d - 1) ** (t - 1)


def distance_graph_coherence(G: Graph, t: int) -> bool:
    """Whether ``d_{G^(t)}(u,v) < g/2t`` implies ``d_{G^(t)}(u,v) = d_G(u,v)/t`` for all pairs."""
    H = distance_graph(G, t)
    g = G.girth
    dh, dg = H.distances, G.distances
    mask = dh < g / (2 * t)
    return bool(np.all(dh[mask] * t == dg[mask]))


def krawtchouk(d: int, k: int, x: int) -> int:
    """``K_k^(d)(x) = sum_j (-1)^j C(x, j) C(d - x, k - j)`` in exact integer arithmetic."""
    for name, v in (("d", d), ("k", k), ("x", x)):
        if int(v) != v:
            raise OutOfRange(f"{name} must be an integer, got {v}")
    d, k, x = int(d), int(k), int(x)
    if d < 0 or not 0 <= k <= d or not 0 <= x <= d:
        raise OutOfRange(f"need 0 <= k, x <= d, got d={d}, k={k}, x={x}")
    return sum((-1) ** j * math.comb(x, j) * math.comb(d - x, k - j) for j in range(0, k + 1))


def hypercube_distance_spectrum(d: int, t: int) -> list[int]:
    """Eigenvalues of the t-distance graph of the d-cube: ``K_t^(d)(i)`` with multiplicity ``C(d, i)``."""
    out: list[int] = []
    for i in range(d + 1):
        out.extend([krawtchouk(d, t, i)] * math.comb(d, i))
    return sorted(out, reverse=True)


def krawtchouk_min_check(d: int, k: int) -> tuple[int, bool]:
    """``(min_x K_k^(d)(x), min >= -(64k/d)^(k/2) C(d,k))`` for even ``k <= d/2``, exactly."""
    if k % 2 or not 1 <= k <= d / 2:
        raise OutOfRange(f"k must be even with 1 <= k <= d/2, got d={d}, k={k}")
    m = min(krawtchouk(d, k, x) for x in range(d + 1))
    h = k // 2
    # m >= -(64k)^h / d^h * C(d,k)  <=>  m d^h >= -(64k)^h C(d,k)
    return m, m * d ** h >= -((64 * k) ** h) * math.comb(d, k)


# ---------------------------------------------------------------------------
# diameter and equilateral nets


def diameter_bound_check(G: Graph) -> tuple[int, float, bool]:
    """``(diam, log_{1/gamma_plus} n + 1, diam <= bound)`` for a connected regular graph."""
    prof = spectral_profile(G)
    diam = G.diameter
    if not prof.gamma_plus < 1:
        return diam, math.inf, True
    bound = math.log(G.n) / math.log(1 / prof.gamma_plus) + 1
    return diam, bound, bool(diam <= bound + 1e-9)


@dataclass(frozen=True)
class NetResult:
    subset: PointSubset
    radius: float
    guarantee: float


def expander_net(G: Graph, alpha: float) -> NetResult:
    """Greedy ball carving with radius ``r = diam/alpha``.

    Vertices are taken in index order; each chosen vertex removes its closed
    ball of radius ``r``.  Chosen vertices are more than ``r`` apart, so the
    aspect ratio of the result is below ``alpha``, and a d-regular graph
    yields at least ``n / (3 (d-1)^(r+1))`` vertices.
    """
    if not alpha > 1:
        raise InvalidParameters(f"alpha must exceed 1, got {alpha}")
    d = G.require_regular()
    r = G.diameter / alpha
    D = G.distances
    alive = np.ones(G.n, dtype=bool)
    chosen: list[int] = []
    for v in range(G.n):
        if alive[v]:
            chosen.append(v)
            alive &= D[v] > r
    guarantee = G.n / (3 * (d - 1) ** (r + 1)) if d > 1 else 1.0
    return NetResult(PointSubset(tuple(chosen)), r, guarantee)


# ---------------------------------------------------------------------------
# random walks


def markov_drift(G: Graph, s: int, mode: str = "exact", trials: int = 10000, seed: int = 0) -> float:
    """``E[d_G(Z_s, Z_0)]`` for the stationary simple random walk (``pi_v ~ deg v``).

    ``mode="exact"`` propagates the full s-step distribution from every
    start vertex; ``mode="sampled"`` averages ``trials`` walks drawn from a
    PCG64 stream seeded with ``seed``.
    """
    s = int(s)
    if s < 1:
        raise InvalidParameters(f"s must be at least 1, got {s}")
    if not G.is_connected:
        raise DisconnectedGraph("random-walk drift needs a connected graph")
    deg = G.degrees.astype(np.float64)
    if np.any(deg == 0):
        raise InvalidParameters("isolated vertices have no walk")
    pi = deg / deg.sum()
    D = G.distances
    if mode == "exact":
        if G.n * s * max(1, int(G.adjacency.sum())) > 10 ** 10:
            raise StateSpaceTooLarge(f"n = {G.n}, s = {s} is too large for exact propagation")
        P = sparse.csr_matrix(G.adjacency / deg[:, None])
        Q = np.eye(G.n)
        for _ in range(s):
            Q = np.asarray(Q @ P)  # row v: distribution after each step from v
        return float(np.sum(pi[:, None] * Q * D))
    if mode != "sampled":
        raise InvalidParameters(f"mode must be 'exact' or 'sampled', got {mode!r}")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    nbrs = [np.repeat(np.arange(G.n), row) for row in G.adjacency]
    start = rng.choice(G.n, size=int(trials), p=pi)
    pos = start.copy()
    for _ in range(s):
        for i in range(len(pos)):
            nb = nbrs[pos[i]]
            pos[i] = nb[rng.integers(len(nb))]
    return float(D[start, pos].mean())


def walk_drift_bound(G: Graph, s: int) -> float:
    """``s (delta - 2)/delta`` with ``delta`` the average degree."""
    delta = float(G.degrees.mean())
    return s * (delta - 2) / delta

