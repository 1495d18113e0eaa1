"""Deterministic, seeded generators for the instance families.

Randomness comes from numpy's PCG64.  The stream for ``(seed, stream)`` is
``PCG64(SeedSequence(entropy=seed, spawn_key=(stream,)))``; retries of a
generator use consecutive stream indices, so every output is a pure
function of its parameters and seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from scipy.sparse.csgraph import shortest_path

from .composition import CompositionSpec, metric_composition
from .errors import (
    DTooLarge,
    InfeasibleDegree,
    InvalidParameters,
    RejectionLimit,
    RetryLimitExceeded,
)
from .metric import EmbeddingReport, FiniteMetric, PointSubset, build_metric, distortion
from .spectral import Graph, find_short_cycle

GENERATOR_NAME = "numpy.PCG64"
MAX_CUBE_DIM = 16
FAMILIES = ("hypercube", "random_regular", "high_girth_dense", "gv_code", "cycle", "path",
            "complete", "equilateral", "random_metric", "composed")


def rng_for(seed: int, stream: int = 0) -> np.random.Generator:
    """PCG64 generator for ``(seed, stream)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))))


@dataclass(frozen=True)
class InstanceSpec:
    """Family name, its parameters and a 64-bit seed."""

    family: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in FAMILIES:
            raise InvalidParameters(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise InvalidParameters(f"seed must be a 64-bit unsigned integer, got {self.seed}")

    def as_dict(self) -> dict:
        out = asdict(self)
        out["generator"] = GENERATOR_NAME
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "InstanceSpec":
        return cls(str(data["family"]), dict(data.get("params", {})), int(data.get("seed", 0)))


# ---------------------------------------------------------------------------
# graphs


def gen_hypercube(d: int) -> tuple[Graph, FiniteMetric]:
    """The d-cube: vertex ``i`` is the bit string of ``i``; the metric is Hamming distance."""
    d = int(d)
    if d < 1:
        raise InvalidParameters(f"d must be at least 1, got {d}")
    if d > MAX_CUBE_DIM:
        raise DTooLarge(f"d = {d} exceeds {MAX_CUBE_DIM}")
    n = 1 << d
    v = np.arange(n)
    x = v[:, None] ^ v[None, :]
    ham = np.zeros((n, n), dtype=np.int64)
    for b in range(d):
        ham += (x >> b) & 1
    G = Graph((ham == 1).astype(np.int64))
    dm = ham.astype(np.float64)
    dm.setflags(write=False)
    return G, FiniteMetric(dm, tuple(format(i, f"0{d}b") for i in range(n)))


def _pairing(n: int, d: int, rng: np.random.Generator) -> list[tuple[int, int]] | None:
    stubs = np.repeat(np.arange(n), d)
    rng.shuffle(stubs)
    pairs = stubs.reshape(-1, 2)
    seen: set[tuple[int, int]] = set()
    edges = []
    for u, v in pairs.tolist():
        if u == v:
            return None
        e = (min(u, v), max(u, v))
        if e in seen:
            return None
        seen.add(e)
        edges.append(e)
    return sorted(edges)


def gen_random_regular(n: int, d: int, seed: int = 0, *, min_girth: int | None = None,
                       max_tries: int = 10000) -> Graph:
    """Uniform simple d-regular graph via the pairing model with rejection.

    Pairings with loops or repeated edges are rejected; with ``min_girth``,
    graphs of smaller girth are rejected as well.  Attempt ``i`` draws from
    stream ``i`` of ``seed``.
    """
    n, d = int(n), int(d)
    if d < 3:
        raise InfeasibleDegree(f"d must be at least 3, got {d}")
    if (n * d) % 2 or d >= n:
        raise InfeasibleDegree(f"no simple {d}-regular graph on {n} vertices")
    for attempt in range(max_tries):
        edges = _pairing(n, d, rng_for(seed, attempt))
        if edges is None:
            continue
        G = Graph.from_edges(n, edges)
        if min_girth is not None and G.girth < min_girth:
            continue
        return G
    raise RejectionLimit(f"no acceptable pairing in {max_tries} attempts")


def expected_short_cycles(N: int, g: int) -> float:
    """Expected number of cycles of length ``3..g-1`` in ``G(N, p)``, ``p = 2 N^(-1 + 1/(2g))``."""
    p = 2 * N ** (-1 + 2 / (4 * g))
    return sum((N * p) ** k / (2 * k) for k in range(3, g))


def gen_high_girth_dense(N: int, g: int, seed: int = 0, *, max_retries: int = 50) -> Graph:
    """Dense graph of girth at least ``g`` on at least ``N/2`` vertices.

    A ``G(N, p)`` sample with ``p = 2 N^(-1 + 2 eta)``, ``eta = 1/(4g)``, is
    pruned by repeatedly deleting the highest-degree vertex (lowest index on
    ties) of a shortest cycle of length below ``g``.  Samples needing more
    than ``N/2`` deletions are redrawn from the next stream.  The returned
    graph is induced on the surviving vertices, relabelled in order.
    """
    N, g = int(N), int(g)
    if N < 2 or g < 3:
        raise InvalidParameters(f"need N >= 2 and g >= 3, got N={N}, g={g}")
    if expected_short_cycles(N, g) >= N / 4:
        raise InvalidParameters(f"N = {N} is too small for girth {g}: too many short cycles expected")
    p = min(1.0, 2 * N ** (-1 + 2 / (4 * g)))
    for attempt in range(max_retries):
        rng = rng_for(seed, attempt)
        upper = np.triu(rng.random((N, N)) < p, 1)
        a = (upper | upper.T).astype(np.int64)
        keep = np.ones(N, dtype=bool)
        removed = 0
        while removed <= N // 2:
            idx = np.flatnonzero(keep)
            H = Graph(a[np.ix_(idx, idx)])
            length, cyc = find_short_cycle(H, below=g)
            if not cyc:
                return H
            deg = H.degrees
            local = max(cyc, key=lambda v: (deg[v], -v))
            keep[idx[local]] = False
            removed += 1
    raise RetryLimitExceeded(f"no sample of girth {g} within {max_retries} retries")


# ---------------------------------------------------------------------------
# codes


def gv_sum(d: int, radius: int) -> int:
    """``sum_{m <= radius} C(d, m)``."""
    return sum(math.comb(d, m) for m in range(0, int(radius) + 1))


@dataclass(frozen=True)
class CodeResult:
    """Greedy code (as cube vertex indices) with its size bound and embedding report."""

    code: PointSubset
    d: int
    min_dist: int
    bound: float
    report: EmbeddingReport
    distortion_bound: float

    @property
    def size(self) -> int:
        return len(self.code)


def gv_code(d: int, min_dist: int) -> CodeResult:
    """Greedy lexicographic binary code of minimum Hamming distance ``min_dist``.

    Words are scanned as integers ``0..2^d-1`` and kept when they are far
    enough from every kept word.  The size is at least
    ``2^d / sum_{m <= min_dist} C(d, m)``.  ``report`` is the distortion of
    the coordinate map from (code, Hamming) into Euclidean space, whose
    distances are square roots of Hamming distances; it is at most
    ``sqrt(d / min_dist)``.
    """
    d, min_dist = int(d), int(min_dist)
    if d > MAX_CUBE_DIM:
        raise DTooLarge(f"d = {d} exceeds {MAX_CUBE_DIM}")
    if not 1 <= min_dist <= d:
        raise InvalidParameters(f"min_dist must lie in [1, {d}], got {min_dist}")
    code: list[int] = []
    words = np.zeros(0, dtype=np.int64)
    pop = np.array([bin(i).count("1") for i in range(1 << d)], dtype=np.int64)
    for w in range(1 << d):
        if len(words) == 0 or pop[words ^ w].min() >= min_dist:
            code.append(w)
            words = np.asarray(code, dtype=np.int64)
    bound = 2 ** d / gv_sum(d, min_dist)
    ham = pop[words[:, None] ^ words[None, :]].astype(np.float64)
    labels = tuple(format(w, f"0{d}b") for w in code)
    X = FiniteMetric(ham, labels)
    coords = ((words[:, None] >> np.arange(d)) & 1).astype(np.float64)
    eu = np.sqrt(((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2))
    Y = FiniteMetric(eu, labels)
    return CodeResult(PointSubset(tuple(code)), d, min_dist, bound, distortion(X, Y), math.sqrt(d / min_dist))


# ---------------------------------------------------------------------------
# small metric families


def cycle_metric(n: int) -> FiniteMetric:
    i = np.arange(n)
    diff = np.abs(i[:, None] - i[None, :])
    return build_metric(np.minimum(diff, n - diff).astype(np.float64))


def path_metric(n: int) -> FiniteMetric:
    i = np.arange(n)
    return build_metric(np.abs(i[:, None] - i[None, :]).astype(np.float64))


def equilateral_metric(n: int, scale: float = 1.0) -> FiniteMetric:
    return build_metric(scale * (1.0 - np.eye(n)))


def random_metric(n: int, seed: int = 0, *, low: float = 0.0, high: float = 1.0, stream: int = 0) -> FiniteMetric:
    """Shortest-path closure of a complete graph with iid ``U(low, high]`` edge weights."""
    n = int(n)
    if n < 1:
        raise InvalidParameters(f"n must be positive, got {n}")
    rng = rng_for(seed, stream)
    w = high - (high - low) * rng.random((n, n))  # values in (low, high]
    w = np.triu(w, 1)
    w = w + w.T
    d = shortest_path(w, method="FW", directed=False)
    np.fill_diagonal(d, 0.0)
    return build_metric(d)


def composed_metric(outer: int, inner: int, beta: float, seed: int = 0) -> FiniteMetric:
    """``beta``-composition of a random outer metric with random inner blocks."""
    M = random_metric(outer, seed, stream=0)
    blocks = []
    for z in range(outer):
        B = random_metric(inner, seed, stream=z + 1)
        blocks.append(FiniteMetric(B.d, tuple(str(z * inner + i) for i in range(inner))))
    Z = metric_composition(CompositionSpec(M, tuple(blocks), beta))
    return build_metric(Z.d, [str(i) for i in range(Z.n)])


def gen_misc(family: str, params: dict | None = None, seed: int = 0) -> FiniteMetric:
    """Metric families: cycle, path, complete, equilateral, random_metric, composed.

    ``complete`` is the complete graph's shortest-path metric, which is the
    equilateral space with unit distances; ``equilateral`` accepts a
    ``scale``.
    """
    params = dict(params or {})
    if family == "cycle":
        return cycle_metric(int(params["n"]))
    if family == "path":
        return path_metric(int(params["n"]))
    if family == "complete":
        return equilateral_metric(int(params["n"]))
    if family == "equilateral":
        return equilateral_metric(int(params["n"]), float(params.get("scale", 1.0)))
    if family == "random_metric":
        return random_metric(int(params["n"]), seed, low=float(params.get("low", 0.0)),
                             high=float(params.get("high", 1.0)))
    if family == "composed":
        return composed_metric(int(params["outer"]), int(params["inner"]), float(params.get("beta", 2.0)), seed)
    raise InvalidParameters(f"gen_misc does not handle family {family!r}")


@dataclass(frozen=True)
class Instance:
    """Generated object: always a metric, plus the graph for graph families."""

    spec: InstanceSpec
    metric: FiniteMetric
    graph: Graph | None = None
    extra: dict = field(default_factory=dict)


def generate(spec: InstanceSpec) -> Instance:
    """Build the instance described by ``spec``."""
    p, fam = spec.params, spec.family
    if fam == "hypercube":
        G, X = gen_hypercube(int(p["d"]))
        return Instance(spec, X, G)
    if fam == "random_regular":
        G = gen_random_regular(int(p["n"]), int(p["d"]), spec.seed,
                               min_girth=p.get("min_girth"))
        return Instance(spec, G.to_metric(), G, {"girth": G.girth})
    if fam == "high_girth_dense":
        G = gen_high_girth_dense(int(p["N"]), int(p["g"]), spec.seed)
        if G.is_connected:
            X = G.to_metric()
        else:  # keep the largest component so that a metric exists
            X = _largest_component_metric(G)
        return Instance(spec, X, G, {"girth": G.girth})
    if fam == "gv_code":
        res = gv_code(int(p["d"]), int(p["min_dist"]))
        G, H = gen_hypercube(int(p["d"]))
        return Instance(spec, H.sub(list(res.code.indices)), None,
                        {"code": list(res.code.indices), "bound": res.bound})
    return Instance(spec, gen_misc(fam, p, spec.seed))


def _largest_component_metric(G: Graph) -> FiniteMetric:
    from scipy.sparse.csgraph import connected_components

    _, lab = connected_components(G.adjacency > 0, directed=False)
    counts = np.bincount(lab)
    comp = np.flatnonzero(lab == int(np.argmax(counts)))
    return G.induced(comp).to_metric()


def grid(family: str, values: dict[str, list[Any]], seeds: list[int]) -> list[InstanceSpec]:
    """Cartesian product of parameter values and seeds, in a fixed order."""
    keys = sorted(values)
    out = []
    for combo in itertools.product(*(values[k] for k in keys)):
        for s in seeds:
            out.append(InstanceSpec(family, dict(zip(keys, combo)), s))
    return out
