"""Metric composition and the passage from k-HSTs to compositions.

A composition replaces every point ``z`` of an outer metric ``M`` by an inner
block ``N_z``.  Points in the same block keep their block distance; points in
different blocks ``x != y`` are ``beta * gamma * d_M(x, y)`` apart, where
``gamma = max diam(N_z) / min d_M``.  Blocks may themselves be compositions.

Composed points are ordered block by block, and labels are inherited from
the blocks, which lets callers thread original point ids through labels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Union

import numpy as np

from .errors import DegenerateComposition, DistortionPreconditionFailed, InvalidBeta
from .hst import HstTree, hst_metric
from .metric import (
    RTOL,
    EmbeddingReport,
    FiniteMetric,
    distortion,
)

Block = Union["CompositionSpec", FiniteMetric]


@dataclass(frozen=True, eq=False)
class CompositionSpec:
    """``outer`` with one block per outer point, dilated by ``beta``."""

    outer: FiniteMetric
    blocks: tuple[Block, ...]
    beta: Any

    def __post_init__(self) -> None:
        if len(self.blocks) != self.outer.n:
            raise DegenerateComposition(
                f"{len(self.blocks)} blocks for an outer space with {self.outer.n} points")
        if self.beta < Fraction(1, 2):
            raise InvalidBeta(f"beta must be at least 1/2, got {self.beta}")

    @property
    def gamma(self):
        """``max diam(N_z) / min d_M``."""
        if self.outer.n < 2:
            raise DegenerateComposition("outer space needs at least two points")
        diam = max(block_metric(b).diameter() for b in self.blocks)
        return diam / self.outer.min_distance()

    def sizes(self) -> list[int]:
        return [block_size(b) for b in self.blocks]


def block_metric(b: Block) -> FiniteMetric:
    return b if isinstance(b, FiniteMetric) else metric_composition(b)


def block_size(b: Block) -> int:
    return b.n if isinstance(b, FiniteMetric) else sum(block_size(c) for c in b.blocks)


def metric_composition(spec: CompositionSpec) -> FiniteMetric:
    """Materialize the composed metric of ``spec``."""
    inner = [block_metric(b) for b in spec.blocks]
    if spec.outer.n < 2:
        raise DegenerateComposition("outer space needs at least two points")
    if all(m.n <= 1 for m in inner):
        raise DegenerateComposition("all blocks are singletons, so gamma = 0")
    exact = spec.outer.exact or any(m.exact for m in inner)
    if exact:
        inner = [m.to_exact() for m in inner]
        outer = spec.outer.to_exact()
    else:
        outer = spec.outer
    gamma = max(m.diameter() for m in inner) / outer.min_distance()
    scale = spec.beta * gamma
    sizes = [m.n for m in inner]
    offs = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    N = int(offs[-1])
    if exact:
        d = np.empty((N, N), dtype=object)
        d[...] = Fraction(0)
    else:
        d = np.zeros((N, N))
    for x in range(outer.n):
        sx = slice(offs[x], offs[x + 1])
        d[sx, sx] = inner[x].d
        for y in range(outer.n):
            if x != y:
                d[sx, slice(offs[y], offs[y + 1])] = scale * outer.d[x, y]
    labels: list[str] = []
    for m in inner:
        labels.extend(m.labels)
    if len(set(labels)) != len(labels):
        labels = [f"{z}.{lab}" for z, m in enumerate(inner) for lab in m.labels]
    d.setflags(write=False)
    return FiniteMetric(d, tuple(labels))


# ---------------------------------------------------------------------------
# k-HST -> composition


@dataclass(frozen=True)
class CompositionResult:
    """Composition-structured metric ``Z`` equivalent to a subset of ``X``.

    ``structure`` is a :class:`CompositionSpec` (or a plain metric when the
    tree has a single level) whose base blocks are labelled by original point
    ids; ``metric`` is ``Z`` with rows in ``ids`` order (sorted ids), and
    ``report`` measures the identity map from ``X`` restricted to ``ids``
    onto ``Z``.
    """

    structure: Block
    metric: FiniteMetric
    ids: tuple[int, ...]
    report: EmbeddingReport
    beta: float

    def block_aspect_ratios(self) -> list[float]:
        out: list[float] = []

        def rec(b: Block) -> None:
            if isinstance(b, FiniteMetric):
                if b.n > 1:
                    out.append(float(b.diameter() / b.min_distance()))
                return
            out.append(float(b.outer.diameter() / b.outer.min_distance()))
            for c in b.blocks:
                rec(c)

        rec(self.structure)
        return out


def khst_to_composition(X: FiniteMetric, t: HstTree, alpha: float, beta: float, *,
                        log2_alpha: float | None = None) -> CompositionResult:
    """Re-metrize a subset of ``X`` that is alpha-equivalent to a k-HST, ``k >= alpha*beta``.

    For a vertex with children ``C`` the outer metric is
    ``d_M(u, v) = max {d_X(x, y) : x under u, y under v}``, whose aspect
    ratio is at most ``alpha``; the blocks are the recursively built spaces
    of the children.  Choosing the dilation ``1/gamma`` makes cross-block
    distances equal ``d_M``; the identity map has distortion at most
    ``1 + 2/beta`` and the diameter does not grow.  Leaf ids of ``t`` index
    rows of ``X``.
    """
    ids = t.leaf_ids()
    sub = X.sub(ids)
    tm = hst_metric(t, validate=False)
    if sub.exact:
        tm = tm.to_exact()
    rep = distortion(sub, tm)
    slack = 1.0 if sub.exact else 1.0 + RTOL
    la = math.log2(alpha) if log2_alpha is None else float(log2_alpha)
    if math.log2(float(rep.distortion)) > la + math.log2(slack):
        raise DistortionPreconditionFailed(
            f"tree distortion {float(rep.distortion):.6g} exceeds alpha = 2^{la:.6g}")
    log2_k = t.log2_k if t.log2_k is not None else math.log2(float(t.k))
    if len(ids) > 2 and log2_k < la + math.log2(beta) - 1e-9:
        raise DistortionPreconditionFailed(f"tree separation 2^{log2_k:.6g} is below alpha*beta")
    pos = {p: i for i, p in enumerate(ids)}
    below = t.leaves_below()
    D = sub.d

    def build(v: int) -> tuple[Block, list[int]]:
        # skip degenerate chains
        while t.leaf[v] < 0 and len(t.children[v]) == 1:
            v = t.children[v][0]
        if t.leaf[v] >= 0:
            p = t.leaf[v]
            z = np.zeros((1, 1), dtype=object if sub.exact else np.float64)
            if sub.exact:
                z[0, 0] = Fraction(0)
            return FiniteMetric(z, (str(p),)), [p]
        parts = [build(c) for c in t.children[v]]
        groups = [np.array([pos[x] for x in below[c]], dtype=np.int64) for c in t.children[v]]
        m = len(parts)
        dm = np.empty((m, m), dtype=object) if sub.exact else np.zeros((m, m))
        for a in range(m):
            dm[a, a] = Fraction(0) if sub.exact else 0.0
            for b in range(a + 1, m):
                val = D[np.ix_(groups[a], groups[b])].max()
                dm[a, b] = dm[b, a] = val
        dm.setflags(write=False)
        order: list[int] = []
        for _, o in parts:
            order.extend(o)
        if all(isinstance(b, FiniteMetric) and b.n == 1 for b, _ in parts):
            labels = tuple(b.labels[0] for b, _ in parts)
            return FiniteMetric(dm, labels), order
        outer = FiniteMetric(dm, tuple(str(i) for i in range(m)))
        diam = max(block_metric(b).diameter() for b, _ in parts)
        gamma = diam / outer.min_distance()
        spec = CompositionSpec(outer, tuple(b for b, _ in parts), 1 / gamma)
        return spec, order

    structure, _ = build(0)
    Zm = block_metric(structure)
    perm = np.argsort([int(lab) for lab in Zm.labels])
    Z = FiniteMetric(Zm.d[np.ix_(perm, perm)], tuple(Zm.labels[i] for i in perm))
    report = distortion(sub, Z)
    return CompositionResult(structure, Z, ids, report, beta)
