"""Hierarchically well-separated trees and tree surgery.

An :class:`HstTree` is stored as flat arrays in preorder with the root at
index 0.  Internal vertices carry a label ``delta > 0``; leaves carry a point
id (an index into some ambient metric) and ``delta = 0``.  The distance
between two leaves is the label of their least common ancestor.

Trees flagged ``exact`` satisfy ``delta(child) = delta(parent) / k`` on every
internal edge and may contain degenerate (single-child) vertices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Mapping, Sequence

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    DegenerateVertex,
    InvalidH,
    InvalidK,
    InvalidParameters,
    LabelMonotonicityViolation,
)
from .metric import (
    RTOL,
    EmbeddingReport,
    FiniteMetric,
    PointSubset,
    distortion,
    is_exact_array,
    to_fraction,
)

# relative guard used before taking floors/ceilings of float logarithms
LOG_GUARD = 1e-12


@dataclass(frozen=True, eq=False)
class HstTree:
    """Rooted labelled tree defining an ultrametric.

    Attributes
    ----------
    delta:
        Label per vertex (0 for leaves); float array or object array of Fractions.
    children:
        Child lists per vertex.
    leaf:
        Point id for leaves, ``-1`` for internal vertices.
    k:
        Claimed separation (``1`` for a plain ultrametric).  May be ``inf``
        when only ``log2_k`` is representable.
    exact:
        Whether every internal edge drops the label by exactly ``k``.
    log2_k:
        ``log2(k)``, kept alongside ``k`` so that astronomically large
        separations survive serialization.
    """

    delta: np.ndarray
    children: tuple[tuple[int, ...], ...]
    leaf: tuple[int, ...]
    k: Any = 1.0
    exact: bool = False
    log2_k: float | None = None

    def __post_init__(self) -> None:
        if self.log2_k is None:
            kf = float(self.k)
            object.__setattr__(self, "log2_k", math.log2(kf) if kf > 0 and math.isfinite(kf) else None)

    # -- basic structure -------------------------------------------------

    @property
    def n_nodes(self) -> int:
        return len(self.leaf)

    @property
    def arithmetic_exact(self) -> bool:
        return is_exact_array(self.delta)

    def is_leaf(self, v: int) -> bool:
        return self.leaf[v] >= 0

    def leaf_ids(self) -> tuple[int, ...]:
        """Sorted point ids of all leaves."""
        return tuple(sorted(i for i in self.leaf if i >= 0))

    @property
    def n_leaves(self) -> int:
        return sum(1 for i in self.leaf if i >= 0)

    def root_delta(self):
        return self.delta[0]

    def parents(self) -> np.ndarray:
        par = np.full(self.n_nodes, -1, dtype=np.int64)
        for v, ch in enumerate(self.children):
            for c in ch:
                par[c] = v
        return par

    def depths(self) -> np.ndarray:
        dep = np.zeros(self.n_nodes, dtype=np.int64)
        for v in range(self.n_nodes):  # preorder: parents precede children
            for c in self.children[v]:
                dep[c] = dep[v] + 1
        return dep

    def leaves_below(self) -> list[list[int]]:
        """For each vertex, the point ids of the leaves in its subtree."""
        out: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for v in range(self.n_nodes - 1, -1, -1):
            if self.leaf[v] >= 0:
                out[v] = [self.leaf[v]]
            else:
                acc: list[int] = []
                for c in self.children[v]:
                    acc.extend(out[c])
                out[v] = acc
        return out

    def to_nested(self, v: int = 0) -> Any:
        if self.leaf[v] >= 0:
            return {"leaf": int(self.leaf[v])}
        return {"delta": self.delta[v], "children": [self.to_nested(c) for c in self.children[v]]}

    # -- derived trees -----------------------------------------------------

    def scaled(self, factor) -> "HstTree":
        return HstTree(self.delta * factor, self.children, self.leaf, self.k, self.exact, self.log2_k)

    def relabel_leaves(self, mapping: Mapping[int, int] | Sequence[int]) -> "HstTree":
        leaf = tuple(int(mapping[i]) if i >= 0 else -1 for i in self.leaf)
        return HstTree(self.delta, self.children, leaf, self.k, self.exact, self.log2_k)

    def with_k(self, k, exact: bool | None = None, log2_k: float | None = None) -> "HstTree":
        return HstTree(self.delta, self.children, self.leaf, k,
                       self.exact if exact is None else exact, log2_k)

    def restrict(self, keep: Sequence[int], *, splice: bool = True) -> "HstTree":
        """Subtree spanned by the leaves with the given point ids.

        With ``splice=True`` single-child internal vertices are removed, which
        leaves the induced metric unchanged; the result is then flagged
        non-exact unless it still satisfies the exact condition.
        """
        keep_set = set(int(i) for i in keep)
        below = self.leaves_below()
        b = _Builder(self.arithmetic_exact)

        def rec(v: int, parent: int) -> None:
            if self.leaf[v] >= 0:
                b.add_leaf(parent, self.leaf[v])
                return
            live = [c for c in self.children[v] if any(x in keep_set for x in below[c])]
            if splice and len(live) == 1 and parent >= 0:
                rec(live[0], parent)
                return
            if splice and len(live) == 1 and parent < 0:
                # root with one live child: the child becomes the root
                rec(live[0], -1)
                return
            node = b.add_internal(parent, self.delta[v])
            for c in live:
                rec(c, node)

        rec(0, -1)
        out = b.build(self.k, exact=False, log2_k=self.log2_k)
        if self.exact and not splice:
            return HstTree(out.delta, out.children, out.leaf, self.k, True, self.log2_k)
        return out


class _Builder:
    """Incremental preorder tree builder."""

    def __init__(self, exact_arith: bool = False) -> None:
        self.delta: list[Any] = []
        self.children: list[list[int]] = []
        self.leaf: list[int] = []
        self.zero = Fraction(0) if exact_arith else 0.0
        self.exact_arith = exact_arith

    def _add(self, parent: int, delta, leaf: int) -> int:
        v = len(self.leaf)
        self.delta.append(delta)
        self.children.append([])
        self.leaf.append(leaf)
        if parent >= 0:
            self.children[parent].append(v)
        return v

    def add_internal(self, parent: int, delta) -> int:
        return self._add(parent, delta, -1)

    def add_leaf(self, parent: int, point: int) -> int:
        return self._add(parent, self.zero, int(point))

    def build(self, k: Any = 1.0, exact: bool = False, log2_k: float | None = None) -> HstTree:
        order = _preorder(self.children)
        pos = {v: i for i, v in enumerate(order)}
        if self.exact_arith:
            delta = np.empty(len(order), dtype=object)
            for i, v in enumerate(order):
                delta[i] = to_fraction(self.delta[v])
        else:
            delta = np.array([float(self.delta[v]) for v in order], dtype=np.float64)
        children = tuple(tuple(pos[c] for c in self.children[v]) for v in order)
        leaf = tuple(self.leaf[v] for v in order)
        return HstTree(delta, children, leaf, k, exact, log2_k)


def _preorder(children: list[list[int]]) -> list[int]:
    if not children:
        return []
    out, stack = [], [0]
    while stack:
        v = stack.pop()
        out.append(v)
        stack.extend(reversed(children[v]))
    return out


# ---------------------------------------------------------------------------
# constructors


def leaf_tree(point: int, exact_arith: bool = False) -> HstTree:
    b = _Builder(exact_arith)
    b.add_leaf(-1, point)
    return b.build()


def star_tree(points: Sequence[int], delta, k: Any = 1.0) -> HstTree:
    """Root labelled ``delta`` with one leaf per point."""
    pts = list(points)
    exact_arith = isinstance(delta, Fraction)
    if len(pts) == 1:
        return leaf_tree(pts[0], exact_arith)
    b = _Builder(exact_arith)
    r = b.add_internal(-1, delta)
    for p in pts:
        b.add_leaf(r, p)
    return b.build(k)


def tree_from_nested(node: Any, k: Any = 1.0, exact: bool = False, *,
                     exact_arith: bool = False) -> HstTree:
    """Build a tree from ``{"delta": x, "children": [...]}`` / ``{"leaf": id}`` dicts."""
    b = _Builder(exact_arith)

    def rec(nd: Any, parent: int) -> None:
        if "leaf" in nd:
            b.add_leaf(parent, int(nd["leaf"]))
            return
        v = b.add_internal(parent, to_fraction(nd["delta"]) if exact_arith else float(nd["delta"]))
        for c in nd["children"]:
            rec(c, v)

    rec(node, -1)
    t = b.build(k, exact=False)
    if exact:
        return _exactify_labels(t, k)
    return t


def tree_from_ultrametric(u: np.ndarray, ids: Sequence[int] | None = None, k: Any = 1.0) -> HstTree:
    """Nondegenerate tree whose leaf metric is the ultrametric matrix ``u``.

    At a vertex with label ``D = max u`` the children are the classes of the
    equivalence relation ``u(x, y) < D``.
    """
    n = u.shape[0]
    ids = list(range(n)) if ids is None else [int(i) for i in ids]
    exact_arith = is_exact_array(u)
    b = _Builder(exact_arith)

    def rec(idx: list[int], parent: int) -> None:
        if len(idx) == 1:
            b.add_leaf(parent, ids[idx[0]])
            return
        sub = u[np.ix_(idx, idx)]
        D = sub.max()
        v = b.add_internal(parent, D)
        remaining = list(range(len(idx)))
        while remaining:
            x = remaining[0]
            cls = [y for y in remaining if sub[x, y] < D]
            taken = set(cls)
            remaining = [y for y in remaining if y not in taken]
            rec([idx[y] for y in cls], v)

    if n:
        rec(list(range(n)), -1)
    return b.build(k)


def _exactify_labels(t: HstTree, k: Any) -> HstTree:
    """Recompute internal labels as ``delta(root) / k**depth`` and flag exact."""
    dep = t.depths()
    delta = t.delta.copy()
    root = t.delta[0]
    if t.arithmetic_exact:
        kk = to_fraction(k)
        for v in range(t.n_nodes):
            if t.leaf[v] < 0:
                delta[v] = root / kk ** int(dep[v])
    else:
        kf = float(k)
        for v in range(t.n_nodes):
            if t.leaf[v] < 0:
                delta[v] = float(root) / kf ** int(dep[v])
    return HstTree(delta, t.children, t.leaf, k, True, None if math.isfinite(float(k)) else t.log2_k)


# ---------------------------------------------------------------------------
# validation and metric


def validate_hst(t: HstTree, k: Any | None = None) -> None:
    """Check positivity, k-separation, exactness and nondegeneracy."""
    kk = t.k if k is None else k
    exact_arith = t.arithmetic_exact
    if exact_arith:
        kq = to_fraction(kk) if math.isfinite(float(kk)) else None
    for v in range(t.n_nodes):
        if t.leaf[v] >= 0:
            if t.children[v]:
                raise DegenerateVertex(f"leaf vertex {v} has children")
            continue
        ch = t.children[v]
        if not ch:
            raise DegenerateVertex(f"internal vertex {v} has no children")
        if len(ch) == 1 and not t.exact:
            raise DegenerateVertex(f"internal vertex {v} has a single child")
        if not t.delta[v] > 0:
            raise LabelMonotonicityViolation(f"internal vertex {v} has nonpositive label {t.delta[v]}")
        for c in ch:
            if t.leaf[c] >= 0:
                continue
            dp, dc = t.delta[v], t.delta[c]
            if exact_arith and kq is not None:
                ok = dc * kq <= dp
                eq = dc * kq == dp
            else:
                ratio = math.log2(float(dp)) - math.log2(float(dc)) if float(dc) > 0 else math.inf
                lk = t.log2_k if k is None and t.log2_k is not None else math.log2(float(kk))
                slack = math.log2(1.0 + RTOL)
                ok = ratio >= lk - slack
                eq = abs(ratio - lk) <= max(slack, 1e-9 * abs(lk))
            if not ok:
                raise LabelMonotonicityViolation(
                    f"edge ({v},{c}): child label {dc} exceeds parent label {dp} / k (k = {kk})"
                )
            if t.exact and not eq:
                raise LabelMonotonicityViolation(
                    f"edge ({v},{c}): exact tree requires child label {dp}/k, found {dc}"
                )
    ids = [i for i in t.leaf if i >= 0]
    if len(set(ids)) != len(ids):
        raise InvalidParameters("leaf ids must be distinct")


def hst_metric(t: HstTree, *, validate: bool = True, k: Any | None = None) -> FiniteMetric:
    """Leaf metric of ``t`` with rows ordered by sorted leaf id.

    Validates the tree against its declared ``k`` (or the override ``k``).
    """
    if validate:
        validate_hst(t, k)
    ids = t.leaf_ids()
    pos = {p: i for i, p in enumerate(ids)}
    n = len(ids)
    if t.arithmetic_exact:
        d = np.empty((n, n), dtype=object)
        d[...] = Fraction(0)
    else:
        d = np.zeros((n, n))
    below = t.leaves_below()
    # preorder: every vertex is visited after its ancestors, so the label of
    # the lowest common ancestor is the last one written to each block
    for v in _preorder(t.children):
        if t.leaf[v] >= 0 or len(t.children[v]) < 2:
            continue
        g = np.array([pos[x] for x in below[v]], dtype=np.int64)
        d[np.ix_(g, g)] = t.delta[v]
    np.fill_diagonal(d, Fraction(0) if t.arithmetic_exact else 0.0)
    d.setflags(write=False)
    return FiniteMetric(d, tuple(str(i) for i in ids))


def tree_distortion(X: FiniteMetric, t: HstTree) -> EmbeddingReport:
    """Distortion of the map sending point ``i`` of X to the leaf with id ``i``."""
    ids = t.leaf_ids()
    return distortion(X.sub(ids), hst_metric(t, validate=False))


# ---------------------------------------------------------------------------
# Exact k-HST


def _power_index(ratio, k) -> int:
    """Largest integer i >= 0 with ``k**i <= ratio`` (guarded for floats)."""
    i = 0
    if isinstance(ratio, Fraction) and isinstance(k, Fraction):
        p = k
        while p <= ratio:
            i += 1
            p *= k
        return i
    r, kf = float(ratio), float(k)
    if r < kf * (1 - LOG_GUARD):
        return 0
    i = int(math.floor(math.log(r) / math.log(kf) + LOG_GUARD))
    while kf ** (i + 1) <= r * (1 + LOG_GUARD):
        i += 1
    while i > 0 and kf ** i > r * (1 + LOG_GUARD):
        i -= 1
    return i


def exact_k_hst(t: HstTree, k: Any) -> tuple[HstTree, EmbeddingReport]:
    """Relabel an ultrametric tree into an exact k-HST with distortion at most k.

    Walking top-down, a child ``v`` of ``u`` with ``k**i <= D'(u)/D(v) < k**(i+1)``
    is relabelled ``D'(u)/k**i`` and the edge is replaced by a chain of
    ``i`` edges; ``i = 0`` merges ``v`` into ``u``.  Least common ancestors
    are preserved and every label grows by a factor in ``[1, k)``.
    """
    if not float(k) > 1:
        raise InvalidK(f"k must exceed 1, got {k}")
    exact_arith = t.arithmetic_exact
    kk = to_fraction(k) if exact_arith else float(k)
    if t.n_nodes == 1:
        return t.with_k(k, exact=True), EmbeddingReport.trivial(exact_arith)
    b = _Builder(exact_arith)

    def emit(v: int, node: int, label) -> None:
        for c in t.children[v]:
            if t.leaf[c] >= 0:
                b.add_leaf(node, t.leaf[c])
                continue
            i = _power_index(label / t.delta[c], kk)
            if i == 0:
                emit(c, node, label)
                continue
            cur, lab = node, label
            for _ in range(i):
                lab = lab / kk
                cur = b.add_internal(cur, lab)
            emit(c, cur, lab)

    root = b.add_internal(-1, t.delta[0])
    emit(0, root, t.delta[0])
    out = _exactify_labels(b.build(k), k)
    report = distortion(hst_metric(t, validate=False), hst_metric(out, validate=False))
    return out, report


# ---------------------------------------------------------------------------
# Euclidean embedding


def embed_l2(t: HstTree) -> np.ndarray:
    """Isometric embedding of the leaf metric into Euclidean space.

    Each subtree with label ``D`` is placed on a sphere of radius ``D/sqrt(2)``
    around the origin of its own coordinate block.  At a vertex with label
    ``D``, child ``j`` (radius ``R_j``) gets a fresh coordinate with offset
    ``sqrt(D^2/2 - R_j^2)``; children occupy orthogonal blocks, so leaves in
    different children are exactly ``D`` apart.  Rows follow sorted leaf id.
    """
    ids = t.leaf_ids()
    n = len(ids)
    pos = {p: i for i, p in enumerate(ids)}
    delta = t.delta.astype(np.float64) if t.arithmetic_exact else t.delta
    # count coordinates: one fresh coordinate per non-root vertex
    dim = max(t.n_nodes - 1, 1)
    X = np.zeros((n, dim))
    below = t.leaves_below()
    radius = np.zeros(t.n_nodes)
    for v in range(t.n_nodes):
        if t.leaf[v] < 0:
            radius[v] = delta[v] / math.sqrt(2.0)
    # vertex v (non-root) owns coordinate v - 1
    for v in range(t.n_nodes):
        for c in t.children[v]:
            shift = math.sqrt(max(delta[v] ** 2 / 2.0 - radius[c] ** 2, 0.0))
            rows = [pos[x] for x in below[c]]
            X[rows, c - 1] += shift
    return X


# ---------------------------------------------------------------------------
# n-equivalent ultrametric


def naive_ultrametric(X: FiniteMetric, ids: Sequence[int] | None = None
                      ) -> tuple[HstTree, np.ndarray, EmbeddingReport]:
    """Noncontractive ultrametric with distortion at most ``n`` and equal diameter.

    Points closer than ``diam/|M|`` are joined; each connected component is
    handled recursively and the components hang below a root labelled
    ``diam(M)``.  Returns the tree (leaf ids are ``ids`` or ``0..n-1``), the
    identity map and the distortion report.
    """
    n = X.n
    pid = list(range(n)) if ids is None else [int(i) for i in ids]
    b = _Builder(X.exact)

    def rec(idx: np.ndarray, parent: int) -> None:
        if len(idx) == 1:
            b.add_leaf(parent, pid[int(idx[0])])
            return
        sub = X.d[np.ix_(idx, idx)]
        diam = sub.max()
        adj = sub < diam / len(idx)
        np.fill_diagonal(adj, False)
        _, comp = connected_components(adj.astype(np.int8), directed=False)
        v = b.add_internal(parent, diam)
        for c in range(comp.max() + 1):
            rec(idx[comp == c], v)

    rec(np.arange(n), -1)
    t = b.build()
    report = distortion(X.sub(range(n)), hst_metric(t, validate=False)) if n else EmbeddingReport.trivial()
    return t, np.asarray(pid, dtype=np.int64), report


# ---------------------------------------------------------------------------
# periodically sparse subtrees


@dataclass(frozen=True)
class SparseSubtree:
    """Result of the periodic sparsification dynamic program.

    ``nodes`` are vertices of the input tree kept in the subtree, ``leaves``
    the kept point ids, and ``residue`` the depth class ``i`` at which every
    kept vertex has at most one kept child.
    """

    leaves: tuple[int, ...]
    nodes: tuple[int, ...]
    residue: int
    value: float
    values_by_residue: tuple[float, ...]


def _weights_by_id(t: HstTree, leaf_weights: Any) -> dict[int, float]:
    ids = t.leaf_ids()
    if leaf_weights is None:
        return {i: 1.0 for i in ids}
    if isinstance(leaf_weights, Mapping):
        w = {int(i): float(leaf_weights[i]) for i in ids}
    else:
        arr = np.asarray(leaf_weights, dtype=np.float64)
        if arr.shape == (len(ids),):
            w = {i: float(arr[j]) for j, i in enumerate(ids)}
        else:
            w = {i: float(arr[i]) for i in ids}
    if any(not v > 0 for v in w.values()):
        raise InvalidParameters("leaf weights must be strictly positive")
    return w


def _periodic_dp(t: HstTree, w: dict[int, float], h: int, leaf_exp: float, branch_when_zero: bool):
    """Shared DP for the two periodic selection rules.

    ``branch_when_zero=False``: vertices at depth = i (mod h) must be
    degenerate (``f_0 = max_j f_{h-1}``, ``f_i = sum_j f_{i-1}``).
    ``branch_when_zero=True``: vertices may branch only at depth = i
    (``g_0 = sum_j g_{h-1}``, ``g_i = max_j g_{i-1}``).
    Returns per-vertex value table and the argmax child table.
    """
    m = t.n_nodes
    f = np.zeros((m, h))
    arg = np.full((m, h), -1, dtype=np.int64)
    for v in range(m - 1, -1, -1):
        if t.leaf[v] >= 0:
            f[v, :] = w[t.leaf[v]] ** leaf_exp
            continue
        ch = np.asarray(t.children[v], dtype=np.int64)
        for i in range(h):
            prev = f[ch, (i - 1) % h]
            choose_one = (i == 0) != branch_when_zero
            if choose_one:
                j = int(np.argmax(prev))
                f[v, i] = prev[j]
                arg[v, i] = ch[j]
            else:
                f[v, i] = prev.sum()
    return f, arg


def _trace_selection(t: HstTree, arg: np.ndarray, h: int, residue: int) -> tuple[list[int], list[int]]:
    nodes, leaves = [], []
    stack = [(0, residue)]
    while stack:
        v, i = stack.pop()
        nodes.append(v)
        if t.leaf[v] >= 0:
            leaves.append(t.leaf[v])
            continue
        nxt = (i - 1) % h
        if arg[v, i] >= 0:
            stack.append((int(arg[v, i]), nxt))
        else:
            for c in t.children[v]:
                stack.append((c, nxt))
    return sorted(nodes), sorted(leaves)


def periodically_sparse_subtree(t: HstTree, leaf_weights: Any, h: int) -> SparseSubtree:
    """Heaviest h-periodically sparse subtree for the objective ``sum w^((h-1)/h)``.

    ``f_i(T)`` is the best value over subtrees in which every vertex at a
    depth congruent to ``i`` mod ``h`` keeps a single child.  The product of
    the ``h`` values dominates ``(sum w)^(h-1)``, so the best residue meets
    the weighted guarantee.
    """
    if int(h) != h or h <= 1:
        raise InvalidH(f"h must be an integer > 1, got {h}")
    h = int(h)
    w = _weights_by_id(t, leaf_weights)
    f, arg = _periodic_dp(t, w, h, (h - 1) / h, branch_when_zero=False)
    residue = int(np.argmax(f[0]))
    nodes, leaves = _trace_selection(t, arg, h, residue)
    return SparseSubtree(tuple(leaves), tuple(nodes), residue, float(f[0, residue]),
                         tuple(float(x) for x in f[0]))


def periodically_branching_subtree(t: HstTree, leaf_weights: Any, h: int) -> SparseSubtree:
    """Heaviest subtree branching only at depths congruent to some ``i`` mod ``h``.

    Objective ``sum w^(1/h)``; the product of the ``h`` residue values
    dominates ``sum w``.  ``h = 1`` keeps the whole tree.
    """
    if int(h) != h or h < 1:
        raise InvalidH(f"h must be a positive integer, got {h}")
    h = int(h)
    w = _weights_by_id(t, leaf_weights)
    f, arg = _periodic_dp(t, w, h, 1.0 / h, branch_when_zero=True)
    residue = int(np.argmax(f[0]))
    nodes, leaves = _trace_selection(t, arg, h, residue)
    return SparseSubtree(tuple(leaves), tuple(nodes), residue, float(f[0, residue]),
                         tuple(float(x) for x in f[0]))


# ---------------------------------------------------------------------------
# ultrametric -> k-HST


@dataclass(frozen=True)
class KhstResult:
    """Subset of leaves equivalent to an exact k-HST.

    ``report`` measures the map from the input tree's leaf metric (restricted
    to ``subset``) onto ``tree``; it is noncontractive.  ``psi`` is the
    weighted-guarantee exponent, ``h`` and ``s`` the level parameters.
    """

    subset: PointSubset
    tree: HstTree
    report: EmbeddingReport
    psi: float
    h: int
    s: float
    residue: int
    route: str


def um_to_khst(
    t: HstTree,
    leaf_weights: Any,
    k: float,
    alpha: float,
    *,
    log2_k: float | None = None,
    log2_alpha: float | None = None,
) -> KhstResult:
    """Extract leaves of an ultrametric tree that are alpha-equivalent to an exact k-HST.

    With ``h = ceil(log_{k/alpha} alpha)`` and ``s = k^(1/h)``: relabel into
    an exact s-HST, keep an h-periodically sparse subtree, shift so the
    sparse depth class is ``h-1`` and collapse every block of ``h`` levels.
    Distortion is at most ``s^(h-1) <= alpha`` with exponent ``1 - 1/h``.

    When ``h = 1`` (``k >= alpha^2``) no sparse class exists; instead with
    ``h' = ceil(log_alpha k)`` and ``s = k^(1/h')`` the kept subtree may
    branch only at depths in one residue class mod ``h'``.  Collapsing those
    levels is isometric, the total distortion is ``s <= alpha`` and the
    exponent is ``1/h'``.
    """
    lk = math.log2(k) if log2_k is None else float(log2_k)
    if log2_alpha is not None:
        la = float(log2_alpha)
    else:
        la = math.log2(alpha) if alpha > 0 else -math.inf
    if not la > 0 or not lk > la:
        raise InvalidParameters(f"need k > alpha > 1, got k = 2^{lk:.6g}, alpha = {alpha}")
    exact_arith = t.arithmetic_exact
    if exact_arith:
        t = HstTree(t.delta.astype(np.float64), t.children, t.leaf, t.k, t.exact, t.log2_k)
    ids_all = t.leaf_ids()
    k_out = 2.0 ** lk if lk < 1023 else math.inf
    if len(ids_all) <= 1:
        tree = t.with_k(k_out, exact=True, log2_k=lk)
        return KhstResult(PointSubset(ids_all), tree, EmbeddingReport.trivial(), 1.0, 1, float(k_out), 0, "trivial")

    h = max(1, math.ceil(la / (lk - la) - LOG_GUARD))
    if h >= 2:
        route = "sparse"
        levels = h
        s_log = lk / h
    else:
        route = "branching"
        levels = max(1, math.ceil(lk / la - LOG_GUARD))
        s_log = lk / levels
    s = 2.0 ** s_log
    Y, _ = exact_k_hst(t, s)
    depth = Y.depths()
    if route == "sparse":
        sel = periodically_sparse_subtree(Y, leaf_weights, levels)
        psi = 1.0 - 1.0 / levels
        shift = levels - 1 - sel.residue
    else:
        sel = periodically_branching_subtree(Y, leaf_weights, levels)
        psi = 1.0 / levels
        shift = -sel.residue
    keep = list(sel.leaves)
    m = len(keep)
    # lca depth of kept leaves inside Y
    par = Y.parents()
    leaf_node = {Y.leaf[v]: v for v in range(Y.n_nodes) if Y.leaf[v] >= 0}
    anc = {}
    for p in keep:
        chain = []
        v = leaf_node[p]
        while v >= 0:
            chain.append(v)
            v = int(par[v])
        anc[p] = chain[::-1]
    log_root = math.log2(float(Y.delta[0]))
    d = np.zeros((m, m))
    for a in range(m):
        ca = anc[keep[a]]
        for bb in range(a + 1, m):
            cb = anc[keep[bb]]
            q = 0
            while q + 1 < len(ca) and q + 1 < len(cb) and ca[q + 1] == cb[q + 1]:
                q += 1
            q = int(depth[ca[q]])
            if route == "sparse":
                qq = q + shift
                expo = shift - levels * (qq // levels)
            else:
                expo = -q
            val = 2.0 ** (log_root + expo * s_log)
            if not val > 0 or not math.isfinite(val):
                raise InvalidParameters("collapsed labels leave the floating-point range")
            d[a, bb] = d[bb, a] = val
    out = tree_from_ultrametric(d, keep)
    out = _khst_from_powers(out, lk)
    sub = hst_metric(t, validate=False).sub([ids_all.index(p) for p in keep])
    report = distortion(sub, hst_metric(out, validate=False))
    return KhstResult(PointSubset(keep), out, report, psi, levels, s, sel.residue, route)


def _khst_from_powers(t: HstTree, lk: float) -> HstTree:
    """Insert chain vertices so that labels (ratios are powers of k) drop by exactly k."""
    if t.n_nodes == 1:
        return t.with_k(2.0 ** lk if lk < 1023 else math.inf, exact=True, log2_k=lk)
    b = _Builder(False)

    def emit(v: int, node: int, log_label: float) -> None:
        for c in t.children[v]:
            if t.leaf[c] >= 0:
                b.add_leaf(node, t.leaf[c])
                continue
            steps = int(round((log_label - math.log2(float(t.delta[c]))) / lk))
            cur, lab = node, log_label
            for _ in range(max(steps, 1)):
                lab -= lk
                cur = b.add_internal(cur, 2.0 ** lab)
            emit(c, cur, lab)

    log_root = math.log2(float(t.delta[0]))
    r = b.add_internal(-1, t.delta[0])
    emit(0, r, log_root)
    k_out = 2.0 ** lk if lk < 1023 else math.inf
    return b.build(k_out, exact=True, log2_k=lk)
