"""Constructive Ramsey extraction into ultrametrics and k-HSTs.

Every extractor returns an :class:`ExtractionResult` whose distortion report
is recomputed from scratch against the input metric, together with both
sides of the weighted Ramsey condition ``sum_Y w^psi >= (sum_X w)^psi``.

Building blocks
---------------
* :func:`ramsey_core` -- shell decomposition for q-decomposable weights
  (distortion ``4t``).
* :func:`ramsey_phi` -- general weights via :func:`decompose_sequence`.
* :func:`weighted_equilateral` -- equilateral subsets for general weights.
* :func:`composition_lift` -- lifts an extractor through a composition.
* :func:`refine` -- halves the distortion of an existing extraction.
* :func:`small_alpha_extract` -- the ``2 + eps`` pipeline.
* :func:`ramsey_extract` -- the driver combining all of the above.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Sequence

import numpy as np

from .composition import Block, CompositionResult, CompositionSpec, khst_to_composition
from .errors import (
    AlphaAtMostTwo,
    AlphaTooSmall,
    DistortionPreconditionFailed,
    InvalidParameters,
    NotDecomposable,
    SeparationTooSmall,
    TTooSmall,
    warn_alpha_at_most_two,
)
from .hst import (
    HstTree,
    LOG_GUARD,
    _Builder,
    hst_metric,
    leaf_tree,
    naive_ultrametric,
    star_tree,
    tree_from_ultrametric,
    um_to_khst,
    validate_hst,
)
from .metric import (
    ORACLE_CAP,
    RTOL,
    EmbeddingReport,
    FiniteMetric,
    PointSubset,
    WeightedMetric,
    aspect_ratio,
    distortion,
    exact_ramsey_oracle,
    subdominant_ultrametric,
    to_fraction,
)
from .sequences import (
    balance_binary,
    certified_exponent,
    decompose_sequence,
    is_q_decomposable,
    weighted_sides,
)

#: default constant for the 2 + eps pipeline (stage one runs at theta / 2)
DEFAULT_THETA = 32.0
#: largest eps for which the 2 + eps pipeline keeps its separation condition
MAX_PIPELINE_EPS = 3.0


# ---------------------------------------------------------------------------
# results


@dataclass
class ExtractionResult:
    """A subset together with a tree it embeds into.

    Leaf ids of ``tree`` are indices of the input metric; ``subset`` lists
    the same ids.  ``report`` is the recomputed distortion of the identity
    map from the induced subspace onto the tree metric.  ``guaranteed`` is
    false when a step ran outside the parameter range of its proof, in which
    case ``psi`` has been lowered to a value certified on this instance.
    """

    subset: PointSubset
    tree: HstTree
    report: EmbeddingReport
    psi: float
    weighted_lhs: float
    weighted_rhs: float
    weighted_ok: bool
    alpha: float
    guaranteed: bool = True
    method: str = ""
    trace: list[dict] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.subset)

    @property
    def map(self) -> dict[int, int]:
        """Bijection from subset indices to leaf ids (the identity on ids)."""
        return {i: i for i in self.subset.indices}

    def distortion_ok(self, bound: float | None = None) -> bool:
        bound = self.alpha if bound is None else bound
        d = self.report.distortion
        if isinstance(d, Fraction):
            return d <= to_fraction(bound)
        return float(d) <= float(bound) * (1 + RTOL)


@dataclass(frozen=True)
class Extractor:
    """A weighted extractor with its distortion ``alpha`` and output separation ``k``."""

    name: str
    alpha: float
    k: float
    fn: Callable[[WeightedMetric], ExtractionResult]

    def __call__(self, wm: WeightedMetric) -> ExtractionResult:
        return self.fn(wm)


def _weights_of(X: FiniteMetric, weights: Any) -> np.ndarray:
    if weights is None:
        return WeightedMetric.uniform(X).w
    if isinstance(weights, WeightedMetric):
        return weights.w
    w = np.asarray(weights)
    if w.dtype == object:
        w = np.array([to_fraction(v) for v in w], dtype=object)
    return WeightedMetric(X, w).w


def _float_weights(w: np.ndarray) -> np.ndarray:
    return np.asarray([float(v) for v in w], dtype=np.float64)


def _tree_distortion(X: FiniteMetric, ids: Sequence[int], tree: HstTree) -> EmbeddingReport:
    sub = X.sub(ids)
    tm = hst_metric(tree, validate=False)
    if sub.exact and not tm.exact:
        tm = tm.to_exact()
    return distortion(sub, tm)


def finalize(
    X: FiniteMetric,
    w: np.ndarray,
    tree: HstTree,
    psi: float,
    alpha: float,
    *,
    guaranteed: bool = True,
    method: str = "",
    trace: list[dict] | None = None,
    validate_k: Any | None = None,
) -> ExtractionResult:
    """Recompute distortion and the weighted condition for ``tree`` over ``X``.

    When the claimed exponent fails the weighted condition on a step that is
    not covered by a proof, the exponent is lowered to the certified value.
    """
    ids = tree.leaf_ids()
    validate_hst(tree, validate_k)
    report = _tree_distortion(X, ids, tree)
    exact = X.exact
    w_sub = [w[i] for i in ids]
    lhs, rhs = weighted_sides(w_sub, list(w), psi)
    ok = bool(lhs >= rhs) if exact else bool(lhs >= rhs * (1 - 1e-9))
    if not ok and not guaranteed:
        psi = certified_exponent(w_sub, list(w), upper=psi)
        lhs, rhs = weighted_sides(w_sub, list(w), psi)
        ok = bool(lhs >= rhs)
    return ExtractionResult(
        subset=PointSubset(ids),
        tree=tree,
        report=report,
        psi=float(psi),
        weighted_lhs=float(lhs),
        weighted_rhs=float(rhs),
        weighted_ok=ok,
        alpha=float(alpha),
        guaranteed=guaranteed,
        method=method,
        trace=list(trace or []),
    )


# ---------------------------------------------------------------------------
# tree utilities


def tighten_ultrametric(t: HstTree, X: FiniteMetric) -> HstTree:
    """Lower every label to the diameter of the leaves below it, then merge equal labels.

    The result stays a noncontractive ultrametric on the same leaves and
    never has larger expansion.
    """
    if t.n_nodes == 1:
        return t
    below = t.leaves_below()
    delta = t.delta.copy()
    for v in range(t.n_nodes):
        if t.leaf[v] < 0:
            idx = np.asarray(below[v], dtype=np.int64)
            delta[v] = X.d[np.ix_(idx, idx)].max()
    return merge_equal_labels(HstTree(delta, t.children, t.leaf, t.k, False, t.log2_k))


def merge_equal_labels(t: HstTree) -> HstTree:
    """Splice out internal children whose label equals their parent's."""
    if t.n_nodes == 1:
        return t
    b = _Builder(t.arithmetic_exact)

    def emit(v: int, node: int) -> None:
        for c in t.children[v]:
            if t.leaf[c] >= 0:
                b.add_leaf(node, t.leaf[c])
            elif t.delta[c] == t.delta[v] or len(t.children[c]) == 1:
                emit(c, node)
            else:
                emit(c, b.add_internal(node, t.delta[c]))

    r = b.add_internal(-1, t.delta[0])
    emit(0, r)
    return b.build(t.k, exact=False, log2_k=t.log2_k)


def whole_space_tree(X: FiniteMetric) -> tuple[HstTree, Any]:
    """Noncontractive ultrametric on all of X with optimal distortion ``c_um``.

    The tree is the subdominant ultrametric scaled by ``c_um = max d/u``.
    """
    if X.n == 1:
        return leaf_tree(0, X.exact), (Fraction(1) if X.exact else 1.0)
    u, c = subdominant_ultrametric(X)
    return tree_from_ultrametric(u * c), c


def _star_on(X: FiniteMetric, ids: Sequence[int]) -> HstTree:
    ids = list(ids)
    if len(ids) == 1:
        return leaf_tree(ids[0], X.exact)
    idx = np.asarray(ids, dtype=np.int64)
    return star_tree(ids, X.d[np.ix_(idx, idx)].max())


def _local_to_global(t: HstTree, ids: Sequence[int]) -> HstTree:
    return t.relabel_leaves(list(ids))


# ---------------------------------------------------------------------------
# shell decomposition


def core_exponent(t: int, q: float, phi: float) -> float:
    """``[t log2(4 q phi)]^(-2/t)``."""
    return (t * math.log2(4.0 * q * phi)) ** (-2.0 / t)


def ramsey_core(wm: WeightedMetric, t: int, q: float, *, strict: bool = True) -> ExtractionResult:
    """Shell decomposition for q-decomposable weights.

    Points are split into heavy ones (weight at least ``w(M)/q``) and a
    constant level.  A center ``x0`` is chosen (a far heavy point when the
    heavy points are spread out, otherwise a point far from all heavy
    points) and the smallest ``i`` in ``1..t`` is taken for which the inner
    part ``A = {x0} + B(x0, (i-1) diam/4t)`` and the outer part
    ``B = M - B(x0, i diam/4t)`` satisfy the balancing inequality.  Both
    parts are handled recursively under a root labelled ``diam(M)``; the
    shell in between is discarded.  The result is noncontractive and
    ``4t``-Lipschitz with exponent ``[t log2(4 q Phi)]^(-2/t)``.

    ``strict=False`` admits ``t < 8`` and falls back to the best available
    split when no index meets the inequality; the exponent is then certified
    on the instance instead of claimed.
    """
    t = int(t)
    if strict and t < 8:
        raise TTooSmall(f"t must be at least 8, got {t}")
    if t < 2:
        raise TTooSmall(f"t must be at least 2, got {t}")
    if not q >= 2:
        raise InvalidParameters(f"q must be at least 2, got {q}")
    X = wm.base
    w_all = wm.w
    wf = _float_weights(w_all)
    if X.n and not is_q_decomposable(wf, q):
        raise NotDecomposable("weights are not q-decomposable")
    phi = float(aspect_ratio(X))
    psi = core_exponent(t, q, phi)
    lq = math.log2(q)
    e_chain = lq ** (-1.0 / (t - 1))
    state = {"guaranteed": strict}
    exact = X.exact
    D = X.d

    def split(idx: np.ndarray) -> tuple[np.ndarray, np.ndarray, Any]:
        sub = D[np.ix_(idx, idx)]
        m = len(idx)
        diam = sub.max()
        mind = sub[np.triu_indices(m, 1)].min()
        ph = float(diam / mind)
        b_full, b_half = core_exponent(t, q, ph), core_exponent(t, q, ph / 2)
        ww = wf[idx] / wf[idx].sum()
        heavy = np.flatnonzero(ww >= (1.0 / q) * (1 - 1e-12))
        unit = diam / (4 * t)
        half = diam / 2
        quarter = diam / 4

        def evaluate(x0: int, i: int) -> tuple[float, np.ndarray, np.ndarray]:
            row = sub[x0]
            inner = np.asarray(row < (i - 1) * unit, dtype=bool)
            inner[x0] = True
            outer = ~np.asarray(row < i * unit, dtype=bool)
            wA = ww[inner].sum()
            mA = ww[inner].max()
            wB = ww[outer].sum()
            lhs = max(wA ** b_half / mA ** (b_half - b_full), wA ** e_chain) + wB
            return lhs, np.flatnonzero(inner), np.flatnonzero(outer)

        centers: list[int] = []
        if len(heavy) and sub[np.ix_(heavy, heavy)].max() > half:
            hs = sub[np.ix_(heavy, heavy)]
            a, b = np.argwhere(hs > half)[0]
            x, y = int(heavy[a]), int(heavy[b])
            bx = ww[np.asarray(sub[x] < quarter, dtype=bool)].sum()
            centers = [x] if bx <= 0.5 * (1 + 1e-12) else [y]
        elif len(heavy):
            dist_to_heavy = np.array([sub[j, heavy].min() for j in range(m)], dtype=object)
            centers = [int(np.argmax(dist_to_heavy))]
        else:
            centers = [int(np.argmax(np.array([sub[j].max() for j in range(m)], dtype=object)))]
        for x0 in centers:
            for i in range(1, t + 1):
                lhs, A, B = evaluate(x0, i)
                if len(B) and lhs >= 1 - 1e-12:
                    return A, B, diam
        state["guaranteed"] = False
        best = None
        for x0 in range(m):
            for i in range(1, t + 1):
                lhs, A, B = evaluate(x0, i)
                if not len(B):
                    continue
                if lhs >= 1 - 1e-12:
                    return A, B, diam
                if best is None or lhs > best[0]:
                    best = (lhs, A, B)
        assert best is not None
        return best[1], best[2], diam

    b = _Builder(exact)

    def rec(idx: np.ndarray, parent: int) -> None:
        if len(idx) == 1:
            b.add_leaf(parent, int(idx[0]))
            return
        if len(idx) == 2:
            v = b.add_internal(parent, D[idx[0], idx[1]])
            b.add_leaf(v, int(idx[0]))
            b.add_leaf(v, int(idx[1]))
            return
        A, B, diam = split(idx)
        v = b.add_internal(parent, diam)
        rec(idx[A], v)
        rec(idx[B], v)

    if X.n == 0:
        raise InvalidParameters("empty metric")
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 4 * X.n + 1000))
    try:
        rec(np.arange(X.n), -1)
    finally:
        sys.setrecursionlimit(old)
    tree = tighten_ultrametric(b.build(), X)
    return finalize(X, w_all, tree, psi, 4 * t, guaranteed=state["guaranteed"], method="ramsey_core",
                    trace=[{"stage": "ramsey_core", "t": t, "q": q, "phi": phi, "psi": psi}])


def ramsey_phi(wm: WeightedMetric, alpha: float) -> ExtractionResult:
    """Extraction at distortion ``4 floor(alpha/4) <= alpha`` for arbitrary weights.

    With ``t = floor(alpha/4)`` and ``q = 2^t`` the weights are truncated to
    ``y`` (q-decomposable p-th powers, ``p = 1 - log2 t / t``) and the shell
    decomposition runs on ``y^p``; the exponent is ``p`` times the core
    exponent.  For ``t < 8`` the proof does not apply: ``q`` is raised to 16
    and the result is marked as not guaranteed.
    """
    if not alpha > 8:
        raise AlphaTooSmall(f"alpha must exceed 8, got {alpha}; use small_alpha_extract")
    X = wm.base
    t = int(math.floor(alpha / 4))
    heuristic = t < 8
    q = max(2.0 ** t, 16.0)
    if X.n == 1:
        return finalize(X, wm.w, leaf_tree(0, X.exact), 1.0, alpha, method="ramsey_phi")
    dec = decompose_sequence(_float_weights(wm.w), q)
    keep = dec.support()
    w2 = dec.y[keep] ** dec.p
    inner = ramsey_core(WeightedMetric(X.sub(keep), w2), t, q, strict=not heuristic)
    tree = _local_to_global(inner.tree, keep)
    psi = dec.p * inner.psi
    trace = [{"stage": "decompose", "q": q, "p": dec.p, "support": int(len(keep)),
              "l": dec.l, "b": dec.b}] + inner.trace
    return finalize(X, wm.w, tree, psi, alpha, guaranteed=inner.guaranteed and not heuristic,
                    method="ramsey_phi", trace=trace)


# ---------------------------------------------------------------------------
# equilateral subsets


def _greedy_net(sub: np.ndarray, r) -> list[int]:
    centers: list[int] = []
    for p in range(sub.shape[0]):
        if all(sub[p, c] >= r for c in centers):
            centers.append(p)
    return centers


def equilateral_extract(X: FiniteMetric, alpha: float) -> PointSubset:
    """Subset with aspect ratio at most ``alpha`` (hence alpha-equivalent to an equilateral space).

    Repeatedly take a greedy maximal ``diam(N)/alpha``-separated net of the
    current set ``N`` and descend into the most populous open ball of that
    radius around a net point; the largest net seen is returned.  For
    ``alpha > 2`` the size is at least ``(n/2)^(1/t)`` with
    ``t = ceil(log_{alpha/2} Phi)``.
    """
    if not alpha >= 1:
        raise InvalidParameters(f"alpha must be at least 1, got {alpha}")
    n = X.n
    if n <= 1:
        return PointSubset(tuple(range(n)))
    a = to_fraction(alpha) if X.exact else float(alpha)
    best: list[int] = [0]
    N = np.arange(n)
    while len(N) >= 2:
        sub = X.d[np.ix_(N, N)]
        diam = sub.max()
        r = diam / a
        net = _greedy_net(sub, r)
        if len(net) > len(best):
            best = [int(N[j]) for j in net]
        if len(net) == len(N):
            break
        balls = [np.flatnonzero(np.asarray(sub[c] < r, dtype=bool)) for c in net]
        largest = max(range(len(balls)), key=lambda j: (len(balls[j]), -j))
        if len(balls[largest]) == len(N):  # possible only for alpha < 2
            break
        N = N[balls[largest]]
    return PointSubset(tuple(best))


def equilateral_guarantee(n: int, phi: float, alpha: float) -> float:
    """``(n/2)^(1/ceil(log_{alpha/2} phi))`` (``n`` when ``phi <= alpha/2``)."""
    if phi <= 1 or n <= 1:
        return float(n)
    t = max(1, math.ceil(math.log(phi) / math.log(alpha / 2) - LOG_GUARD))
    return (n / 2) ** (1.0 / t)


def weighted_equilateral(wm: WeightedMetric, alpha: float) -> ExtractionResult:
    """Weighted equilateral extraction with exponent ``1/(4 ceil(log_{alpha/2} Phi))``.

    The weights are reduced to two entries or one constant level.  Two
    entries give an isometric pair; a level set of at most four points gives
    a pair of its points; larger level sets are passed to
    :func:`equilateral_extract`.  If ``Phi <= alpha`` the whole space is
    returned with exponent 1.  The tree is a star, hence a k-HST for every k.
    """
    if not alpha > 2:
        raise AlphaTooSmall(f"alpha must exceed 2, got {alpha}")
    X = wm.base
    n = X.n
    phi = aspect_ratio(X)
    a = to_fraction(alpha) if X.exact else float(alpha)
    if (phi <= a) if X.exact else (float(phi) <= float(a) * (1 + RTOL)):
        return finalize(X, wm.w, _star_on(X, range(n)), 1.0, alpha, method="weighted_equilateral",
                        trace=[{"stage": "weighted_equilateral", "case": "whole"}])
    T = max(1, math.ceil(math.log(float(phi)) / math.log(alpha / 2) - LOG_GUARD))
    psi = 1.0 / (4 * T)
    bb = balance_binary(_float_weights(wm.w))
    supp = [int(i) for i in bb.support()]
    if bb.kind == "pair":
        chosen = supp
        case = "pair"
    elif len(supp) == 1:
        chosen, case = supp, "single"
    elif len(supp) <= 4:
        chosen, case = supp[:2], "small-level"
    else:
        net = equilateral_extract(X.sub(supp), alpha)
        chosen, case = [supp[j] for j in net.indices], "level"
    return finalize(X, wm.w, _star_on(X, chosen), psi, alpha, method="weighted_equilateral",
                    trace=[{"stage": "weighted_equilateral", "case": case, "T": T, "psi": psi}])


def equilateral_extractor(alpha: float, k: float = 1.0) -> Extractor:
    return Extractor("weighted_equilateral", alpha, k, lambda wm: weighted_equilateral(wm, alpha))


def phi_extractor(alpha: float) -> Extractor:
    return Extractor("ramsey_phi", alpha, 1.0, lambda wm: ramsey_phi(wm, alpha))


# ---------------------------------------------------------------------------
# composition lifting


def _block_ids(b: Block) -> list[int]:
    if isinstance(b, FiniteMetric):
        return [int(x) for x in b.labels]
    out: list[int] = []
    for c in b.blocks:
        out.extend(_block_ids(c))
    return out


def composition_lift(extractor: Extractor, Z: CompositionResult | CompositionSpec | FiniteMetric,
                     weights: Any = None, X: FiniteMetric | None = None) -> ExtractionResult:
    """Apply ``extractor`` through a composition and glue the resulting trees.

    Each block is handled recursively; the outer space is extracted with
    weights equal to the total weight of each block.  The outer tree, with
    labels multiplied by ``beta * gamma``, receives the block trees at its
    leaves.  Requires ``beta >= alpha * k`` at every level, which makes the
    glued tree a k-HST with the extractor's distortion.

    ``Z`` may be a :class:`CompositionResult` (leaf ids are the original
    point ids and ``X`` defaults to the composed metric) or a bare
    specification whose base blocks are labelled by point ids.  ``weights``
    are indexed by point id.
    """
    if isinstance(Z, CompositionResult):
        structure = Z.structure
        ids = list(Z.ids)
        X = Z.metric if X is None else X
    else:
        structure = Z
        ids = sorted(_block_ids(structure))
        if X is None:
            from .composition import block_metric

            Xm = block_metric(structure)
            perm = np.argsort([int(lab) for lab in Xm.labels])
            X = FiniteMetric(Xm.d[np.ix_(perm, perm)], tuple(Xm.labels[i] for i in perm))
    if weights is None:
        wmap = {i: (Fraction(1) if X.exact else 1.0) for i in ids}
    else:
        warr = np.asarray(weights, dtype=object)
        wmap = {i: warr[i] for i in ids}
    psis: list[float] = []
    guaranteed = [True]
    trace: list[dict] = []

    def lift(block: Block) -> HstTree:
        if isinstance(block, FiniteMetric):
            bids = [int(x) for x in block.labels]
            w = np.array([wmap[i] for i in bids], dtype=object)
            res = extractor(WeightedMetric(block, w))
            psis.append(res.psi)
            guaranteed[0] &= res.guaranteed
            return res.tree.relabel_leaves(bids)
        spec = block
        if spec.beta < extractor.alpha * extractor.k * (1 - 1e-12):
            raise SeparationTooSmall(
                f"beta = {float(spec.beta):.6g} is below alpha * k = {extractor.alpha * extractor.k:.6g}")
        wz = np.array([sum(wmap[i] for i in _block_ids(c)) for c in spec.blocks], dtype=object)
        outer_res = extractor(WeightedMetric(spec.outer, wz))
        psis.append(outer_res.psi)
        guaranteed[0] &= outer_res.guaranteed
        scale = spec.beta * spec.gamma
        T_M = outer_res.tree
        sub_trees = {z: lift(spec.blocks[z]) for z in T_M.leaf_ids()}
        exact_arith = T_M.arithmetic_exact or any(s.arithmetic_exact for s in sub_trees.values())
        bld = _Builder(exact_arith)

        def copy(t: HstTree, v: int, parent: int) -> None:
            if t.leaf[v] >= 0:
                bld.add_leaf(parent, t.leaf[v])
                return
            node = bld.add_internal(parent, t.delta[v])
            for c in t.children[v]:
                copy(t, c, node)

        def emit(v: int, parent: int) -> None:
            if T_M.leaf[v] >= 0:
                copy(sub_trees[T_M.leaf[v]], 0, parent)
                return
            node = bld.add_internal(parent, T_M.delta[v] * scale)
            for c in T_M.children[v]:
                emit(c, node)

        emit(0, -1)
        trace.append({"stage": "lift", "blocks": spec.outer.n, "kept_blocks": len(sub_trees)})
        return bld.build(extractor.k)

    tree = lift(structure)
    tree = tree.with_k(extractor.k, exact=False)
    validate_hst(tree, extractor.k)
    psi = min(psis) if psis else 1.0
    res_ids = tree.leaf_ids()
    report = _tree_distortion(X if X.n > max(ids) else _embed_ids(X, ids), res_ids, tree)
    w_sub = [wmap[i] for i in res_ids]
    lhs, rhs = weighted_sides(w_sub, [wmap[i] for i in ids], psi)
    ok = bool(lhs >= rhs) if X.exact else bool(lhs >= rhs * (1 - 1e-9))
    return ExtractionResult(PointSubset(res_ids), tree, report, float(psi), float(lhs), float(rhs), ok,
                            float(extractor.alpha), guaranteed[0], "composition_lift", trace)


def _embed_ids(X: FiniteMetric, ids: Sequence[int]) -> FiniteMetric:
    """Place the rows of ``X`` (ordered like sorted ``ids``) at positions ``ids``."""
    n = max(ids) + 1
    d = np.zeros((n, n), dtype=X.d.dtype)
    if X.exact:
        d[...] = Fraction(0)
    idx = np.asarray(ids, dtype=np.int64)
    d[np.ix_(idx, idx)] = X.d
    labels = [str(i) for i in range(n)]
    return FiniteMetric(d, tuple(labels))


# ---------------------------------------------------------------------------
# refinement and the large-alpha chain


def refine(X: FiniteMetric, R: ExtractionResult, alpha: float, weights: Any = None) -> ExtractionResult:
    """Halve the distortion of an extraction.

    With ``beta = alpha/2 - 2``, ``Phi = 2^(2 alpha)``, ``alpha' = Phi/alpha``
    and ``k = Phi beta`` (all handled as base-2 logarithms): the tree of
    ``R`` is reduced to an exact k-HST at distortion ``alpha'``, the subset
    is re-metrized as a composition with blocks of aspect ratio at most
    ``Phi``, and an extractor at distortion ``beta`` is lifted through the
    composition.  The final distortion is at most ``beta + 2 = alpha/2`` and
    the exponents multiply.  The extractor is :func:`ramsey_phi` when
    ``beta > 8`` and :func:`weighted_equilateral` otherwise.
    """
    if not alpha > 8:
        raise AlphaTooSmall(f"refinement needs alpha > 8, got {alpha}")
    w = _weights_of(X, weights)
    if not R.distortion_ok(alpha):
        raise DistortionPreconditionFailed(
            f"input distortion {float(R.report.distortion):.6g} exceeds alpha = {alpha}")
    beta = alpha / 2 - 2
    log2_phi = 2.0 * alpha
    log2_ap = log2_phi - math.log2(alpha)
    log2_k = log2_phi + math.log2(beta)
    ids = list(R.subset.indices)
    trace = list(R.trace)
    if len(ids) <= 2:
        return finalize(X, w, R.tree, R.psi, alpha / 2, guaranteed=R.guaranteed, method="refine",
                        trace=trace + [{"stage": "refine", "alpha": alpha, "skipped": "tiny"}])
    # make the current tree noncontractive so that labels dominate distances
    T = R.tree
    c = R.report.contraction
    if float(c) > 1:
        T = T.scaled(c)
    w_stage = np.array([float(w[i]) ** R.psi for i in T.leaf_ids()])
    A = um_to_khst(T, w_stage, math.inf, 0.0, log2_k=log2_k, log2_alpha=log2_ap)
    B = khst_to_composition(X, A.tree, 0.0, beta, log2_alpha=log2_phi)
    psi_ab = R.psi * A.psi
    extractor = phi_extractor(beta) if beta > 8 else equilateral_extractor(beta)
    w_lift = np.array([float(w[i]) ** psi_ab if i in set(B.ids) else 0.0 for i in range(X.n)], dtype=object)
    C = composition_lift(extractor, B, w_lift, X=X)
    tree = merge_equal_labels(C.tree.with_k(1.0))
    psi = psi_ab * C.psi
    stage = {"stage": "refine", "alpha": alpha, "beta": beta, "h": A.h, "route": A.route,
             "after_khst": len(A.subset), "after_lift": len(C.subset), "psi_khst": A.psi,
             "psi_lift": C.psi}
    return finalize(X, w, tree, psi, alpha / 2, guaranteed=R.guaranteed and C.guaranteed,
                    method="refine", trace=trace + [stage])


def _initial_result(X: FiniteMetric, w: np.ndarray) -> tuple[ExtractionResult, float]:
    """Whole-space starting point and its power-of-two distortion level."""
    n = X.n
    phi = float(aspect_ratio(X))
    alpha0 = 2.0 ** math.ceil(math.log2(max(min(phi, n), 1.0)) - LOG_GUARD)
    tree, c = whole_space_tree(X)
    if float(c) > alpha0:  # pragma: no cover - c_um <= min(Phi, n) always
        tree, _, _ = naive_ultrametric(X)
    res = finalize(X, w, tree, 1.0, alpha0, method="initial",
                   trace=[{"stage": "initial", "alpha": alpha0, "c_um": float(c), "size": n}])
    return res, alpha0


def _better(a: ExtractionResult | None, b: ExtractionResult | None) -> ExtractionResult | None:
    if a is None:
        return b
    if b is None:
        return a
    ka = (a.size, a.guaranteed, a.psi)
    kb = (b.size, b.guaranteed, b.psi)
    return b if kb > ka else a


class _Chain:
    """Cached large-distortion refinement chain for one metric and weight vector."""

    def __init__(self, X: FiniteMetric, w: np.ndarray) -> None:
        self.X = X
        self.w = w
        self.start, self.alpha0 = _initial_result(X, w)
        self.by_level: dict[float, ExtractionResult] = {self.alpha0: self.start}
        self.phi_cache: dict[float, ExtractionResult] = {}

    def direct(self, alpha: float) -> ExtractionResult | None:
        if alpha not in self.phi_cache:
            try:
                self.phi_cache[alpha] = ramsey_phi(WeightedMetric(self.X, self.w), alpha)
            except AlphaTooSmall:
                return None
        return self.phi_cache[alpha]

    def at(self, level: float) -> ExtractionResult:
        """Best result with distortion at most ``level`` (``level > 8``)."""
        cur_alpha = self.alpha0
        cur = self.start
        if level >= cur_alpha:
            return cur
        while cur_alpha > level:
            target = max(cur_alpha / 2, level)
            key = target if target == cur_alpha / 2 else ("final", cur_alpha, target)
            if key in self.by_level:
                cur, cur_alpha = self.by_level[key], target
                continue
            if cur.distortion_ok(target):
                nxt = cur
            else:
                try:
                    nxt = refine(self.X, cur, cur_alpha, self.w) if cur_alpha > 8 else None
                except (SeparationTooSmall, DistortionPreconditionFailed, InvalidParameters):
                    nxt = None
                if nxt is not None and not nxt.distortion_ok(target):  # pragma: no cover
                    nxt = None
            nxt = _better(nxt, self.direct(target) if target > 8 else None)
            if nxt is None:
                nxt = _fallback_at(self.X, self.w, target)
            nxt.alpha = float(target)
            self.by_level[key] = nxt
            cur, cur_alpha = nxt, target
        return cur


def _fallback_at(X: FiniteMetric, w: np.ndarray, alpha: float) -> ExtractionResult:
    return weighted_equilateral(WeightedMetric(X, w), alpha)


# ---------------------------------------------------------------------------
# distortion 2 + eps


class _SmallAlpha:
    """Cached ``2 + eps`` pipeline: stage one at ``theta/2`` is shared across eps."""

    def __init__(self, X: FiniteMetric, w: np.ndarray, theta: float, chain: _Chain | None = None) -> None:
        if not theta / 2 > 8:
            raise InvalidParameters(f"theta must exceed 16, got {theta}")
        self.X, self.w, self.theta = X, w, float(theta)
        self.chain = chain if chain is not None else _Chain(X, w)
        self._stage1: ExtractionResult | None = None

    @property
    def stage1(self) -> ExtractionResult:
        if self._stage1 is None:
            self._stage1 = self.chain.at(self.theta / 2)
        return self._stage1

    def run(self, eps: float, k: float = 1.0) -> ExtractionResult:
        X, w, theta = self.X, self.w, self.theta
        alpha = 2 + eps
        trace: list[dict] = []
        if k == 1:
            tree, c = whole_space_tree(X)
            if (c <= to_fraction(alpha)) if X.exact else float(c) <= alpha * (1 + RTOL):
                return finalize(X, w, tree, 1.0, alpha, method="small_alpha",
                                trace=[{"stage": "whole", "c_um": float(c)}])
        R1 = self.stage1
        trace.extend(R1.trace)
        trace.append({"stage": "stage1", "alpha": theta / 2, "size": R1.size, "psi": R1.psi})
        beta = 8 * k / eps
        k1 = theta * beta
        if R1.size <= 2:
            tree = _star_on(X, R1.subset.indices)
            return finalize(X, w, tree.with_k(k), R1.psi, alpha, guaranteed=R1.guaranteed,
                            method="small_alpha", trace=trace, validate_k=k)
        T = R1.tree
        if float(R1.report.contraction) > 1:
            T = T.scaled(R1.report.contraction)
        w_stage = np.array([float(w[i]) ** R1.psi for i in T.leaf_ids()])
        A = um_to_khst(T, w_stage, k1, 2.0)
        trace.append({"stage": "um_to_khst", "k": k1, "route": A.route, "h": A.h,
                      "size": len(A.subset), "psi": A.psi})
        B = khst_to_composition(X, A.tree, theta, beta)
        psi_ab = R1.psi * A.psi
        ext = equilateral_extractor(2 + eps / 4, k)
        keep = set(B.ids)
        w_lift = np.array([float(w[i]) ** psi_ab if i in keep else 0.0 for i in range(X.n)], dtype=object)
        C = composition_lift(ext, B, w_lift, X=X)
        trace.append({"stage": "lift", "size": C.size, "psi": C.psi})
        psi = psi_ab * C.psi
        return finalize(X, w, C.tree, psi, alpha, guaranteed=R1.guaranteed and C.guaranteed,
                        method="small_alpha", trace=trace, validate_k=k)


def small_alpha_extract(
    X: FiniteMetric,
    epsilon: float,
    k: float = 1.0,
    weights: Any = None,
    *,
    theta: float = DEFAULT_THETA,
) -> ExtractionResult:
    """Subset ``(2 + eps)``-equivalent to a k-HST.

    Stage one extracts a subset ``theta/2``-equivalent to an ultrametric.
    Its tree is reduced to a ``k'``-HST at distortion 2 (``k' = theta beta``,
    ``beta = 8k/eps``), re-metrized as a composition with blocks of aspect
    ratio at most ``theta``, and weighted equilateral extraction at
    ``2 + eps/4`` is lifted through it.  The final distortion is at most
    ``(2 + eps/4)(1 + 2/beta) <= 2 + eps``.
    """
    if not 0 < epsilon < 1:
        raise InvalidParameters(f"epsilon must lie in (0, 1), got {epsilon}")
    if not k >= 1:
        raise InvalidParameters(f"k must be at least 1, got {k}")
    w = _weights_of(X, weights)
    return _SmallAlpha(X, w, theta).run(epsilon, k)


# ---------------------------------------------------------------------------
# driver


def _ladder(phi: float) -> list[float]:
    """Fixed distortion levels used by :func:`ramsey_extract`, ascending.

    The ladder depends only on the instance (through ``Phi``), never on the
    requested distortion, which makes the driver monotone in alpha.
    """
    fine = [2.0 + 2.0 ** -j for j in range(20, 1, -1)]
    coarse = [2.5, 2.75, 3.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 10.0, 12.0, 14.0, 16.0,
              20.0, 24.0, 28.0, 32.0, 40.0, 48.0, 56.0, 64.0]
    levels = fine + coarse
    top = max(phi, 2.0)
    x = 64.0
    while x < top:
        x *= 2 ** 0.25
        levels.append(x)
    return levels


class RamseyDriver:
    """Candidate generation shared by repeated :func:`ramsey_extract` calls on one metric."""

    def __init__(self, X: FiniteMetric, weights: Any = None, *, theta: float = DEFAULT_THETA) -> None:
        self.X = X
        self.w = _weights_of(X, weights)
        self.phi = float(aspect_ratio(X))
        self.theta = theta
        self.chain = _Chain(X, self.w)
        self.small = _SmallAlpha(X, self.w, theta, self.chain)
        self.whole_tree, self.c_um = whole_space_tree(X)
        self.levels = _ladder(self.phi)
        self._by_level: dict[float, ExtractionResult] = {}

    def at_level(self, level: float) -> ExtractionResult:
        if level in self._by_level:
            return self._by_level[level]
        X, w = self.X, self.w
        best: ExtractionResult | None = None
        cands: list[tuple[str, Callable[[], ExtractionResult]]] = []
        c_ok = (self.c_um <= to_fraction(level)) if X.exact else float(self.c_um) <= level * (1 + RTOL)
        if c_ok:
            cands.append(("whole", lambda: finalize(X, w, self.whole_tree, 1.0, level, method="whole")))
        cands.append(("equilateral", lambda: weighted_equilateral(WeightedMetric(X, w), level)))
        if level <= 8:
            eps = min(level - 2, MAX_PIPELINE_EPS)
            cands.append(("small_alpha", lambda: self.small.run(eps)))
        else:
            cands.append(("chain", lambda: self.chain.at(level)))
        for name, make in cands:
            try:
                res = make()
            except (SeparationTooSmall, DistortionPreconditionFailed, InvalidParameters, AlphaTooSmall):
                continue
            if not res.distortion_ok(level):
                continue
            res.trace = res.trace + [{"stage": "candidate", "name": name, "level": level, "size": res.size}]
            best = _better(best, res)
            if c_ok:
                break  # the whole space cannot be beaten
        assert best is not None
        self._by_level[level] = best
        return best

    def extract(self, alpha: float) -> ExtractionResult:
        X = self.X
        fits = (self.c_um <= to_fraction(alpha)) if X.exact else float(self.c_um) <= alpha * (1 + RTOL)
        if fits:  # the whole space cannot be beaten, whatever the ladder holds
            return finalize(X, self.w, self.whole_tree, 1.0, alpha, method="whole",
                            trace=[{"stage": "candidate", "name": "whole", "level": alpha, "size": X.n}])
        best: ExtractionResult | None = None
        levels = [lv for lv in self.levels if lv <= alpha * (1 + 1e-12)]
        for lv in levels:
            best = _better(best, self.at_level(lv))
            if best is not None and best.size == self.X.n:
                break
        if best is None:
            best = self.at_level(alpha)
        out = finalize(self.X, self.w, best.tree, best.psi, alpha, guaranteed=best.guaranteed,
                       method=best.method, trace=best.trace)
        return out


def _fallback_small(X: FiniteMetric, w: np.ndarray, alpha: float, cap_n: int) -> ExtractionResult:
    cands: list[ExtractionResult] = []
    if X.n <= cap_n:
        S = exact_ramsey_oracle(X, alpha, "UM", cap=cap_n)
        sub = X.sub(S.indices)
        tree, _ = whole_space_tree(sub)
        tree = tree.relabel_leaves(list(S.indices))
        cands.append(finalize(X, w, tree, 0.0, alpha, guaranteed=False, method="oracle"))
    if alpha >= 1:
        net = equilateral_extract(X, alpha)
        cands.append(finalize(X, w, _star_on(X, net.indices), 0.0, alpha, guaranteed=False,
                              method="equilateral_fallback"))
    best = None
    for c in cands:
        best = _better(best, c)
    assert best is not None
    lhs_ok = best
    lhs_ok.psi = certified_exponent([w[i] for i in best.subset.indices], list(w), upper=1.0)
    lhs, rhs = weighted_sides([w[i] for i in best.subset.indices], list(w), lhs_ok.psi)
    lhs_ok.weighted_lhs, lhs_ok.weighted_rhs, lhs_ok.weighted_ok = float(lhs), float(rhs), bool(lhs >= rhs)
    return lhs_ok


def ramsey_extract(
    X: FiniteMetric,
    alpha: float,
    weights: Any = None,
    *,
    strict: bool = False,
    cap_n: int = ORACLE_CAP,
    theta: float = DEFAULT_THETA,
    driver: RamseyDriver | None = None,
) -> ExtractionResult:
    """Large subset of ``X`` that is alpha-equivalent to an ultrametric.

    For every level of a fixed ladder of distortions at most ``alpha`` the
    candidates are: the whole space when its optimal ultrametric distortion
    fits, a weighted equilateral subset, the ``2 + eps`` pipeline (levels up
    to 8) and the refinement chain started from the whole space at
    ``2^ceil(log2 min(Phi, n))`` (levels above 8).  The largest verified
    candidate is returned, which makes the size nondecreasing in ``alpha``.

    For ``alpha <= 2`` no power-law guarantee exists: a warning is issued and
    the better of the exact oracle (``n <= cap_n``) and a greedy equilateral
    net is returned; ``strict=True`` raises :class:`AlphaAtMostTwo` instead.
    """
    if not alpha > 2:
        if strict:
            raise AlphaAtMostTwo(f"alpha = {alpha} is at most 2")
        warn_alpha_at_most_two(alpha)
        return _fallback_small(X, _weights_of(X, weights), alpha, cap_n)
    drv = driver if driver is not None else RamseyDriver(X, weights, theta=theta)
    return drv.extract(alpha)
