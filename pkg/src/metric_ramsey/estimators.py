"""scikit-learn style wrapper around :func:`~metric_ramsey.ramsey.ramsey_extract`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.metrics import pairwise_distances
from sklearn.utils.validation import check_is_fitted

from .hst import embed_l2, hst_metric
from .metric import ORACLE_CAP, build_metric
from .ramsey import DEFAULT_THETA, ramsey_extract


class RamseyEmbedding(TransformerMixin, BaseEstimator):
    """Select a subset of samples that embeds into an ultrametric with distortion ``alpha``.

    Parameters
    ----------
    alpha : float
        Target distortion.  Values at most 2 give a best-effort subset and
        a warning.
    metric : str
        ``"precomputed"`` to pass a distance matrix to :meth:`fit`, or any
        metric name accepted by :func:`sklearn.metrics.pairwise_distances`.
    exact : bool
        Run in exact rational arithmetic.
    theta : float
        Constant of the ``2 + eps`` pipeline.
    cap_n : int
        Largest input handled by the brute-force fallback.

    Attributes
    ----------
    support_ : ndarray of bool
        Mask of the selected samples.
    subset_ : ndarray of int
        Indices of the selected samples.
    tree_ : HstTree
        Tree whose leaf metric the subset embeds into.
    distortion_ : float
        Recomputed distortion of that embedding.
    psi_ : float
        Exponent of the weighted guarantee.
    result_ : ExtractionResult
    """

    def __init__(self, alpha: float = 4.0, metric: str = "precomputed", exact: bool = False,
                 theta: float = DEFAULT_THETA, cap_n: int = ORACLE_CAP):
        self.alpha = alpha
        self.metric = metric
        self.exact = exact
        self.theta = theta
        self.cap_n = cap_n

    def _distances(self, X) -> np.ndarray:
        if self.metric == "precomputed":
            return np.asarray(X, dtype=object if self.exact else np.float64)
        return pairwise_distances(np.asarray(X, dtype=np.float64), metric=self.metric)

    def fit(self, X, y=None, sample_weight=None):
        """Extract the subset; ``sample_weight`` gives the point weights."""
        M = build_metric(self._distances(X), exact=self.exact)
        res = ramsey_extract(M, self.alpha, sample_weight, cap_n=self.cap_n, theta=self.theta)
        self.result_ = res
        self.n_samples_fit_ = M.n
        self.subset_ = np.asarray(res.subset.indices, dtype=np.int64)
        self.support_ = np.zeros(M.n, dtype=bool)
        self.support_[self.subset_] = True
        self.tree_ = res.tree
        self.distortion_ = float(res.report.distortion)
        self.psi_ = res.psi
        return self

    def get_support(self, indices: bool = False) -> np.ndarray:
        check_is_fitted(self, "support_")
        return self.subset_.copy() if indices else self.support_.copy()

    def transform(self, X) -> np.ndarray:
        """Euclidean coordinates of the selected samples (isometric to the tree metric).

        Rows follow the order of ``subset_``.  ``X`` is accepted for pipeline
        compatibility; it may be ``None`` or must have the fitted number of samples.
        """
        check_is_fitted(self, "tree_")
        if X is not None and np.shape(X)[0] != self.n_samples_fit_:
            raise ValueError(f"expected {self.n_samples_fit_} samples, got {np.shape(X)[0]}")
        return embed_l2(self.tree_)

    def tree_distances(self) -> np.ndarray:
        """Tree metric on the selected samples, rows in ``subset_`` order."""
        check_is_fitted(self, "tree_")
        return np.asarray(hst_metric(self.tree_, validate=False).d, dtype=np.float64)
