"""Metric Ramsey extraction: large subsets of finite metrics that embed into ultrametrics.

The package covers finite metrics and distortion, hierarchically well
separated trees and metric compositions, constructive Ramsey extraction,
spectral and Markov-type certificates on graphs, seeded instance
generators, and a command line harness.
"""

from __future__ import annotations

from .composition import CompositionSpec, khst_to_composition, metric_composition
from .errors import MetricRamseyError
from .hst import (
    HstTree,
    embed_l2,
    exact_k_hst,
    hst_metric,
    naive_ultrametric,
    periodically_sparse_subtree,
    um_to_khst,
)
from .metric import (
    EmbeddingReport,
    FiniteMetric,
    PointSubset,
    WeightedMetric,
    aspect_ratio,
    build_metric,
    distortion,
    exact_ramsey_oracle,
    shortest_path_metric,
    subdominant_ultrametric,
)
from .ramsey import (
    ExtractionResult,
    composition_lift,
    equilateral_extract,
    ramsey_core,
    ramsey_extract,
    ramsey_phi,
    refine,
    small_alpha_extract,
    weighted_equilateral,
)
from .sequences import balance_binary, decompose_sequence, pinfty_bound_check

__version__ = "0.1.0"


def __getattr__(name: str):
    # scikit-learn is imported only when the estimator is requested, which
    # keeps command line startup fast
    if name == "RamseyEmbedding":
        from .estimators import RamseyEmbedding

        return RamseyEmbedding
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")

__all__ = [
    "CompositionSpec", "EmbeddingReport", "ExtractionResult", "FiniteMetric", "HstTree",
    "MetricRamseyError", "PointSubset", "RamseyEmbedding", "WeightedMetric", "aspect_ratio",
    "balance_binary", "build_metric", "composition_lift", "decompose_sequence", "distortion",
    "embed_l2", "equilateral_extract", "exact_k_hst", "exact_ramsey_oracle", "hst_metric",
    "khst_to_composition", "metric_composition", "naive_ultrametric", "periodically_sparse_subtree",
    "pinfty_bound_check", "ramsey_core", "ramsey_extract", "ramsey_phi", "refine",
    "shortest_path_metric", "small_alpha_extract", "subdominant_ultrametric", "um_to_khst",
    "weighted_equilateral",
]
