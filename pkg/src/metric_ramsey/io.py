"""JSON formats for metrics, subsets, graphs, trees and extraction results.

* metric: ``{"n": int, "labels": [str], "d": [[number]]}``; exact metrics
  write distances as strings (a finite decimal when one exists, otherwise
  ``"p/q"``).
* subset: ``{"indices": [int]}``.
* graph: ``{"n": int, "edges": [[u, v]]}``.
* tree: nested ``{"delta": x, "children": [...]}`` with ``{"leaf": id}`` at
  the leaves, wrapped as ``{"k": ..., "log2_k": ..., "exact": bool, "root": ...}``.

Output is written with a fixed layout so that reruns are byte-identical.
"""

from __future__ import annotations

import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InvalidParameters
from .hst import HstTree, tree_from_nested
from .metric import EmbeddingReport, FiniteMetric, PointSubset, build_metric, to_fraction
from .spectral import Graph


def number_to_json(x: Any) -> Any:
    """Plain JSON number for floats and ints; exact string for Fractions."""
    if isinstance(x, Fraction):
        return fraction_to_string(x)
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return "nan"
        return x
    return x


def fraction_to_string(x: Fraction) -> str:
    """Finite decimal expansion when the denominator allows one, else ``"p/q"``."""
    if x.denominator == 1:
        return str(x.numerator)
    den = x.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{x.numerator}/{x.denominator}"
    digits = max(twos, fives)
    scaled = x * 10 ** digits
    sign = "-" if scaled < 0 else ""
    s = str(abs(scaled.numerator)).rjust(digits + 1, "0")
    return f"{sign}{s[:-digits]}.{s[-digits:]}"


def to_jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()] if obj.dtype != object else [to_jsonable(v) for v in obj]
    return number_to_json(obj)


def dumps(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2, ensure_ascii=True) + "\n"


def write_json(path: str | Path, obj: Any) -> None:
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidParameters(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc


# ---------------------------------------------------------------------------
# metrics, subsets, graphs


def metric_to_dict(X: FiniteMetric) -> dict:
    rows = [[number_to_json(v) for v in row] for row in X.d]
    return {"n": X.n, "labels": list(X.labels), "d": rows}


def metric_from_dict(data: dict, *, exact: bool = False, validate: bool = True) -> FiniteMetric:
    if "d" not in data:
        raise InvalidParameters("metric JSON needs a 'd' matrix")
    d = data["d"]
    if "n" in data and int(data["n"]) != len(d):
        raise InvalidParameters(f"'n' = {data['n']} but the matrix has {len(d)} rows")
    has_strings = any(isinstance(v, str) for row in d for v in row)
    return build_metric(d, data.get("labels"), exact=exact or has_strings, validate=validate)


def subset_to_dict(S: PointSubset) -> dict:
    return {"indices": list(S.indices)}


def subset_from_dict(data: dict) -> PointSubset:
    return PointSubset(tuple(int(i) for i in data["indices"]))


def graph_to_dict(G: Graph) -> dict:
    return G.as_dict()


def graph_from_dict(data: dict) -> Graph:
    return Graph.from_edges(int(data["n"]), [tuple(e) for e in data["edges"]])


# ---------------------------------------------------------------------------
# trees and results


def tree_to_dict(t: HstTree) -> dict:
    k = t.k
    k_json = number_to_json(k) if not (isinstance(k, float) and math.isinf(k)) else None
    return {"k": k_json, "log2_k": t.log2_k, "exact": bool(t.exact), "root": t.to_nested()}


def tree_from_dict(data: dict) -> HstTree:
    root = data["root"] if "root" in data else data
    k = data.get("k", 1)
    exact_arith = _has_string_labels(root)
    if k is None:
        k = math.inf
    elif isinstance(k, str):
        k = to_fraction(k)
    t = tree_from_nested(root, k=k, exact=False, exact_arith=exact_arith)
    log2_k = data.get("log2_k")
    return t.with_k(t.k, exact=bool(data.get("exact", False)),
                    log2_k=None if log2_k is None else float(log2_k))


def _has_string_labels(node: dict) -> bool:
    if "leaf" in node:
        return False
    if isinstance(node.get("delta"), str):
        return True
    return any(_has_string_labels(c) for c in node.get("children", []))


def report_to_dict(r: EmbeddingReport) -> dict:
    return r.as_dict()


def result_to_dict(res: Any) -> dict:
    """Serialize an :class:`~metric_ramsey.ramsey.ExtractionResult`."""
    return {
        "subset": list(res.subset.indices),
        "hst": tree_to_dict(res.tree),
        "distortion": report_to_dict(res.report),
        "psi": res.psi,
        "weighted_lhs": res.weighted_lhs,
        "weighted_rhs": res.weighted_rhs,
        "weighted_ok": res.weighted_ok,
        "guaranteed": res.guaranteed,
        "alpha": res.alpha,
        "method": res.method,
        "trace": res.trace,
    }
