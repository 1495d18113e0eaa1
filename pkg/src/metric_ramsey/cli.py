"""Command line interface: ``metric-ramsey <subcommand> ...``.

Exit codes: 0 on success, 1 on a domain error (the message starts with the
error name), 2 on a usage error.  ``METRIC_RAMSEY_EXACT=1`` forces exact
rational arithmetic as if ``--exact`` were given.
"""

from __future__ import annotations

import argparse
import os
import sys
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import io as mio
from .errors import AlphaAtMostTwoWarning, InvalidParameters, MetricRamseyError, TriangleViolation
from .hst import embed_l2, tree_from_ultrametric, validate_hst
from .instances import InstanceSpec, generate, gv_code
from .metric import (
    ORACLE_CAP,
    FiniteMetric,
    aspect_ratio,
    c_ultrametric,
    exact_ramsey_oracle,
    is_ultrametric,
)
from .ramsey import equilateral_extract, ramsey_extract, small_alpha_extract
from .spectral import (
    Graph,
    diameter_bound_check,
    expander_net,
    krawtchouk_min_check,
    self_mixing,
    spectral_profile,
)
from .sweep import SweepConfig, run_sweep, to_csv


class UsageError(Exception):
    """Input that cannot be interpreted at all (missing file, wrong kind of document)."""


def _exact(args: argparse.Namespace) -> bool:
    return bool(getattr(args, "exact", False)) or os.environ.get("METRIC_RAMSEY_EXACT", "") == "1"


def _read(path: str) -> Any:
    if not Path(path).is_file():
        raise UsageError(f"no such file: {path}")
    return mio.read_json(path)


def _load_metric(path: str, exact: bool) -> FiniteMetric:
    data = _read(path)
    if isinstance(data, dict) and "metric" in data:
        data = data["metric"]
    if not isinstance(data, dict) or "d" not in data:
        raise UsageError(f"{path} does not contain a metric (expected a 'd' matrix)")
    return mio.metric_from_dict(data, exact=exact)


def _load_graph(path: str) -> Graph:
    data = _read(path)
    if isinstance(data, dict) and "graph" in data:
        data = data["graph"]
    if not isinstance(data, dict) or "edges" not in data:
        raise UsageError(f"{path} does not contain a graph (expected 'edges')")
    return mio.graph_from_dict(data)


def _emit(args: argparse.Namespace, obj: Any) -> None:
    text = mio.dumps(obj)
    if getattr(args, "out", None):
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _parse_params(items: Sequence[str]) -> dict:
    out: dict = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--param expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            num: Any = int(v)
        except ValueError:
            try:
                num = float(v)
            except ValueError:
                num = v
        out[k] = num
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_validate(args: argparse.Namespace) -> int:
    path = args.file or args.input
    if not path:
        raise UsageError("validate needs a metric file (positional or --in)")
    try:
        X = _load_metric(path, _exact(args))
    except TriangleViolation as exc:
        raise TriangleViolation(f"{exc} witness={list(exc.witness)}", witness=exc.witness) from exc
    _emit(args, {"valid": True, "n": X.n, "aspect_ratio": aspect_ratio(X) if X.n > 1 else 1,
                 "ultrametric": bool(is_ultrametric(X.d)), "c_um": c_ultrametric(X)})
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    spec = InstanceSpec(args.family, _parse_params(args.param), args.seed)
    inst = generate(spec)
    doc: dict = {"spec": spec.as_dict(), "metric": mio.metric_to_dict(inst.metric)}
    if inst.graph is not None:
        doc["graph"] = mio.graph_to_dict(inst.graph)
    if inst.extra:
        doc["extra"] = inst.extra
    _emit(args, doc)
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    X = _load_metric(args.input, _exact(args))
    weights = None
    if args.weights:
        weights = np.asarray(_read(args.weights), dtype=np.float64)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", AlphaAtMostTwoWarning)
        res = ramsey_extract(X, args.alpha, weights, cap_n=args.cap_n, strict=args.strict)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    doc = mio.result_to_dict(res)
    doc["input"] = {"n": X.n, "alpha": args.alpha, "exact": X.exact}
    _emit(args, doc)
    return 0


def cmd_small_alpha(args: argparse.Namespace) -> int:
    X = _load_metric(args.input, _exact(args))
    res = small_alpha_extract(X, args.epsilon, args.k)
    doc = mio.result_to_dict(res)
    doc["input"] = {"n": X.n, "epsilon": args.epsilon, "k": args.k, "exact": X.exact}
    _emit(args, doc)
    return 0


def cmd_equilateral(args: argparse.Namespace) -> int:
    X = _load_metric(args.input, _exact(args))
    S = equilateral_extract(X, args.alpha)
    sub = X.sub(S.indices)
    _emit(args, {"indices": list(S.indices), "aspect_ratio": aspect_ratio(sub) if len(S) > 1 else 1,
                 "alpha": args.alpha})
    return 0


def cmd_embed_l2(args: argparse.Namespace) -> int:
    data = _read(args.input)
    if isinstance(data, dict) and ("root" in data or "delta" in data):
        t = mio.tree_from_dict(data)
        validate_hst(t)
    else:
        X = _load_metric(args.input, _exact(args))
        if not is_ultrametric(X.d):
            raise InvalidParameters("embed-l2 needs an ultrametric or a tree")
        t = tree_from_ultrametric(X.d)
    coords = embed_l2(t)
    _emit(args, {"ids": list(t.leaf_ids()), "coordinates": coords})
    return 0


def cmd_oracle(args: argparse.Namespace) -> int:
    X = _load_metric(args.input, _exact(args))
    S = exact_ramsey_oracle(X, args.alpha, args.target, cap=args.cap_n)
    _emit(args, {"indices": list(S.indices), "alpha": args.alpha, "target": args.target.upper()})
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    doc: dict = {}
    if args.input:
        G = _load_graph(args.input)
        prof = spectral_profile(G)
        doc["spectral"] = prof.as_dict()
        doc["self_mixing_spectral"] = self_mixing(G, "spectral")
        if G.n <= 20:
            doc["self_mixing_exact"] = self_mixing(G, "exact")
        doc["girth"] = G.girth
        if G.is_connected:
            diam, bound, ok = diameter_bound_check(G)
            doc["diameter"] = {"value": diam, "bound": bound, "ok": ok}
            if args.alpha is not None:
                net = expander_net(G, args.alpha)
                doc["net"] = {"indices": list(net.subset.indices), "radius": net.radius,
                              "guarantee": net.guarantee}
    if args.cube is not None:
        d = args.cube
        if args.min_dist is not None:
            code = gv_code(d, args.min_dist)
            doc["gv_code"] = {"d": d, "min_dist": args.min_dist, "size": code.size, "bound": code.bound,
                              "distortion": code.report.distortion, "distortion_bound": code.distortion_bound}
        doc["krawtchouk_min"] = [
            {"k": k, "min": m, "ok": ok}
            for k in range(2, d // 2 + 1, 2)
            for m, ok in [krawtchouk_min_check(d, k)]
        ]
    if not doc:
        raise UsageError("bounds needs --in GRAPH and/or --cube D")
    _emit(args, doc)
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    data = _read(args.config)
    if not isinstance(data, dict):
        raise UsageError(f"{args.config} must hold a JSON object")
    cfg = SweepConfig.from_dict(data)
    if _exact(args):
        cfg.exact_mode = True
    records = run_sweep(cfg)
    text = to_csv(cfg, records)
    out = args.out or cfg.output
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="metric-ramsey", description="Metric Ramsey extraction toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser, need_in: bool = True) -> None:
        sp.add_argument("--in", dest="input", required=need_in, help="input JSON file")
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--exact", action="store_true", help="exact rational arithmetic")

    sp = sub.add_parser("validate", help="validate a metric JSON file")
    sp.add_argument("file", nargs="?")
    common(sp, need_in=False)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("gen", help="generate an instance")
    sp.add_argument("--family", required=True)
    sp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("extract", help="subset alpha-equivalent to an ultrametric")
    common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--weights", help="JSON list of positive weights")
    sp.add_argument("--cap-n", type=int, default=ORACLE_CAP)
    sp.add_argument("--strict", action="store_true", help="refuse alpha <= 2")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("equilateral", help="subset of aspect ratio at most alpha")
    common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.set_defaults(func=cmd_equilateral)

    sp = sub.add_parser("small-alpha", help="subset (2+eps)-equivalent to a k-HST")
    common(sp)
    sp.add_argument("--epsilon", type=float, required=True)
    sp.add_argument("--k", type=float, default=1.0)
    sp.set_defaults(func=cmd_small_alpha)

    sp = sub.add_parser("embed-l2", help="isometric Euclidean embedding of an ultrametric")
    common(sp)
    sp.set_defaults(func=cmd_embed_l2)

    sp = sub.add_parser("oracle", help="brute-force largest subset (small n)")
    common(sp)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--target", default="UM", choices=["UM", "EQ", "um", "eq"])
    sp.add_argument("--cap-n", type=int, default=ORACLE_CAP)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("bounds", help="spectral and coding bounds")
    common(sp, need_in=False)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--cube", type=int, help="hypercube dimension for code and Krawtchouk checks")
    sp.add_argument("--min-dist", type=int)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("sweep", help="run a sweep configuration to CSV")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.add_argument("--exact", action="store_true")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on usage errors
    try:
        return int(args.func(args))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except MetricRamseyError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
