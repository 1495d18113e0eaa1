"""Experiment sweeps: one CSV row per (instance, alpha, operation).

The CSV starts with a ``# config: {...}`` line holding the full configuration,
followed by the header::

    family,n,alpha,subset_size,distortion_verified,psi_claimed,exponent_measured,seed,runtime_ms,operation,error

Floats are written with 17 significant digits.  ``runtime_ms`` is left empty
unless the configuration sets ``"timing": true``, which keeps default output
byte-identical across runs.  Failures of single cells are recorded in the
``error`` column and never abort the sweep.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import InvalidParameters, MetricRamseyError
from .instances import InstanceSpec, generate, grid
from .metric import FiniteMetric, aspect_ratio, c_ultrametric, exact_ramsey_oracle
from .ramsey import RamseyDriver, equilateral_extract, ramsey_extract, small_alpha_extract

HEADER = ["family", "n", "alpha", "subset_size", "distortion_verified", "psi_claimed",
          "exponent_measured", "seed", "runtime_ms", "operation", "error"]
OPERATIONS = ("extract", "equilateral", "small_alpha", "oracle")


@dataclass
class SweepConfig:
    """Instances (explicit specs or grids), distortion targets and operations."""

    instances: list[InstanceSpec]
    alphas: list[float]
    operations: list[str] = field(default_factory=lambda: ["extract"])
    output: str | None = None
    exact_mode: bool = False
    timing: bool = False
    cap_n: int = 12
    raw: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.instances:
            raise InvalidParameters("sweep needs at least one instance")
        if not self.alphas:
            raise InvalidParameters("sweep needs at least one alpha")
        unknown = [op for op in self.operations if op not in OPERATIONS]
        if unknown:
            raise InvalidParameters(f"unknown operations {unknown}; expected a subset of {list(OPERATIONS)}")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        specs: list[InstanceSpec] = [InstanceSpec.from_dict(s) for s in data.get("instances", [])]
        for g in data.get("grid", []):
            values = {k: (v if isinstance(v, list) else [v]) for k, v in g.get("params", {}).items()}
            specs.extend(grid(g["family"], values, [int(s) for s in g.get("seeds", [0])]))
        return cls(specs, [float(a) for a in data.get("alphas", [])],
                   list(data.get("operations", ["extract"])), data.get("output"),
                   bool(data.get("exact_mode", False)), bool(data.get("timing", False)),
                   int(data.get("cap_n", 12)), dict(data))

    def as_dict(self) -> dict:
        return {"instances": [s.as_dict() for s in self.instances], "alphas": self.alphas,
                "operations": self.operations, "output": self.output, "exact_mode": self.exact_mode,
                "timing": self.timing, "cap_n": self.cap_n}


@dataclass
class SweepRecord:
    family: str
    n: int
    alpha: float
    subset_size: int | None
    distortion_verified: float | None
    psi_claimed: float | None
    exponent_measured: float | None
    seed: int
    runtime_ms: float | None
    operation: str
    error: str = ""
    stage_trace: list[dict] = field(default_factory=list)

    def row(self) -> list[str]:
        return [self.family, str(self.n), fmt(self.alpha), _opt_int(self.subset_size),
                fmt(self.distortion_verified), fmt(self.psi_claimed), fmt(self.exponent_measured),
                str(self.seed), fmt(self.runtime_ms), self.operation, self.error]


def fmt(x: Any) -> str:
    """17 significant digits, ``.`` as decimal point, empty for missing values."""
    if x is None:
        return ""
    x = float(x)
    if math.isinf(x) or math.isnan(x):
        return repr(x)
    return format(x, ".17g")


def _opt_int(x: int | None) -> str:
    return "" if x is None else str(int(x))


def _exponent(size: int, n: int) -> float | None:
    if n <= 1 or size < 1:
        return None
    return math.log(size) / math.log(n)


def _run_cell(op: str, X: FiniteMetric, alpha: float, driver: Callable[[], RamseyDriver],
              cap_n: int) -> tuple[int, Any, float | None, list[dict]]:
    if op == "extract":
        if alpha > 2:
            res = ramsey_extract(X, alpha, driver=driver())
        else:
            res = ramsey_extract(X, alpha, strict=True)
        return res.size, res.report.distortion, res.psi, res.trace
    if op == "small_alpha":
        res = small_alpha_extract(X, alpha - 2)
        return res.size, res.report.distortion, res.psi, res.trace
    if op == "equilateral":
        S = equilateral_extract(X, alpha)
        return len(S), aspect_ratio(X.sub(S.indices)) if len(S) > 1 else 1, None, []
    if op == "oracle":
        S = exact_ramsey_oracle(X, alpha, "UM", cap=cap_n)
        return len(S), c_ultrametric(X.sub(S.indices)) if len(S) > 1 else 1, None, []
    raise InvalidParameters(f"unknown operation {op!r}")  # pragma: no cover


def run_sweep(config: SweepConfig) -> list[SweepRecord]:
    """Evaluate every (instance, alpha, operation) cell; rows sorted by (family, n, alpha, seed)."""
    records: list[SweepRecord] = []
    for spec in config.instances:
        try:
            X = generate(spec).metric
            if config.exact_mode:
                X = X.to_exact()
        except MetricRamseyError as exc:
            for alpha in config.alphas:
                for op in config.operations:
                    records.append(SweepRecord(spec.family, 0, alpha, None, None, None, None, spec.seed,
                                               None, op, type(exc).__name__))
            continue
        cache: dict[str, RamseyDriver] = {}

        def driver() -> RamseyDriver:
            if "d" not in cache:
                cache["d"] = RamseyDriver(X)
            return cache["d"]

        for alpha in config.alphas:
            for op in config.operations:
                t0 = time.perf_counter()
                try:
                    size, dist, psi, trace = _run_cell(op, X, alpha, driver, config.cap_n)
                    err = ""
                except MetricRamseyError as exc:
                    size, dist, psi, trace, err = None, None, None, [], type(exc).__name__
                ms = (time.perf_counter() - t0) * 1000 if config.timing else None
                records.append(SweepRecord(
                    spec.family, X.n, alpha, size, None if dist is None else float(dist), psi,
                    None if size is None else _exponent(size, X.n), spec.seed, ms, op, err, trace))
    order = {op: i for i, op in enumerate(OPERATIONS)}
    records.sort(key=lambda r: (r.family, r.n, r.alpha, r.seed, order[r.operation]))
    return records


def to_csv(config: SweepConfig, records: list[SweepRecord]) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(config.as_dict(), sort_keys=True, separators=(",", ":")) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in records:
        w.writerow(r.row())
    return buf.getvalue()


def read_csv(text: str) -> tuple[dict, list[dict]]:
    """Parse a sweep CSV back into its configuration and rows."""
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# config: "):
        raise InvalidParameters("sweep CSV must start with a '# config:' line")
    cfg = json.loads(lines[0][len("# config: "):])
    rows = list(csv.DictReader(lines[1:]))
    return cfg, rows
