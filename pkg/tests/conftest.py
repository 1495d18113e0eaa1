from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from metric_ramsey.instances import random_metric
from metric_ramsey.metric import build_metric

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def euclidean_metric(n: int, seed: int, dim: int = 2, exact: bool = False):
    rng = np.random.default_rng(seed)
    P = rng.uniform(size=(n, dim))
    D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(axis=2))
    return build_metric(D, exact=exact)


@pytest.fixture
def small_random():
    return random_metric(10, 7)


@pytest.fixture
def plane64():
    return euclidean_metric(64, 3)


def random_nested(rng: np.random.Generator, n_leaves: int, *, k: float = 1.0, top: float = 1000.0):
    """Random labelled tree as nested dicts; child labels are at most ``label / k``."""
    counter = iter(range(n_leaves))

    def rec(m: int, label: float):
        if m == 1:
            return {"leaf": next(counter)}
        parts = int(rng.integers(2, min(m, 4) + 1))
        cuts = np.sort(rng.choice(np.arange(1, m), size=parts - 1, replace=False))
        sizes = np.diff(np.concatenate([[0], cuts, [m]]))
        kids = []
        for s in sizes:
            child = label / k * float(rng.uniform(0.3, 1.0)) if k > 1 else label * float(rng.uniform(0.2, 0.95))
            kids.append(rec(int(s), child))
        return {"delta": label, "children": kids}

    return rec(n_leaves, top)


def lca_metric(nested) -> dict[tuple[int, int], float]:
    """Independent oracle: leaf distance = label of the lowest common ancestor."""
    out: dict[tuple[int, int], float] = {}

    def leaves(nd):
        if "leaf" in nd:
            return [nd["leaf"]]
        return [x for c in nd["children"] for x in leaves(c)]

    def rec(nd):
        if "leaf" in nd:
            return
        groups = [leaves(c) for c in nd["children"]]
        for a in range(len(groups)):
            for b in range(len(groups)):
                if a != b:
                    for x in groups[a]:
                        for y in groups[b]:
                            out[(x, y)] = nd["delta"]
        for c in nd["children"]:
            rec(c)

    rec(nested)
    return out


def petersen_edges() -> list[tuple[int, int]]:
    outer = [(i, (i + 1) % 5) for i in range(5)]
    spokes = [(i, i + 5) for i in range(5)]
    inner = [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return outer + spokes + inner


@pytest.fixture
def petersen():
    from metric_ramsey.spectral import Graph

    return Graph.from_edges(10, petersen_edges())


def pytest_terminal_summary(terminalreporter):
    try:
        from tests.test_acceptance import RESULTS
    except ImportError:  # pragma: no cover
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
