import numpy as np
import pytest

from hiergraph.graph import AttributedGraph


def graph(n, edges, **kw):
    return AttributedGraph.from_edges(n, edges, **kw)


def complete(n):
    return graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path(n):
    return graph(n, [(i, i + 1) for i in range(n - 1)])


def cycle(n):
    return graph(n, [(i, (i + 1) % n) for i in range(n)])


def random_graph(n, p, seed):
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    hit = rng.random(len(iu)) < p
    return AttributedGraph(n, np.column_stack([iu[hit], ju[hit]]))


@pytest.fixture
def triangle_pendant():
    # triangle 0-1-2 plus pendant edge 3-0
    return graph(4, [(0, 1), (1, 2), (0, 2), (0, 3)])


@pytest.fixture
def bridged_triangles():
    return graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (2, 3)])


@pytest.fixture
def two_triangles():
    return graph(6, [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)])


# real datasets are not shipped; point these variables at local copies to
# enable the tests that need them
DATA_ENV = {
    "cora_npz": "HIERGRAPH_CORA_NPZ",
    "cora_content": "HIERGRAPH_CORA_CONTENT",
    "cora_cites": "HIERGRAPH_CORA_CITES",
    "facebook_edges": "HIERGRAPH_FACEBOOK_EDGES",
    "facebook_target": "HIERGRAPH_FACEBOOK_TARGET",
}


def data_paths(*keys):
    """Configured paths for ``keys``, or None when any of them is missing."""
    import os
    from pathlib import Path

    out = {}
    for k in keys:
        v = os.environ.get(DATA_ENV[k])
        if not v or not Path(v).exists():
            return None
        out[k] = v
    return out


def ingest_cora_from_env():
    from hiergraph.datasets import ingest_cora, ingest_cora_npz

    p = data_paths("cora_npz")
    if p:
        return ingest_cora_npz(p["cora_npz"])
    p = data_paths("cora_content", "cora_cites")
    if p:
        return ingest_cora(p["cora_content"], p["cora_cites"])
    return None


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance verdicts, one line per criterion."""
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n, status, detail in sorted(lines):
        terminalreporter.write_line(f"criterion {n:2d}: {status:7s} {detail}")
