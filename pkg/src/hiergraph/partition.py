"""Randomised Louvain community detection with a resolution parameter.

Modularity uses the multiplicative-resolution form

    Q = sum_c [ L_c / m  -  gamma * (d_c / 2m)^2 ]

with ``L_c`` the number of edges inside community ``c`` and ``d_c`` the sum of
its degrees.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hiergraph.errors import DataError, GraphFormatError
from hiergraph.graph import AttributedGraph
from hiergraph.seeding import make_rng

MIN_GAIN = 1e-12
MAX_SWEEPS = 1000


@dataclass(frozen=True, eq=False)
class Partition:
    assignment: np.ndarray
    resolution: float
    modularity: float
    seed: int
    # modularity after every aggregation level, starting from singletons
    history: tuple = field(default=())

    @property
    def node_count(self) -> int:
        return len(self.assignment)

    @property
    def community_count(self) -> int:
        return int(self.assignment.max()) + 1 if len(self.assignment) else 0

    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.community_count)

    def members(self) -> list[np.ndarray]:
        order = np.argsort(self.assignment, kind="stable")
        bounds = np.cumsum(self.sizes())[:-1]
        return np.split(order, bounds)

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return (np.array_equal(self.assignment, other.assignment)
                and self.resolution == other.resolution
                and self.seed == other.seed)

    __hash__ = None


def dense_relabel(assignment) -> np.ndarray:
    """Renumber community ids 0..k-1 in order of first appearance."""
    a = np.asarray(assignment, dtype=np.int64)
    if len(a) == 0:
        return a.copy()
    uniq, first, inv = np.unique(a, return_index=True, return_inverse=True)
    rank = np.empty(len(uniq), dtype=np.int64)
    rank[np.argsort(first)] = np.arange(len(uniq))
    return rank[inv]


def modularity(g: AttributedGraph, assignment, resolution: float = 1.0) -> float:
    m = g.num_edges
    if m == 0:
        raise DataError("modularity is undefined for a graph without edges")
    if resolution <= 0:
        raise DataError("resolution must be positive")
    a = np.asarray(assignment, dtype=np.int64)
    if len(a) != g.node_count:
        raise DataError(f"assignment has {len(a)} entries for {g.node_count} nodes")
    k = int(a.max()) + 1
    cu, cv = a[g.edges[:, 0]], a[g.edges[:, 1]]
    internal = np.bincount(cu[cu == cv], minlength=k)
    degree_sum = np.bincount(a, weights=g.degrees, minlength=k)
    return float(np.sum(internal / m - resolution * (degree_sum / (2.0 * m)) ** 2))


def _move_nodes(nbrs, wts, k, m, gamma, order):
    """Local-moving phase on a weighted level graph. Returns (community, moved)."""
    n = len(k)
    com = list(range(n))
    tot = list(k)
    m2 = 2.0 * m
    threshold = MIN_GAIN * m
    moved = False
    for _ in range(MAX_SWEEPS):
        improved = False
        for i in order:
            ki = k[i]
            if ki == 0:
                continue
            ci = com[i]
            links = {}
            for j, w in zip(nbrs[i], wts[i]):
                c = com[j]
                links[c] = links.get(c, 0.0) + w
            tot[ci] -= ki
            scale = gamma * ki / m2
            stay = links.get(ci, 0.0) - scale * tot[ci]
            best_c, best = ci, stay
            for c, w in links.items():
                gain = w - scale * tot[c]
                if gain > best:
                    best_c, best = c, gain
            if best_c != ci and best - stay <= threshold:
                best_c = ci
            tot[best_c] += ki
            if best_c != ci:
                com[i] = best_c
                improved = moved = True
        if not improved:
            break
    return com, moved


def _aggregate(nbrs, wts, loops, com):
    ids = {}
    dense = [ids.setdefault(c, len(ids)) for c in com]
    n2 = len(ids)
    new_loops = [0.0] * n2
    links = [dict() for _ in range(n2)]
    for i, ci in enumerate(dense):
        new_loops[ci] += loops[i]
        row = links[ci]
        for j, w in zip(nbrs[i], wts[i]):
            cj = dense[j]
            if cj == ci:
                # each internal edge is seen from both endpoints
                new_loops[ci] += w / 2.0
            else:
                row[cj] = row.get(cj, 0.0) + w
    new_nbrs = [list(r.keys()) for r in links]
    new_wts = [list(r.values()) for r in links]
    return new_nbrs, new_wts, new_loops, dense


def louvain(g: AttributedGraph, resolution: float = 1.0, seed: int = 0) -> Partition:
    """Two-phase Louvain with a seeded random node visiting order.

    Nodes move only on a strictly positive modularity gain (above 1e-12);
    among equal best gains the first neighbouring community seen wins.
    """
    if resolution <= 0:
        raise DataError("resolution must be positive")
    n = g.node_count
    m = g.num_edges
    if m == 0:
        warnings.warn("graph has no edges; returning singleton partition", RuntimeWarning, stacklevel=2)
        return Partition(np.arange(n), float(resolution), 0.0, int(seed), (0.0,))

    rng = make_rng(seed)
    a = g.csr
    indptr = a.indptr.tolist()
    indices = a.indices.tolist()
    nbrs = [indices[indptr[i]:indptr[i + 1]] for i in range(n)]
    wts = [[1.0] * len(r) for r in nbrs]
    loops = [0.0] * n
    assignment = np.arange(n)
    history = [modularity(g, assignment, resolution)]

    while True:
        k = [sum(w) + 2.0 * lw for w, lw in zip(wts, loops)]
        order = rng.permutation(len(k)).tolist()
        com, moved = _move_nodes(nbrs, wts, k, m, resolution, order)
        if not moved:
            break
        nbrs, wts, loops, dense = _aggregate(nbrs, wts, loops, com)
        assignment = np.asarray(dense, dtype=np.int64)[assignment]
        history.append(modularity(g, assignment, resolution))
        if len(nbrs) == 1:
            break

    assignment = dense_relabel(assignment)
    q = modularity(g, assignment, resolution)
    return Partition(assignment, float(resolution), q, int(seed), tuple(history))


def partition_stats(p: Partition) -> tuple[int, int]:
    """(community count, lower median community size)."""
    sizes = np.sort(p.sizes())
    if len(sizes) == 0:
        return 0, 0
    return len(sizes), int(sizes[(len(sizes) - 1) // 2])


def format_partition(p: Partition) -> str:
    lines = [f"partition {p.node_count} {p.community_count} {p.resolution!r} {p.seed}"]
    lines += [f"c {i} {c}" for i, c in enumerate(p.assignment.tolist())]
    return "\n".join(lines) + "\n"


def write_partition(p: Partition, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_partition(p))


def read_partition(path, graph: AttributedGraph) -> Partition:
    """Load a partition; modularity is recomputed against ``graph``."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise GraphFormatError("empty partition file")
    head = lines[0].split()
    if len(head) != 5 or head[0] != "partition":
        raise GraphFormatError("expected 'partition <n> <k> <resolution> <seed>'", 1)
    try:
        n, k, res, seed = int(head[1]), int(head[2]), float(head[3]), int(head[4])
    except ValueError:
        raise GraphFormatError("bad partition header", 1) from None
    a = np.full(n, -1, dtype=np.int64)
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip() or line.startswith("#"):
            continue
        tok = line.split()
        if len(tok) != 3 or tok[0] != "c":
            raise GraphFormatError(f"unrecognised line {line!r}", lineno)
        i, c = int(tok[1]), int(tok[2])
        if not 0 <= i < n or not 0 <= c < k:
            raise GraphFormatError(f"entry {line!r} out of range", lineno)
        a[i] = c
    if (a < 0).any():
        raise GraphFormatError("partition does not assign every node")
    if len(np.unique(a)) != k:
        raise GraphFormatError("community ids are not dense")
    if n != graph.node_count:
        raise DataError(f"partition covers {n} nodes, graph has {graph.node_count}")
    q = modularity(graph, a, res) if graph.num_edges else 0.0
    return Partition(a, res, q, seed)
