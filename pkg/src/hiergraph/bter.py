"""Block Two-Level Erdos-Renyi (BTER) baseline.

Phase one groups nodes, sorted by target degree, into consecutive blocks of
``d + 1`` nodes (``d`` the smallest target degree in the block) and wires each
block as G(d + 1, rho) with ``rho = c_d ** (1/3)``. Phase two spends whatever
degree is left over on a Chung-Lu graph over the excess degrees. Degree-one
nodes only take part in phase two.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from hiergraph.errors import DataError
from hiergraph.graph import AttributedGraph
from hiergraph.metrics import local_clustering
from hiergraph.random_graphs import chung_lu, erdos_renyi
from hiergraph.seeding import make_rng

log = logging.getLogger(__name__)

PHASE2_RETRIES = 20


@dataclass
class BterParams:
    degree_counts: dict[int, int]
    clustering_by_degree: dict[int, float]
    seed: int = 0

    def __post_init__(self):
        self.degree_counts = {int(d): int(n) for d, n in self.degree_counts.items() if n}
        if any(d < 1 for d in self.degree_counts):
            raise DataError("degree counts are only kept for degree >= 1")
        self.clustering_by_degree = {int(d): float(c) for d, c in self.clustering_by_degree.items()}
        for d, c in self.clustering_by_degree.items():
            if not 0.0 <= c <= 1.0:
                raise DataError(f"clustering for degree {d} outside [0, 1]")

    def clustering(self, d: int) -> float:
        return 0.0 if d <= 1 else self.clustering_by_degree.get(d, 0.0)

    def target_degrees(self) -> np.ndarray:
        ds = sorted(self.degree_counts)
        return np.repeat(np.array(ds, dtype=np.int64), [self.degree_counts[d] for d in ds])


@dataclass
class BterSample:
    graph: AttributedGraph
    blocks: list[tuple[int, int, int]] = field(default_factory=list)  # (start, size, nominal degree)
    dropped: int = 0
    phase1_edges: int = 0


def fit_bter(g: AttributedGraph, seed: int = 0) -> BterParams:
    """Degree histogram and mean local clustering per degree."""
    deg = g.degrees
    cc = local_clustering(g)
    counts, clus = {}, {}
    for d in np.unique(deg[deg >= 1]).tolist():
        mask = deg == d
        counts[d] = int(mask.sum())
        clus[d] = 0.0 if d == 1 else float(cc[mask].mean())
    return BterParams(counts, clus, seed)


def sample_bter(p: BterParams, seed: int | None = None) -> BterSample:
    targets = p.target_degrees()
    n = len(targets)
    if n == 0:
        raise DataError("BTER needs at least one node of positive degree")
    rng = make_rng(p.seed if seed is None else seed)

    edges = set()
    blocks = []
    excess = targets.astype(float)
    i = int(np.searchsorted(targets, 2))
    while i < n:
        d = int(targets[i])
        size = min(d + 1, n - i)
        rho = p.clustering(d) ** (1.0 / 3.0)
        for u, v in erdos_renyi(size, rho, rng).tolist():
            edges.add((i + u, i + v))
        excess[i:i + size] = np.maximum(0.0, targets[i:i + size] - rho * (size - 1))
        blocks.append((i, size, d))
        i += size
    phase1 = len(edges)

    # phase two: independent Chung-Lu pairs on the excess degrees; a pair that
    # is already a phase-one edge is redrawn with probability proportional to
    # excess_u * excess_v, at most PHASE2_RETRIES times
    dropped = 0
    total = excess.sum()
    if total > 0:
        collided = 0
        for u, v in chung_lu(excess, rng).tolist():
            if (u, v) in edges:
                collided += 1
            else:
                edges.add((u, v))
        if collided:
            prob = excess / total
            draws = rng.choice(n, size=(collided * PHASE2_RETRIES, 2), p=prob)
            pos = 0
            for _ in range(collided):
                for _attempt in range(PHASE2_RETRIES):
                    u, v = draws[pos]
                    pos += 1
                    key = (int(u), int(v)) if u < v else (int(v), int(u))
                    if u != v and key not in edges:
                        edges.add(key)
                        break
                else:
                    dropped += 1
    if dropped:
        log.warning("bter: %d phase-two edges dropped after %d retries each", dropped, PHASE2_RETRIES)
    e = np.array(sorted(edges), dtype=np.int64).reshape(-1, 2)
    return BterSample(AttributedGraph(n, e), blocks, dropped, phase1)
