"""Backend contract for the three conditional sampling stages."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from hiergraph.errors import HierGraphError
from hiergraph.graph import AttributedGraph


class MaskViolation(HierGraphError):
    """A cross-edge sampler proposed a pair inside one community."""


@dataclass(frozen=True)
class PairMask:
    """Which node pairs of a joined (left + right) graph may receive edges.

    Pairs within the left part or within the right part are frozen; only the
    ``left_size * right_size`` bipartite block between them is free.
    Union indices put left nodes first.
    """

    left_size: int
    right_size: int

    @property
    def free_size(self) -> int:
        return self.left_size * self.right_size

    def is_free(self, a: int, b: int) -> bool:
        n = self.left_size + self.right_size
        if not (0 <= a < n and 0 <= b < n):
            return False
        return (a < self.left_size) != (b < self.left_size)

    def matrix(self) -> np.ndarray:
        n = self.left_size + self.right_size
        side = np.arange(n) < self.left_size
        return side[:, None] != side[None, :]

    def to_union(self, pairs) -> np.ndarray:
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        return np.column_stack([p[:, 0], p[:, 1] + self.left_size])

    def validate(self, pairs) -> np.ndarray:
        """Check (left_node, right_node) pairs; raise on any frozen or repeated pair."""
        p = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        bad = ((p[:, 0] < 0) | (p[:, 0] >= self.left_size)
               | (p[:, 1] < 0) | (p[:, 1] >= self.right_size))
        if bad.any():
            raise MaskViolation(f"pair {tuple(p[bad][0])} is outside the free left x right block")
        if len(np.unique(p[:, 0] * self.right_size + p[:, 1])) != len(p):
            raise MaskViolation("cross-edge sample repeats a pair")
        return p

    def validate_union(self, pairs) -> None:
        """Same check for pairs given in union indices."""
        for a, b in np.asarray(pairs, dtype=np.int64).reshape(-1, 2).tolist():
            if not self.is_free(a, b):
                raise MaskViolation(f"union pair ({a}, {b}) lies inside one part")


class GeneratorBackend(ABC):
    """What a model must offer to drive hierarchical sampling.

    Every ``sample_*`` call must be a pure function of the fitted state and
    its arguments (including ``seed``) so jobs can run in any order.
    """

    name = "abstract"

    @abstractmethod
    def fit(self, dataset) -> "GeneratorBackend":
        ...

    @abstractmethod
    def sample_h2(self, seed: int):
        """Return an ``H2Template``."""

    @abstractmethod
    def sample_h1(self, condition: int, size_hint: int | None, seed: int) -> AttributedGraph:
        ...

    @abstractmethod
    def sample_cross_edges(self, left: AttributedGraph, right: AttributedGraph,
                           condition: int | None, seed: int) -> np.ndarray:
        """Return (left_node, right_node) pairs."""

    @abstractmethod
    def save(self, path) -> None:
        ...

    def checked_cross_edges(self, left, right, condition, seed) -> np.ndarray:
        pairs = self.sample_cross_edges(left, right, condition, seed)
        return PairMask(left.node_count, right.node_count).validate(pairs)


def conditioning_fidelity(backend: GeneratorBackend, condition: int, samples: int = 100,
                          seed: int = 0, size_hint: int | None = None) -> float:
    """Fraction of sampled community graphs whose majority class is ``condition``."""
    from hiergraph.hierarchy import majority_label
    from hiergraph.seeding import derive_seed

    hits = 0
    for i in range(samples):
        g = backend.sample_h1(condition, size_hint, derive_seed(seed, condition, i))
        hits += g.node_count > 0 and majority_label(g) == condition
    return hits / samples
