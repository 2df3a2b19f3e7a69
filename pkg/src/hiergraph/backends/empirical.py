"""Resampling backend: training samples, lightly rewired to avoid exact copies."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from hiergraph.backends.statistical import (
    StatisticalBackend,
    fit_statistical,
    model_lines,
    write_model_text,
)
from hiergraph.errors import DataError
from hiergraph.graph import AttributedGraph
from hiergraph.random_graphs import double_edge_swap
from hiergraph.seeding import make_rng


def sample_h1_empirical(dataset, condition: int, seed: int, rewire_fraction: float = 0.1,
                        size_hint: int | None = None) -> AttributedGraph:
    """A training community of class ``condition`` after ceil(f * |E|) edge swaps.

    With a ``size_hint`` the choice is restricted to the samples whose size is
    closest to the hint.
    """
    pool = dataset.h1_by_condition().get(condition)
    if not pool:
        raise DataError(f"unknown condition class {condition}")
    return _rewired_choice(pool, seed, rewire_fraction, size_hint)


def _rewired_choice(pool, seed, rewire_fraction, size_hint):
    rng = make_rng(seed)
    if size_hint is not None:
        sizes = np.array([g.node_count for g in pool])
        gap = np.abs(sizes - size_hint)
        candidates = np.flatnonzero(gap == gap.min())
        src = pool[int(rng.choice(candidates))]
    else:
        src = pool[int(rng.integers(len(pool)))]
    nswap = math.ceil(rewire_fraction * src.num_edges)
    if nswap == 0:
        return src
    edges, _ = double_edge_swap(src.edges, nswap, rng)
    return AttributedGraph(src.node_count, edges, node_labels=src.node_labels,
                           graph_label=src.graph_label, label_vocab=src.label_vocab)


class EmpiricalBackend(StatisticalBackend):
    """Templates and communities are drawn from training data.

    Cross edges use the statistical sampler with empirically resampled
    densities.
    """

    name = "empirical"

    def __init__(self, dataset=None, *, rewire_fraction: float = 0.1, edge_epsilon: float = 1.0,
                 dataset_path: str | None = None):
        super().__init__(None, edge_epsilon=edge_epsilon, count_mode="empirical")
        self.rewire_fraction = float(rewire_fraction)
        self.dataset_path = dataset_path
        self.dataset = None
        self._pools = {}
        if dataset is not None:
            self.fit(dataset)

    def fit(self, dataset) -> "EmpiricalBackend":
        self.dataset = dataset
        self.model = fit_statistical(dataset)
        self._pools = dataset.h1_by_condition()
        return self

    def sample_h2(self, seed: int):
        if self.dataset is None:
            raise DataError("backend has not been fitted")
        rng = make_rng(seed)
        return self.dataset.h2_samples[int(rng.integers(len(self.dataset.h2_samples)))]

    def sample_h1(self, condition, size_hint, seed):
        pool = self._pools.get(condition)
        if not pool:
            raise DataError(f"unknown condition class {condition}")
        return _rewired_choice(pool, seed, self.rewire_fraction, size_hint)

    def save(self, path) -> None:
        if self.dataset_path is None:
            raise DataError("empirical models reference their dataset directory; set dataset_path")
        lines = self._header() + [
            f"rewire_fraction={self.rewire_fraction!r}",
            f"dataset={Path(self.dataset_path).resolve()}",
        ] + model_lines(self._require())
        write_model_text(path, lines)
