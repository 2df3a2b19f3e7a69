"""Training corpora for the three sampling stages.

A graph is cut into communities. Each community becomes a community sample
labelled by its majority node class, the community graph becomes a template
sample, and every pair of communities joined by at least one edge becomes a
pair sample carrying only the edges between the two.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path
from typing import Callable

import numpy as np

from hiergraph.errors import DataError
from hiergraph.graph import (
    AttributedGraph,
    GraphCorpus,
    format_graph,
    largest_connected_component,
    read_corpus,
    read_graph,
    union_disjoint,
    write_corpus,
    write_graph,
)
from hiergraph.jobs import parallel_map
from hiergraph.partition import Partition, louvain, modularity, read_partition, write_partition
from hiergraph.seeding import STAGE_SEGMENT, derive_seed

log = logging.getLogger(__name__)

DEFAULT_REPEATS = 32

Segmenter = Callable[[AttributedGraph, int], Partition]


@dataclass(frozen=True, eq=False)
class H2Template:
    """Community-level graph; nodes carry a class and an intended size."""

    graph: AttributedGraph
    size_hints: np.ndarray

    def __post_init__(self):
        hints = np.asarray(self.size_hints, dtype=np.int64).reshape(-1)
        if len(hints) != self.graph.node_count:
            raise DataError("one size hint per template node is required")
        if len(hints) and hints.min() < 1:
            raise DataError("size hints must be >= 1")
        if self.graph.node_labels is None:
            raise DataError("template nodes need class labels")
        object.__setattr__(self, "size_hints", hints)

    @property
    def node_labels(self):
        return self.graph.node_labels

    @property
    def edge_labels(self):
        return self.graph.edge_labels

    @property
    def node_count(self):
        return self.graph.node_count


@dataclass(frozen=True, eq=False)
class PairSample:
    left: AttributedGraph
    right: AttributedGraph
    cross_edges: np.ndarray  # (k, 2): left-local, right-local
    condition: int | None = None

    def __post_init__(self):
        if self.left.node_count == 0 or self.right.node_count == 0:
            raise DataError("pair sample sides must be non-empty")
        ce = np.asarray(self.cross_edges, dtype=np.int64).reshape(-1, 2)
        if len(ce) and (ce[:, 0].min() < 0 or ce[:, 0].max() >= self.left.node_count
                        or ce[:, 1].min() < 0 or ce[:, 1].max() >= self.right.node_count):
            raise DataError("cross edge endpoint out of range")
        object.__setattr__(self, "cross_edges", ce)

    def union(self) -> AttributedGraph:
        """Both sides as one graph; left nodes first."""
        cross = [(0, u, 1, v) for u, v in self.cross_edges.tolist()]
        g = union_disjoint([self.left, self.right], cross).graph
        return g.with_labels(g.node_labels, g.label_vocab, self.condition)


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Bookkeeping that ties one template back to its source graph."""

    partition: Partition
    node_maps: tuple  # community -> ascending original node ids
    h1_start: int
    pair_start: int
    source_nodes: int
    source_edges: int


@dataclass
class HierarchicalDataset:
    h2_samples: list[H2Template] = field(default_factory=list)
    h1_samples: list[tuple[AttributedGraph, int]] = field(default_factory=list)
    pair_samples: list[PairSample] = field(default_factory=list)
    source_meta: dict = field(default_factory=dict)
    segmentations: list[Segmentation] = field(default_factory=list)

    @property
    def label_vocab(self) -> dict:
        vocab = {}
        for t in self.h2_samples:
            vocab.update(t.graph.label_vocab)
        return vocab

    def conditions(self) -> set[int]:
        return {c for _, c in self.h1_samples}

    def h1_by_condition(self) -> dict[int, list[AttributedGraph]]:
        out: dict[int, list[AttributedGraph]] = {}
        for g, c in self.h1_samples:
            out.setdefault(c, []).append(g)
        return out

    def group(self, i: int):
        """Template ``i`` with its community and pair samples."""
        seg = self.segmentations[i]
        h2 = self.h2_samples[i]
        h1 = self.h1_samples[seg.h1_start:seg.h1_start + h2.node_count]
        pairs = self.pair_samples[seg.pair_start:seg.pair_start + h2.graph.num_edges]
        return h2, h1, pairs


def majority_label(g: AttributedGraph) -> int:
    """Most frequent node label; ties go to the smallest label id."""
    if g.node_labels is None:
        raise DataError("graph has no node labels")
    if g.node_count == 0:
        raise DataError("majority label of an empty graph is undefined")
    return int(np.argmax(np.bincount(g.node_labels)))


def louvain_segmenter(resolution: float) -> Segmenter:
    return partial(_louvain_segment, resolution=resolution)


def _louvain_segment(g, seed, resolution):
    return louvain(g, resolution, seed)


def label_segmenter(g: AttributedGraph, seed: int) -> Partition:
    """Use the node labels themselves as communities (ground-truth blocks)."""
    if g.node_labels is None:
        raise DataError("label segmentation needs node labels")
    from hiergraph.partition import dense_relabel

    a = dense_relabel(g.node_labels)
    q = modularity(g, a, 1.0) if g.num_edges else 0.0
    return Partition(a, 1.0, q, int(seed))


def _with_class_labels(g: AttributedGraph) -> AttributedGraph:
    if g.node_labels is not None:
        return g
    return g.with_labels(np.zeros(g.node_count, dtype=np.int64), {0: "all"}, g.graph_label)


def segment(g: AttributedGraph, p: Partition, h1_start=0, pair_start=0):
    """Cut ``g`` along ``p`` into (template, community samples, pair samples, bookkeeping)."""
    labels = g.node_labels
    a = p.assignment
    k = p.community_count
    members = p.members()
    local = np.empty(g.node_count, dtype=np.int64)
    for nodes in members:
        local[nodes] = np.arange(len(nodes))

    nlab = int(labels.max()) + 1 if len(labels) else 1
    counts = np.zeros((k, nlab), dtype=np.int64)
    np.add.at(counts, (a, labels), 1)
    majority = counts.argmax(axis=1)

    e = g.edges
    cu, cv = a[e[:, 0]], a[e[:, 1]]
    inside = cu == cv
    order = np.argsort(cu[inside], kind="stable")
    ie = e[inside][order]
    bounds = np.searchsorted(cu[inside][order], np.arange(k + 1))
    h1 = []
    for c in range(k):
        block = ie[bounds[c]:bounds[c + 1]]
        sub = AttributedGraph(
            len(members[c]),
            local[block],
            node_labels=labels[members[c]],
            graph_label=int(majority[c]),
            label_vocab=g.label_vocab,
        )
        h1.append((sub, int(majority[c])))

    ce = e[~inside]
    ca, cb = cu[~inside], cv[~inside]
    swap = ca > cb
    lo = np.where(swap, cb, ca)
    hi = np.where(swap, ca, cb)
    left_node = np.where(swap, ce[:, 1], ce[:, 0])
    right_node = np.where(swap, ce[:, 0], ce[:, 1])
    order = np.lexsort((hi, lo))
    lo, hi, left_node, right_node = lo[order], hi[order], left_node[order], right_node[order]
    pair_keys = np.column_stack([lo, hi])
    if len(pair_keys):
        starts = np.r_[0, np.flatnonzero((pair_keys[1:] != pair_keys[:-1]).any(1)) + 1, len(pair_keys)]
    else:
        starts = np.array([0])
    pairs, h2_edges = [], []
    for s, t in zip(starts[:-1], starts[1:]):
        i, j = int(lo[s]), int(hi[s])
        h2_edges.append((i, j))
        cross = np.column_stack([local[left_node[s:t]], local[right_node[s:t]]])
        pairs.append(PairSample(h1[i][0], h1[j][0], cross, None))

    template = H2Template(
        AttributedGraph(k, np.asarray(h2_edges, dtype=np.int64).reshape(-1, 2),
                        node_labels=majority, label_vocab=g.label_vocab),
        np.array([len(m) for m in members]),
    )
    seg = Segmentation(p, tuple(members), h1_start, pair_start, g.node_count, g.num_edges)
    return template, h1, pairs, seg


def _append(ds: HierarchicalDataset, g: AttributedGraph, p: Partition):
    template, h1, pairs, seg = segment(g, p, len(ds.h1_samples), len(ds.pair_samples))
    ds.h2_samples.append(template)
    ds.h1_samples.extend(h1)
    ds.pair_samples.extend(pairs)
    ds.segmentations.append(seg)


def _source_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _segment_job(args):
    segmenter, g, seed = args
    return segmenter(g, seed)


def build_from_large_graph(g: AttributedGraph, resolution: float, repeats: int = DEFAULT_REPEATS,
                           seed: int = 0, workers: int = 1,
                           segmenter: Segmenter | None = None) -> HierarchicalDataset:
    """Repeated randomised segmentation of one large graph.

    Repeat ``r`` runs with seed ``derive_seed(seed, 0, r)``; each repeat adds
    one template, its communities and its connected community pairs.
    """
    if resolution <= 0:
        raise DataError("resolution must be positive")
    if repeats < 1:
        raise DataError("repeats must be >= 1")
    if not g.is_connected():
        g, _ = largest_connected_component(g)
        log.info("using largest connected component (%d nodes)", g.node_count)
    g = _with_class_labels(g)
    segmenter = segmenter or louvain_segmenter(resolution)
    seeds = [derive_seed(seed, STAGE_SEGMENT, r) for r in range(repeats)]
    parts = parallel_map(_segment_job, [(segmenter, g, s) for s in seeds], workers)
    ds = HierarchicalDataset(source_meta={
        "kind": "large", "resolution": resolution, "repeats": repeats, "seed": seed,
        "seeds": seeds, "source_hash": _source_hash(format_graph(g)),
    })
    for p in parts:
        _append(ds, g, p)
    return ds


def build_from_corpus(c: GraphCorpus, resolution: float, seed: int = 0, workers: int = 1,
                      segmenter: Segmenter | None = None,
                      uniform_label: bool = False) -> HierarchicalDataset:
    """One segmentation per corpus graph (largest component of each).

    With ``uniform_label`` every node is given class 0 after segmentation,
    which is how block-model graphs without node classes are treated.
    """
    if len(c) == 0:
        raise DataError("empty corpus")
    if resolution <= 0:
        raise DataError("resolution must be positive")
    segmenter = segmenter or louvain_segmenter(resolution)
    graphs = []
    for g in c:
        if not g.is_connected():
            g, _ = largest_connected_component(g)
        graphs.append(_with_class_labels(g))
    seeds = [derive_seed(seed, STAGE_SEGMENT, i) for i in range(len(graphs))]
    parts = parallel_map(_segment_job, [(segmenter, g, s) for g, s in zip(graphs, seeds)], workers)
    ds = HierarchicalDataset(source_meta={
        "kind": "corpus", "resolution": resolution, "repeats": 1, "seed": seed, "seeds": seeds,
        "source_hash": _source_hash("".join(format_graph(g) for g in graphs)),
        "count": len(graphs),
    })
    for g, p in zip(graphs, parts):
        if uniform_label:
            g = g.with_labels(np.zeros(g.node_count, dtype=np.int64), {0: "all"}, g.graph_label)
        _append(ds, g, p)
    return ds


def reassemble(ds: HierarchicalDataset, i: int) -> AttributedGraph:
    """Rebuild source graph ``i`` (in its original node order) from its samples."""
    h2, h1, pairs = ds.group(i)
    seg = ds.segmentations[i]
    return _assemble(h2, h1, pairs, seg.node_maps, seg.source_nodes)


def _assemble(h2, h1, pairs, node_maps, n):
    cross = []
    for (a, b), pair in zip(h2.graph.edges.tolist(), pairs):
        cross.extend((a, u, b, v) for u, v in pair.cross_edges.tolist())
    assembled = union_disjoint([g for g, _ in h1], cross).graph
    old_of_new = np.concatenate(node_maps) if node_maps else np.zeros(0, np.int64)
    labels = np.empty(assembled.node_count, dtype=np.int64)
    labels[old_of_new] = assembled.node_labels
    return AttributedGraph(n, old_of_new[assembled.edges], node_labels=labels,
                           label_vocab=assembled.label_vocab)


# --------------------------------------------------------------------------
# directory layout: h2/, h1/, pairs/, partitions/ and manifest.txt


def save_dataset(ds: HierarchicalDataset, root) -> None:
    root = Path(root)
    for sub in ("h2", "h1", "pairs", "partitions"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    for i, seg in enumerate(ds.segmentations):
        h2, h1, pairs = ds.group(i)
        name = f"{i:04d}"
        write_graph(h2.graph, root / "h2" / f"{name}.txt")
        (root / "h2" / f"{name}.sizes").write_text("".join(f"{s}\n" for s in h2.size_hints.tolist()))
        write_corpus(GraphCorpus([g.with_labels(g.node_labels, g.label_vocab, c) for g, c in h1],
                                 f"template {i}", "train"), root / "h1" / f"{name}.txt")
        write_corpus(GraphCorpus([p.union() for p in pairs], f"template {i}", "train"),
                     root / "pairs" / f"{name}.txt")
        (root / "pairs" / f"{name}.split").write_text(
            "".join(f"{p.left.node_count}\n" for p in pairs))
        write_partition(seg.partition, root / "partitions" / f"{name}.txt")
    meta = dict(ds.source_meta)
    meta["templates"] = len(ds.h2_samples)
    lines = []
    for k in sorted(meta):
        v = meta[k]
        if isinstance(v, (list, tuple)):
            v = ",".join(str(x) for x in v)
        lines.append(f"{k}={v}")
    (root / "manifest.txt").write_text("\n".join(lines) + "\n")


def _parse_manifest(path: Path) -> dict:
    meta = {}
    for line in path.read_text().splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise DataError(f"{path}: bad manifest line {line!r}")
        meta[k.strip()] = v.strip()
    return meta


def load_dataset(root) -> HierarchicalDataset:
    root = Path(root)
    if not (root / "manifest.txt").exists():
        raise DataError(f"{root} is not a hierarchical dataset directory")
    raw = _parse_manifest(root / "manifest.txt")
    meta = dict(raw)
    for key in ("repeats", "seed", "count", "templates"):
        if key in meta:
            meta[key] = int(meta[key])
    meta["resolution"] = float(meta.get("resolution", 1.0))
    meta["seeds"] = [int(s) for s in raw.get("seeds", "").split(",") if s]
    count = meta.pop("templates")
    ds = HierarchicalDataset(source_meta=meta)
    for i in range(count):
        name = f"{i:04d}"
        h2g = read_graph(root / "h2" / f"{name}.txt")
        h2 = H2Template(h2g, [int(x) for x in (root / "h2" / f"{name}.sizes").read_text().split()])
        h1 = [(g, g.graph_label) for g in read_corpus(root / "h1" / f"{name}.txt")]
        unions = read_corpus(root / "pairs" / f"{name}.txt").graphs
        if len(unions) != h2g.num_edges or len(h1) != h2g.node_count:
            raise DataError(f"{root}: template {i} does not match its samples")
        pairs = []
        for (a, b), u in zip(h2g.edges.tolist(), unions):
            nl = h1[a][0].node_count
            cross = u.edges[(u.edges[:, 0] < nl) & (u.edges[:, 1] >= nl)] - [0, nl]
            pairs.append(PairSample(h1[a][0], h1[b][0], cross, u.graph_label))
        part_path = root / "partitions" / f"{name}.txt"
        head = part_path.read_text().split("\n", 1)[0].split()
        n = int(head[1])
        assign = np.full(n, -1, dtype=np.int64)
        for line in part_path.read_text().splitlines()[1:]:
            tok = line.split()
            if len(tok) == 3:
                assign[int(tok[1])] = int(tok[2])
        members = tuple(np.flatnonzero(assign == c) for c in range(h2g.node_count))
        part = read_partition(part_path, _assemble(h2, h1, pairs, members, n))
        edges_total = sum(g.num_edges for g, _ in h1) + sum(len(p.cross_edges) for p in pairs)
        ds.segmentations.append(Segmentation(part, members, len(ds.h1_samples), len(ds.pair_samples),
                                             n, edges_total))
        ds.h2_samples.append(h2)
        ds.h1_samples.extend(h1)
        ds.pair_samples.extend(pairs)
    return ds
