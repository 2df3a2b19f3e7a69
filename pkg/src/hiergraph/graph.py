"""Attributed undirected simple graphs, subgraph extraction, assembly and text I/O.

Native text format (UTF-8, LF)::

    graph <node_count> <edge_count> <graph_label|->
    # label <id> <name>          (optional label vocabulary)
    v <index> <node_label|->
    e <u> <v> <edge_label|->     (u < v)

Other lines starting with ``#`` are comments. A corpus file holds several
graphs separated by blank lines.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from hiergraph.errors import DataError, GraphFormatError

SPLITS = ("train", "val", "test", "generated")


def _readonly(a):
    a.setflags(write=False)
    return a


def _canonical_edges(edges, node_count, edge_labels=None, dedupe=False):
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    lab = None if edge_labels is None else np.asarray(edge_labels, dtype=np.int64).reshape(-1)
    if lab is not None and len(lab) != len(e):
        raise DataError(f"{len(lab)} edge labels for {len(e)} edges")
    if len(e):
        if e.min() < 0 or e.max() >= node_count:
            bad = e[(e < 0).any(1) | (e >= node_count).any(1)][0]
            raise DataError(f"edge {tuple(bad)} out of range for {node_count} nodes")
        loops = e[:, 0] == e[:, 1]
        if loops.any():
            raise DataError(f"self-loop on node {e[loops][0, 0]}")
    e = np.sort(e, axis=1)
    order = np.lexsort((e[:, 1], e[:, 0]))
    e = e[order]
    if lab is not None:
        lab = lab[order]
    if len(e) > 1:
        dup = np.r_[False, (e[1:] == e[:-1]).all(1)]
        if dup.any():
            if not dedupe:
                raise DataError(f"duplicate edge {tuple(e[dup][0])}")
            e = e[~dup]
            if lab is not None:
                lab = lab[~dup]
    return e, lab


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Immutable undirected simple graph with optional categorical labels.

    ``edges`` is always stored canonically: ``u < v`` per row, rows sorted.
    A label channel that is ``None`` is absent, which is distinct from every
    node carrying label 0. A channel with no entries (no nodes, or no edges)
    is stored as absent so that every graph has one canonical form.
    """

    node_count: int
    edges: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))
    node_labels: np.ndarray | None = None
    edge_labels: np.ndarray | None = None
    graph_label: int | None = None
    label_vocab: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        n = int(self.node_count)
        if n < 0:
            raise DataError("negative node count")
        e, lab = _canonical_edges(self.edges, n, self.edge_labels)
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("node_count", n)
        set_("edges", _readonly(e))
        set_("edge_labels", None if lab is None or len(e) == 0 else _readonly(lab))
        if self.node_labels is not None and n == 0:
            set_("node_labels", None)
        elif self.node_labels is not None:
            nl = np.array(self.node_labels, dtype=np.int64).reshape(-1)
            if len(nl) != n:
                raise DataError(f"{len(nl)} node labels for {n} nodes")
            if len(nl) and nl.min() < 0:
                raise DataError("node labels must be non-negative")
            set_("node_labels", _readonly(nl))
        if self.graph_label is not None:
            set_("graph_label", int(self.graph_label))
        set_("label_vocab", {int(k): str(v) for k, v in dict(self.label_vocab).items()})

    @classmethod
    def from_edges(cls, node_count, edges, *, node_labels=None, edge_labels=None,
                   graph_label=None, label_vocab=None, dedupe=False):
        """Build a graph, optionally dropping repeated edges instead of failing."""
        e, lab = _canonical_edges(edges, int(node_count), edge_labels, dedupe=dedupe)
        return cls(int(node_count), e, node_labels, lab, graph_label, label_vocab or {})

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def csr(self) -> sp.csr_matrix:
        n = self.node_count
        e = self.edges
        rows = np.concatenate([e[:, 0], e[:, 1]])
        cols = np.concatenate([e[:, 1], e[:, 0]])
        a = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
        a.sort_indices()
        return a

    @cached_property
    def degrees(self) -> np.ndarray:
        d = np.bincount(self.edges.ravel(), minlength=self.node_count).astype(np.int64)
        return _readonly(d)

    @cached_property
    def neighbors(self) -> list[np.ndarray]:
        a = self.csr
        return [a.indices[a.indptr[i]:a.indptr[i + 1]] for i in range(self.node_count)]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.edges.tolist()))

    def density(self) -> float:
        n = self.node_count
        return 2.0 * self.num_edges / (n * (n - 1)) if n > 1 else 0.0

    def is_connected(self) -> bool:
        if self.node_count <= 1:
            return True
        ncomp, _ = connected_components(self.csr, directed=False)
        return ncomp == 1

    def with_labels(self, node_labels=None, label_vocab=None, graph_label=None):
        return dataclasses.replace(
            self,
            node_labels=node_labels,
            label_vocab=self.label_vocab if label_vocab is None else label_vocab,
            graph_label=graph_label,
        )

    def to_networkx(self):
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        g.add_edges_from(self.edges.tolist())
        return g

    def __eq__(self, other):
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return (
            self.node_count == other.node_count
            and np.array_equal(self.edges, other.edges)
            and _same_channel(self.node_labels, other.node_labels)
            and _same_channel(self.edge_labels, other.edge_labels)
            and self.graph_label == other.graph_label
            and dict(self.label_vocab) == dict(other.label_vocab)
        )

    __hash__ = None

    def __repr__(self):
        return f"AttributedGraph(nodes={self.node_count}, edges={self.num_edges})"


def _same_channel(a, b):
    if a is None or b is None:
        return a is None and b is None
    return np.array_equal(a, b)


@dataclass
class GraphCorpus:
    graphs: list[AttributedGraph]
    provenance: str = ""
    split: str = "train"

    def __post_init__(self):
        if self.split not in SPLITS:
            raise DataError(f"unknown split {self.split!r}; expected one of {SPLITS}")
        self.graphs = list(self.graphs)

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]


# --------------------------------------------------------------------------
# subgraphs


def induced_subgraph(g: AttributedGraph, nodes: Iterable[int]) -> tuple[AttributedGraph, np.ndarray]:
    """Subgraph on ``nodes`` with indices compacted in ascending original order.

    Returns the subgraph and ``node_map`` where ``node_map[new] == old``.
    """
    keep = np.unique(np.asarray(list(nodes) if not isinstance(nodes, np.ndarray) else nodes,
                                dtype=np.int64))
    if len(keep) and (keep[0] < 0 or keep[-1] >= g.node_count):
        raise DataError(f"node index out of range for graph with {g.node_count} nodes")
    remap = np.full(g.node_count, -1, dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    e = g.edges
    inside = (remap[e[:, 0]] >= 0) & (remap[e[:, 1]] >= 0)
    sub = AttributedGraph(
        len(keep),
        remap[e[inside]],
        node_labels=None if g.node_labels is None else g.node_labels[keep],
        edge_labels=None if g.edge_labels is None else g.edge_labels[inside],
        graph_label=g.graph_label,
        label_vocab=g.label_vocab,
    )
    return sub, keep


def component_labels(g: AttributedGraph) -> np.ndarray:
    if g.node_count == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = connected_components(g.csr, directed=False)
    return labels


def largest_connected_component(g: AttributedGraph) -> tuple[AttributedGraph, np.ndarray]:
    """Largest component; among equal sizes the one holding the lowest node index."""
    if g.node_count == 0:
        return g, np.zeros(0, dtype=np.int64)
    labels = component_labels(g)
    sizes = np.bincount(labels)
    first = np.full(len(sizes), g.node_count, dtype=np.int64)
    np.minimum.at(first, labels, np.arange(g.node_count))
    best = int(np.lexsort((first, -sizes))[0])
    if sizes[best] == g.node_count:
        return g, np.arange(g.node_count)
    return induced_subgraph(g, np.flatnonzero(labels == best))


# --------------------------------------------------------------------------
# assembly


class Assembly(NamedTuple):
    graph: AttributedGraph
    offsets: np.ndarray
    duplicates: int


def union_disjoint(parts: Sequence[AttributedGraph], cross_edges=()) -> Assembly:
    """Place ``parts`` side by side and add edges between them.

    ``cross_edges`` holds ``(part_i, local_u, part_j, local_v)`` tuples with an
    optional fifth element, the edge label. Repeated cross edges are dropped
    and counted in ``Assembly.duplicates``.
    """
    sizes = np.array([p.node_count for p in parts], dtype=np.int64)
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]]) if len(parts) else np.zeros(0, np.int64)
    n = int(sizes.sum())

    blocks, labels = [], []
    any_edge_labels = any(p.edge_labels is not None for p in parts)
    for off, p in zip(offsets, parts):
        blocks.append(p.edges + off)
        if any_edge_labels:
            if p.edge_labels is None and p.num_edges:
                raise DataError("cannot mix parts with and without edge labels")
            labels.append(p.edge_labels if p.edge_labels is not None else np.zeros(0, np.int64))

    seen = set()
    cross, cross_lab = [], []
    duplicates = 0
    for ce in cross_edges:
        if len(ce) not in (4, 5):
            raise DataError(f"cross edge {ce!r} must have 4 or 5 fields")
        i, u, j, v = (int(x) for x in ce[:4])
        lab = ce[4] if len(ce) == 5 else None
        if not (0 <= i < len(parts) and 0 <= j < len(parts)):
            raise DataError(f"cross edge {ce!r} references a missing part")
        if i == j:
            raise DataError(f"cross edge {ce!r} joins a part to itself")
        if not (0 <= u < sizes[i] and 0 <= v < sizes[j]):
            raise DataError(f"cross edge {ce!r} has an out-of-range local index")
        a, b = sorted((int(offsets[i]) + u, int(offsets[j]) + v))
        if (a, b) in seen:
            duplicates += 1
            continue
        seen.add((a, b))
        cross.append((a, b))
        cross_lab.append(lab)

    has_cross_labels = any(lab is not None for lab in cross_lab)
    if has_cross_labels and not any_edge_labels and any(p.num_edges for p in parts):
        raise DataError("cross edges carry labels but part edges do not")
    edge_labels = None
    if any_edge_labels or has_cross_labels:
        if any(lab is None for lab in cross_lab):
            raise DataError("labelled graph assembly needs a label on every cross edge")
        edge_labels = np.concatenate(labels + [np.asarray(cross_lab, dtype=np.int64)])

    node_labels = None
    with_labels = [p.node_labels is not None for p in parts]
    if parts and all(with_labels):
        node_labels = np.concatenate([p.node_labels for p in parts])
    elif any(with_labels):
        raise DataError("cannot mix parts with and without node labels")

    vocab = {}
    for p in parts:
        for k, v in p.label_vocab.items():
            if vocab.setdefault(k, v) != v:
                raise DataError(f"conflicting vocabulary entries for label {k}")

    edges = np.concatenate(blocks + [np.asarray(cross, dtype=np.int64).reshape(-1, 2)])
    g = AttributedGraph(n, edges, node_labels, edge_labels, None, vocab)
    return Assembly(g, offsets, duplicates)


# --------------------------------------------------------------------------
# text I/O


def _fmt(x):
    return "-" if x is None else str(int(x))


def format_graph(g: AttributedGraph) -> str:
    lines = [f"graph {g.node_count} {g.num_edges} {_fmt(g.graph_label)}"]
    for k in sorted(g.label_vocab):
        lines.append(f"# label {k} {g.label_vocab[k]}")
    nl = g.node_labels.tolist() if g.node_labels is not None else None
    for i in range(g.node_count):
        lines.append(f"v {i} {'-' if nl is None else nl[i]}")
    el = g.edge_labels.tolist() if g.edge_labels is not None else None
    for k, (u, v) in enumerate(g.edges.tolist()):
        lines.append(f"e {u} {v} {'-' if el is None else el[k]}")
    return "\n".join(lines) + "\n"


def _label(tok, lineno):
    if tok == "-":
        return None
    try:
        val = int(tok)
    except ValueError:
        raise GraphFormatError(f"bad label {tok!r}", lineno) from None
    if val < 0:
        raise GraphFormatError(f"negative label {val}", lineno)
    return val


def _int(tok, lineno, what):
    try:
        return int(tok)
    except ValueError:
        raise GraphFormatError(f"bad {what} {tok!r}", lineno) from None


def _parse_block(lines: list[tuple[int, str]]) -> AttributedGraph:
    lineno, header = lines[0]
    parts = header.split()
    if len(parts) != 4 or parts[0] != "graph":
        raise GraphFormatError("expected 'graph <nodes> <edges> <label|->'", lineno)
    n = _int(parts[1], lineno, "node count")
    m = _int(parts[2], lineno, "edge count")
    if n < 0 or m < 0:
        raise GraphFormatError("negative count", lineno)
    glabel = _label(parts[3], lineno)

    vocab = {}
    node_labels = [None] * n
    seen_nodes = np.zeros(n, dtype=bool)
    edges, elabels = [], []
    seen_edges = set()
    for lineno, line in lines[1:]:
        if line.startswith("#"):
            tok = line[1:].split(None, 2)
            if len(tok) == 3 and tok[0] == "label":
                vocab[_int(tok[1], lineno, "label id")] = tok[2]
            continue
        tok = line.split()
        if tok[0] == "v" and len(tok) == 3:
            i = _int(tok[1], lineno, "node index")
            if not 0 <= i < n:
                raise GraphFormatError(f"node {i} out of range for {n} nodes", lineno)
            if seen_nodes[i]:
                raise GraphFormatError(f"node {i} declared twice", lineno)
            seen_nodes[i] = True
            node_labels[i] = _label(tok[2], lineno)
        elif tok[0] == "e" and len(tok) == 4:
            u = _int(tok[1], lineno, "node index")
            v = _int(tok[2], lineno, "node index")
            if u == v:
                raise GraphFormatError(f"self-loop on node {u}", lineno)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphFormatError(f"edge ({u},{v}) out of range for {n} nodes", lineno)
            key = (min(u, v), max(u, v))
            if key in seen_edges:
                raise GraphFormatError(f"duplicate edge {key}", lineno)
            seen_edges.add(key)
            edges.append(key)
            elabels.append(_label(tok[3], lineno))
        else:
            raise GraphFormatError(f"unrecognised line {line!r}", lineno)

    if len(edges) != m:
        raise GraphFormatError(f"header declares {m} edges, found {len(edges)}", lines[0][0])
    labelled = [x is not None for x in node_labels]
    if any(labelled) and not all(labelled):
        raise GraphFormatError("node labels must be given for all nodes or none", lines[0][0])
    elab_present = [x is not None for x in elabels]
    if any(elab_present) and not all(elab_present):
        raise GraphFormatError("edge labels must be given for all edges or none", lines[0][0])
    return AttributedGraph(
        n,
        np.asarray(edges, dtype=np.int64).reshape(-1, 2),
        node_labels=np.asarray(node_labels, dtype=np.int64) if n and all(labelled) else None,
        edge_labels=np.asarray(elabels, dtype=np.int64) if edges and all(elab_present) else None,
        graph_label=glabel,
        label_vocab=vocab,
    )


def _blocks(text: str):
    """Split text into per-graph lists of (line number, line)."""
    block: list[tuple[int, str]] = []
    preamble: list[str] = []
    for lineno, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            if block:
                yield preamble, block
                block, preamble = [], []
            continue
        if not block and line.startswith("#"):
            preamble.append(line)
            continue
        if not block and not line.startswith("graph"):
            raise GraphFormatError(f"expected graph header, got {line!r}", lineno)
        block.append((lineno, line))
    if block:
        yield preamble, block


def parse_graph(text: str) -> AttributedGraph:
    blocks = list(_blocks(text))
    if len(blocks) != 1:
        raise GraphFormatError(f"expected exactly one graph, found {len(blocks)}")
    return _parse_block(blocks[0][1])


def read_graph(path) -> AttributedGraph:
    return parse_graph(Path(path).read_text(encoding="utf-8"))


def write_graph(g: AttributedGraph, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_graph(g))


def format_corpus(c: GraphCorpus) -> str:
    head = f"# corpus split={c.split} provenance={c.provenance}\n"
    return head + "\n".join(format_graph(g) for g in c.graphs)


def parse_corpus(text: str) -> GraphCorpus:
    graphs, split, provenance = [], "train", ""
    for preamble, block in _blocks(text):
        for line in preamble:
            if line.startswith("# corpus "):
                fields = line[len("# corpus "):]
                if fields.startswith("split="):
                    split, _, rest = fields[len("split="):].partition(" ")
                    if rest.startswith("provenance="):
                        provenance = rest[len("provenance="):]
        graphs.append(_parse_block(block))
    return GraphCorpus(graphs, provenance=provenance, split=split)


def read_corpus(path) -> GraphCorpus:
    return parse_corpus(Path(path).read_text(encoding="utf-8"))


def write_corpus(c: GraphCorpus, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_corpus(c))
