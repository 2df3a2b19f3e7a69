"""Benchmark SBM corpus generation and ingestion of Cora and MUSAE-Facebook."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hiergraph.errors import DataError
from hiergraph.graph import AttributedGraph, GraphCorpus, largest_connected_component
from hiergraph.random_graphs import erdos_renyi
from hiergraph.seeding import derive_seed, make_rng

log = logging.getLogger(__name__)

CORA_CLASSES = (
    "Case_Based",
    "Genetic_Algorithms",
    "Neural_Networks",
    "Probabilistic_Methods",
    "Reinforcement_Learning",
    "Rule_Learning",
    "Theory",
)
FACEBOOK_CLASSES = ("company", "government", "politician", "tvshow")
UNKNOWN = "unknown"

# train / val / test sizes, by index, for the 200-graph benchmark
SBM_SPLIT = (128, 32, 40)


@dataclass(frozen=True)
class SbmSpec:
    graph_count: int = 200
    communities_range: tuple[int, int] = (2, 5)
    community_size_range: tuple[int, int] = (20, 40)
    p_intra: float = 0.3
    p_inter: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.graph_count < 1:
            raise DataError("graph_count must be positive")
        for name in ("communities_range", "community_size_range"):
            lo, hi = getattr(self, name)
            if lo < 1 or hi < lo:
                raise DataError(f"{name} must be a non-empty range of positive integers")
        if not 0 <= self.p_inter <= self.p_intra <= 1:
            raise DataError("need 0 <= p_inter <= p_intra <= 1")


def sample_sbm_graph(block_sizes, p_intra, p_inter, rng) -> AttributedGraph:
    sizes = np.asarray(block_sizes, dtype=np.int64)
    n = int(sizes.sum())
    blocks = np.repeat(np.arange(len(sizes)), sizes)
    iu, ju = np.triu_indices(n, k=1)
    p = np.where(blocks[iu] == blocks[ju], p_intra, p_inter)
    hit = rng.random(len(iu)) < p
    vocab = {b: f"block{b}" for b in range(len(sizes))}
    return AttributedGraph(n, np.column_stack([iu[hit], ju[hit]]), node_labels=blocks, label_vocab=vocab)


def generate_sbm_corpus(spec: SbmSpec = SbmSpec()) -> GraphCorpus:
    """Independent SBM graphs; node labels hold the ground-truth block."""
    graphs = []
    for i in range(spec.graph_count):
        rng = make_rng(derive_seed(spec.seed, i))
        k = int(rng.integers(spec.communities_range[0], spec.communities_range[1] + 1))
        lo, hi = spec.community_size_range
        sizes = rng.integers(lo, hi + 1, size=k)
        graphs.append(sample_sbm_graph(sizes, spec.p_intra, spec.p_inter, rng))
    prov = (f"sbm count={spec.graph_count} k={spec.communities_range[0]}-{spec.communities_range[1]} "
            f"size={spec.community_size_range[0]}-{spec.community_size_range[1]} "
            f"p_in={spec.p_intra} p_out={spec.p_inter} seed={spec.seed}")
    return GraphCorpus(graphs, provenance=prov, split="train")


def split_corpus(c: GraphCorpus, sizes=SBM_SPLIT) -> dict[str, GraphCorpus]:
    """Split by index into train / val / test, scaled down if the corpus is smaller."""
    total = sum(sizes)
    if len(c) != total:
        sizes = [len(c) * s // total for s in sizes]
        sizes[0] = len(c) - sizes[1] - sizes[2]
    a, b = sizes[0], sizes[0] + sizes[1]
    return {
        "train": GraphCorpus(c.graphs[:a], c.provenance, "train"),
        "val": GraphCorpus(c.graphs[a:b], c.provenance, "val"),
        "test": GraphCorpus(c.graphs[b:], c.provenance, "test"),
    }


def er_like(g: AttributedGraph, rng) -> AttributedGraph:
    """Erdos-Renyi graph with the node count and density of ``g``."""
    return AttributedGraph(g.node_count, erdos_renyi(g.node_count, g.density(), rng))


# --------------------------------------------------------------------------
# ingestion


@dataclass
class IngestResult:
    graph: AttributedGraph  # largest connected component
    raw_nodes: int
    raw_edges: int
    tallies: dict = field(default_factory=dict)

    @property
    def lcc_nodes(self):
        return self.graph.node_count

    @property
    def lcc_edges(self):
        return self.graph.num_edges

    def summary(self) -> str:
        extra = " ".join(f"{k}={v}" for k, v in sorted(self.tallies.items()))
        return (f"raw_nodes={self.raw_nodes} raw_edges={self.raw_edges} "
                f"lcc_nodes={self.lcc_nodes} lcc_edges={self.lcc_edges} {extra}").strip()


def _finish(n, pairs, labels, vocab, tallies):
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    loops = pairs[:, 0] == pairs[:, 1]
    if loops.any():
        tallies["self_loops_dropped"] = int(loops.sum())
        pairs = pairs[~loops]
    raw = AttributedGraph.from_edges(n, pairs, node_labels=labels, label_vocab=vocab, dedupe=True)
    dup = len(pairs) - raw.num_edges
    if dup:
        tallies["duplicate_edges_merged"] = int(dup)
    lcc, _ = largest_connected_component(raw)
    for k, v in tallies.items():
        if v:
            log.warning("ingest: %s=%d", k, v)
    return IngestResult(lcc, raw.node_count, raw.num_edges, tallies)


def ingest_cora(content_path, cites_path) -> IngestResult:
    """Planetoid-style ``cora.content`` / ``cora.cites`` tab-separated files.

    Citations are symmetrised, word features discarded, and the largest
    connected component returned.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    for p in (content_path, cites_path):
        if not p.exists():
            raise DataError(f"missing input file {p}")
    class_id = {c: i for i, c in enumerate(CORA_CLASSES)}
    index, labels = {}, []
    with open(content_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            tok = line.rstrip("\n").split("\t")
            if len(tok) < 2:
                raise DataError(f"{content_path}:{lineno}: malformed row")
            pid, cls = tok[0], tok[-1].strip()
            if cls not in class_id:
                raise DataError(f"{content_path}:{lineno}: unknown class {cls!r}")
            if pid in index:
                raise DataError(f"{content_path}:{lineno}: duplicate paper id {pid}")
            index[pid] = len(labels)
            labels.append(class_id[cls])
    tallies = {"unknown_paper_ids": 0}
    pairs = []
    with open(cites_path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            tok = line.split()
            if len(tok) != 2:
                raise DataError(f"{cites_path}:{lineno}: malformed row")
            if tok[0] not in index or tok[1] not in index:
                tallies["unknown_paper_ids"] += 1
                continue
            pairs.append((index[tok[0]], index[tok[1]]))
    vocab = dict(enumerate(CORA_CLASSES))
    return _finish(len(labels), pairs, np.asarray(labels), vocab, tallies)


def ingest_cora_npz(path) -> IngestResult:
    """NetGAN/G2G-style ``cora_ml.npz`` (CSR adjacency plus ``labels``)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing input file {path}")
    import scipy.sparse as sp

    with np.load(path, allow_pickle=True) as z:
        try:
            adj = sp.csr_matrix((z["adj_data"], z["adj_indices"], z["adj_indptr"]), shape=z["adj_shape"])
            labels = np.asarray(z["labels"], dtype=np.int64)
        except KeyError as exc:
            raise DataError(f"{path}: missing array {exc}") from None
        names = z["idx_to_class"].item() if "idx_to_class" in z else None
    coo = sp.triu(adj + adj.T, k=1).tocoo()
    pairs = np.column_stack([coo.row, coo.col])
    vocab = {int(k): str(v) for k, v in names.items()} if isinstance(names, dict) else {
        int(c): f"class{int(c)}" for c in np.unique(labels)}
    return _finish(adj.shape[0], pairs, labels, vocab, {})


def ingest_facebook(edges_csv, target_csv) -> IngestResult:
    """MUSAE Facebook page-page graph (``id_1,id_2`` edges; ``page_type`` targets)."""
    edges_csv, target_csv = Path(edges_csv), Path(target_csv)
    for p in (edges_csv, target_csv):
        if not p.exists():
            raise DataError(f"missing input file {p}")
    class_id = {c: i for i, c in enumerate(FACEBOOK_CLASSES)}
    node_class = {}
    with open(target_csv, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "id" not in reader.fieldnames or "page_type" not in reader.fieldnames:
            raise DataError(f"{target_csv}: expected a header with 'id' and 'page_type'")
        for lineno, row in enumerate(reader, start=2):
            try:
                nid = int(row["id"])
            except (TypeError, ValueError):
                raise DataError(f"{target_csv}:{lineno}: bad id {row.get('id')!r}") from None
            cls = (row["page_type"] or "").strip()
            if cls not in class_id:
                raise DataError(f"{target_csv}:{lineno}: unknown page type {cls!r}")
            node_class[nid] = class_id[cls]
    raw_pairs = []
    with open(edges_csv, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["id_1", "id_2"]:
            raise DataError(f"{edges_csv}: expected header 'id_1,id_2'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                raw_pairs.append((int(row[0]), int(row[1])))
            except (ValueError, IndexError):
                raise DataError(f"{edges_csv}:{lineno}: malformed row {row!r}") from None
    ids = sorted(set(node_class) | {x for p in raw_pairs for x in p})
    index = {nid: i for i, nid in enumerate(ids)}
    unknown_id = len(FACEBOOK_CLASSES)
    labels = np.array([node_class.get(nid, unknown_id) for nid in ids], dtype=np.int64)
    tallies = {"nodes_without_target": int((labels == unknown_id).sum())}
    vocab = dict(enumerate(FACEBOOK_CLASSES))
    if tallies["nodes_without_target"]:
        vocab[unknown_id] = UNKNOWN
    pairs = [(index[a], index[b]) for a, b in raw_pairs]
    return _finish(len(ids), pairs, labels, vocab, tallies)
