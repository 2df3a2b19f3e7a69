"""Graph statistics, per-graph histograms and MMD between graph sets.

MMD uses a Gaussian kernel on the total-variation distance between
normalised histograms, k(x, y) = exp(-TV(x, y)^2 / (2 sigma^2)), and reports
the biased (V-statistic) estimate of MMD^2.
"""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg
from scipy.sparse.csgraph import shortest_path

from hiergraph.errors import DataError
from hiergraph.graph import AttributedGraph, induced_subgraph, largest_connected_component
from hiergraph.seeding import STAGE_EVAL, derive_seed, make_rng

KERNEL = "gaussian-tv"
METRICS_VERSION = 1
EXACT_DIAMETER_THRESHOLD = 5000
DIAMETER_SWEEPS = 20
ECC_SAMPLE_SOURCES = 500
SPECTRAL_MAX_NODES = 500
CLUSTERING_BINS = 100
SPECTRAL_BINS = 200
MIN_COMMUNITY_SIZE = 5
STATISTICS = ("nodes", "degree", "clustering", "eccentricity", "spectral")


def _require_connected(g: AttributedGraph):
    if g.node_count == 0:
        raise DataError("statistic undefined for an empty graph")
    if not g.is_connected():
        raise DataError("graph is disconnected; extract the largest connected component first")


# --------------------------------------------------------------------------
# node-level quantities


def triangles(g: AttributedGraph, chunk: int = 2048) -> np.ndarray:
    """Triangles through each node."""
    a = g.csr
    out = np.zeros(g.node_count)
    for s in range(0, g.node_count, chunk):
        rows = a[s:s + chunk]
        out[s:s + chunk] = np.asarray((rows @ a).multiply(rows).sum(axis=1)).ravel() / 2.0
    return out


def local_clustering(g: AttributedGraph) -> np.ndarray:
    """Per-node clustering; nodes of degree < 2 get 0."""
    d = g.degrees.astype(float)
    pairs = d * (d - 1) / 2.0
    tri = triangles(g)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(pairs > 0, tri / np.where(pairs > 0, pairs, 1.0), 0.0)


def transitivity(g: AttributedGraph) -> float:
    """3 x triangles / connected triples."""
    d = g.degrees.astype(float)
    triads = float(np.sum(d * (d - 1) / 2.0))
    return float(triangles(g).sum() / triads) if triads else 0.0


def _bfs_rows(g, sources):
    return shortest_path(g.csr, method="D", unweighted=True, directed=False, indices=sources)


def eccentricities(g: AttributedGraph, threshold: int = EXACT_DIAMETER_THRESHOLD,
                   seed: int = 0, chunk: int = 256) -> tuple[np.ndarray, bool]:
    """BFS eccentricities: every node when small, else 500 seeded sources.

    Returns (values, exact).
    """
    _require_connected(g)
    n = g.node_count
    if n <= threshold or n <= ECC_SAMPLE_SOURCES:
        sources, exact = np.arange(n), True
    else:
        rng = make_rng(derive_seed(seed, STAGE_EVAL, 1))
        sources, exact = np.sort(rng.choice(n, size=ECC_SAMPLE_SOURCES, replace=False)), False
    out = np.empty(len(sources), dtype=np.int64)
    for s in range(0, len(sources), chunk):
        dist = _bfs_rows(g, sources[s:s + chunk])
        out[s:s + chunk] = dist.max(axis=1 if dist.ndim == 2 else 0)
    return out, exact


def double_sweep_diameter(g: AttributedGraph, sweeps: int = DIAMETER_SWEEPS, seed: int = 0) -> int:
    """Lower bound on the diameter from iterated farthest-node BFS sweeps."""
    _require_connected(g)
    if g.node_count == 1:
        return 0
    rng = make_rng(derive_seed(seed, STAGE_EVAL, 2))
    u = int(rng.integers(g.node_count))
    best = 0
    for _ in range(sweeps):
        dist = _bfs_rows(g, [u])[0]
        v = int(np.argmax(dist))
        best = max(best, int(dist[v]))
        if v == u:
            break
        u = v
    return best


def diameter(g: AttributedGraph, threshold: int = EXACT_DIAMETER_THRESHOLD, seed: int = 0) -> tuple[int, bool]:
    if g.node_count <= threshold:
        ecc, _ = eccentricities(g, threshold)
        return int(ecc.max()), True
    return double_sweep_diameter(g, seed=seed), False


def normalized_laplacian_eigenvalues(g: AttributedGraph) -> np.ndarray:
    a = g.csr.toarray()
    d = a.sum(axis=1)
    inv = np.where(d > 0, 1.0 / np.sqrt(np.where(d > 0, d, 1.0)), 0.0)
    lap = np.diag((d > 0).astype(float)) - inv[:, None] * a * inv[None, :]
    return scipy.linalg.eigvalsh(lap)


# --------------------------------------------------------------------------
# aggregate statistics


@dataclass
class GraphStats:
    nodes: int
    edges: int
    diameter: int
    diameter_exact: bool
    clustering: float
    density: float
    transitivity: float
    n_c: int
    c_med: int

    def as_row(self) -> dict:
        return asdict(self)


def graph_stats(g: AttributedGraph, exact_diameter_threshold: int = EXACT_DIAMETER_THRESHOLD,
                seed: int = 0, communities: bool = True) -> GraphStats:
    """All aggregate columns for one connected graph.

    Community columns come from Louvain at resolution 1 with ``seed``.
    """
    from hiergraph.partition import louvain, partition_stats

    _require_connected(g)
    diam, exact = diameter(g, exact_diameter_threshold, seed)
    n_c = c_med = 0
    if communities and g.num_edges:
        n_c, c_med = partition_stats(louvain(g, 1.0, seed))
    return GraphStats(
        nodes=g.node_count,
        edges=g.num_edges,
        diameter=diam,
        diameter_exact=exact,
        clustering=float(local_clustering(g).mean()),
        density=g.density(),
        transitivity=transitivity(g),
        n_c=n_c,
        c_med=c_med,
    )


def mean_stats(stats: list[GraphStats]) -> dict:
    keys = ("nodes", "edges", "diameter", "clustering", "density", "transitivity", "n_c", "c_med")
    row = {k: float(np.mean([getattr(s, k) for s in stats])) for k in keys}
    row["diameter_exact"] = all(s.diameter_exact for s in stats)
    return row


# --------------------------------------------------------------------------
# histograms


@dataclass(frozen=True, eq=False)
class Histogram:
    values: np.ndarray
    binning: str  # "int" (one bin per integer, padded on compare) or "uniform:<bins>:<lo>:<hi>"
    approximate: bool = False


def _int_hist(values) -> Histogram:
    v = np.asarray(values, dtype=np.int64)
    h = np.bincount(v).astype(float)
    return Histogram(h / h.sum(), "int")


def _uniform_hist(values, bins, lo, hi, approximate=False) -> Histogram:
    h, _ = np.histogram(np.clip(values, lo, hi), bins=bins, range=(lo, hi))
    h = h.astype(float)
    return Histogram(h / h.sum(), f"uniform:{bins}:{lo}:{hi}", approximate)


def degree_hist(g: AttributedGraph) -> Histogram:
    _require_connected(g)
    return _int_hist(g.degrees)


def clustering_hist(g: AttributedGraph, bins: int = CLUSTERING_BINS) -> Histogram:
    _require_connected(g)
    return _uniform_hist(local_clustering(g), bins, 0.0, 1.0)


def eccentricity_hist(g: AttributedGraph, threshold: int = EXACT_DIAMETER_THRESHOLD, seed: int = 0) -> Histogram:
    ecc, exact = eccentricities(g, threshold, seed)
    h = _int_hist(ecc)
    return Histogram(h.values, h.binning, not exact)


def spectral_hist(g: AttributedGraph, bins: int = SPECTRAL_BINS, max_nodes: int = SPECTRAL_MAX_NODES,
                  seed: int = 0) -> Histogram:
    """Normalised-Laplacian spectrum; large graphs use a seeded 500-node induced subgraph's LCC."""
    _require_connected(g)
    approximate = g.node_count > max_nodes
    if approximate:
        rng = make_rng(derive_seed(seed, STAGE_EVAL, 3))
        sub, _ = induced_subgraph(g, rng.choice(g.node_count, size=max_nodes, replace=False))
        g, _ = largest_connected_component(sub)
    return _uniform_hist(normalized_laplacian_eigenvalues(g), bins, 0.0, 2.0, approximate)


def node_count_hist(g: AttributedGraph) -> Histogram:
    return _int_hist([g.node_count])


HISTOGRAMS = {
    "nodes": lambda g, seed: node_count_hist(g),
    "degree": lambda g, seed: degree_hist(g),
    "clustering": lambda g, seed: clustering_hist(g),
    "eccentricity": lambda g, seed: eccentricity_hist(g, seed=seed),
    "spectral": lambda g, seed: spectral_hist(g, seed=seed),
}


# --------------------------------------------------------------------------
# MMD


def _as_hist(h) -> Histogram:
    if isinstance(h, Histogram):
        return h
    v = np.asarray(h, dtype=float)
    return Histogram(v / v.sum() if v.sum() else v, "int")


def _stack(hists, width):
    out = np.zeros((len(hists), width))
    for i, h in enumerate(hists):
        v = h.values
        s = v.sum()
        out[i, :len(v)] = v / s if s else v
    return out


def _tv_matrix(x, y, chunk=64):
    out = np.empty((len(x), len(y)))
    for s in range(0, len(x), chunk):
        out[s:s + chunk] = 0.5 * np.abs(x[s:s + chunk, None, :] - y[None, :, :]).sum(axis=2)
    return out


def mmd(a, b, sigma: float = 1.0) -> float:
    """Biased MMD^2 between two lists of histograms."""
    a = [_as_hist(h) for h in a]
    b = [_as_hist(h) for h in b]
    if not a or not b:
        raise DataError("MMD needs two non-empty sets")
    binnings = {h.binning for h in a + b}
    if len(binnings) != 1:
        raise DataError(f"histogram binnings differ: {sorted(binnings)}")
    lengths = {len(h.values) for h in a + b}
    if binnings != {"int"} and len(lengths) != 1:
        raise DataError("fixed-bin histograms have different lengths")
    width = max(lengths)
    x, y = _stack(a, width), _stack(b, width)

    def k(p, q):
        return np.exp(-_tv_matrix(p, q) ** 2 / (2.0 * sigma ** 2)).mean()

    return float(max(0.0, k(x, x) + k(y, y) - 2.0 * k(x, y)))


@dataclass
class MmdReport:
    values: dict[str, float]
    kernel: str = KERNEL
    sigma: float = 1.0
    sizes: tuple[int, int] = (0, 0)
    approximate: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def header(self) -> str:
        return (f"# metrics_version={METRICS_VERSION} kernel={self.kernel} sigma={self.sigma} "
                f"clustering_bins={CLUSTERING_BINS} spectral_bins={SPECTRAL_BINS} "
                f"spectral_max_nodes={SPECTRAL_MAX_NODES} ecc_sources={ECC_SAMPLE_SOURCES}")


def _histograms(graphs, stats, seed, workers=1):
    from hiergraph.jobs import parallel_map

    jobs = [(g, stats, derive_seed(seed, i)) for i, g in enumerate(graphs)]
    return parallel_map(_hist_job, jobs, workers, chunksize=16)


def _hist_job(job):
    g, stats, seed = job
    return {s: HISTOGRAMS[s](g, seed) for s in stats}


def compare_sets(real: list[AttributedGraph], generated: list[AttributedGraph], stats=STATISTICS,
                 sigma: float = 1.0, seed: int = 0, workers: int = 1) -> MmdReport:
    """MMD for each statistic between two sets of connected graphs."""
    hr = _histograms(real, stats, seed, workers)
    hg = _histograms(generated, stats, seed, workers)
    values, approx = {}, {}
    for s in stats:
        a = [h[s] for h in hr]
        b = [h[s] for h in hg]
        values[s] = mmd(a, b, sigma)
        approx[s] = any(h.approximate for h in a + b)
    report = MmdReport(values, sigma=sigma, sizes=(len(real), len(generated)), approximate=approx)
    lo, hi = sorted(report.sizes)
    if lo and hi > 2 * lo:
        report.notes.append(f"set sizes differ by more than 2x ({report.sizes[0]} vs {report.sizes[1]})")
    return report


def communities_of(g: AttributedGraph, seed: int = 0, min_size: int = MIN_COMMUNITY_SIZE) -> list[AttributedGraph]:
    """Louvain (resolution 1) communities as connected graphs of at least ``min_size`` nodes."""
    from hiergraph.partition import louvain

    p = louvain(g, 1.0, seed)
    out = []
    for nodes in p.members():
        sub, _ = induced_subgraph(g, nodes)
        sub, _ = largest_connected_component(sub)
        if sub.node_count >= min_size:
            out.append(sub)
    return out


def community_eval(real: AttributedGraph, generated: AttributedGraph, seed: int = 0,
                   sigma: float = 1.0, min_size: int = MIN_COMMUNITY_SIZE, workers: int = 1) -> MmdReport:
    """MMD between the Louvain communities of two large graphs."""
    _require_connected(real)
    _require_connected(generated)
    rc = communities_of(real, seed, min_size)
    gc = communities_of(generated, seed, min_size)
    if len(rc) < 2 or len(gc) < 2:
        raise DataError(f"need >= 2 communities of >= {min_size} nodes on each side "
                        f"(got {len(rc)} and {len(gc)})")
    return compare_sets(rc, gc, STATISTICS, sigma, seed, workers)


# --------------------------------------------------------------------------
# QQ data


def qq_quantiles(real_values, sampled_values, q: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """``q`` evenly spaced quantiles (linear interpolation) of each series."""
    real_values = np.asarray(real_values, dtype=float)
    sampled_values = np.asarray(sampled_values, dtype=float)
    if real_values.size == 0 or sampled_values.size == 0:
        raise DataError("QQ needs non-empty value lists")
    probs = np.linspace(0.0, 1.0, q)
    return np.quantile(real_values, probs), np.quantile(sampled_values, probs)


def node_values(g: AttributedGraph, seed: int = 0) -> dict[str, np.ndarray]:
    """Per-node degree, clustering and eccentricity (sampled on large graphs)."""
    return {
        "Degree": g.degrees.astype(float),
        "Clustering": local_clustering(g),
        "Eccentricity": eccentricities(g, seed=seed)[0].astype(float),
    }


def qq_table(real: dict[str, np.ndarray], sampled: dict[str, dict[str, np.ndarray]], q: int = 100) -> dict:
    """Columns ``<Stat>_quantiles_real`` and ``<Stat>_quantiles_<model>``."""
    cols = {}
    for stat, rv in real.items():
        for model, by_stat in sampled.items():
            rq, sq = qq_quantiles(rv, by_stat[stat], q)
            cols[f"{stat}_quantiles_real"] = rq
            cols[f"{stat}_quantiles_{model}"] = sq
    return cols


def write_qq_csv(path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        for row in zip(*(columns[n] for n in names)):
            w.writerow([repr(float(x)) for x in row])
