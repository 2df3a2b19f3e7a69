"""End-to-end hierarchical sampling and the experiment harness.

A sample is produced in three stages: a community-level template, one
community graph per template node, and one batch of cross edges per template
edge. Stage-two and stage-three jobs are independent and run on a process
pool; every job seed is ``derive_seed(sample_master, stage, index)``, so the
assembled graph does not depend on the worker count.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
import platform
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hiergraph import __version__
from hiergraph.backends import GeneratorBackend, StatisticalBackend, make_backend
from hiergraph.backends.statistical import COUNT_MODES, ClassConditionedModel
from hiergraph.errors import ConfigError, DataError, HierGraphError
from hiergraph.graph import AttributedGraph, largest_connected_component, union_disjoint
from hiergraph.jobs import parallel_map
from hiergraph.seeding import STAGE_CROSS, STAGE_H1, STAGE_H2, STAGE_SAMPLE, derive_seed

log = logging.getLogger(__name__)

SIZE_HINT_MODES = ("hint", "model")
EXPERIMENTS = ("sbm", "cora", "facebook")
DEFAULT_RESOLUTION = {"sbm": 2.0, "cora": 2.0, "facebook": 10.0}


class GuardError(HierGraphError):
    """A community sample exceeded the configured size bound twice."""


# --------------------------------------------------------------------------
# configuration


@dataclass
class PipelineConfig:
    backend: str = "statistical"
    resolution: float | None = None  # None: per-experiment default
    repeats: int = 32
    seed: int = 0
    workers: int = 1
    max_h1_size: int = 5000
    size_hint_mode: str = "hint"
    rewire_fraction: float = 0.1
    edge_epsilon: float = 1.0
    count_mode: str = "empirical"
    samples: int = 40
    sbm_p_intra: float = 0.3
    sbm_p_inter: float = 0.005
    cora_npz: str = ""
    cora_content: str = ""
    cora_cites: str = ""
    facebook_edges: str = ""
    facebook_target: str = ""
    out_dir: str = "results"
    eval_mmd: bool = True
    eval_qq: bool = True
    eval_bter: bool = True
    eval_er: bool = True
    figures: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.resolution is not None and not self.resolution > 0:
            raise ConfigError("resolution must be > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.max_h1_size < 2:
            raise ConfigError("max_h1_size must be >= 2")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.samples < 1:
            raise ConfigError("samples must be >= 1")
        if self.size_hint_mode not in SIZE_HINT_MODES:
            raise ConfigError(f"size_hint_mode must be one of {SIZE_HINT_MODES}")
        if not 0.0 <= self.rewire_fraction <= 1.0:
            raise ConfigError("rewire_fraction must lie in [0, 1]")
        if not 0 <= self.sbm_p_inter <= self.sbm_p_intra <= 1:
            raise ConfigError("need 0 <= sbm_p_inter <= sbm_p_intra <= 1")
        if self.count_mode not in COUNT_MODES:
            raise ConfigError(f"count_mode must be one of {COUNT_MODES}")
        if self.edge_epsilon < 0:
            raise ConfigError("edge_epsilon must be >= 0")

    def resolution_for(self, experiment: str) -> float:
        return self.resolution if self.resolution is not None else DEFAULT_RESOLUTION.get(experiment, 2.0)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    # flat key=value text
    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            lines.append(f"{f.name}={'' if v is None else str(v).lower() if isinstance(v, bool) else v}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str, **overrides) -> "PipelineConfig":
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, sep, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or key not in types:
                raise ConfigError(f"config line {n}: unknown or malformed entry {raw!r}")
            values[key] = _coerce(key, types[key], val)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @classmethod
    def load(cls, path, **overrides) -> "PipelineConfig":
        try:
            text = Path(path).read_text()
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        return cls.from_text(text, **overrides)

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def _coerce(key, typ, val):
    typ = str(typ)
    try:
        if typ.startswith("bool"):
            if val.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(val)
            return val.lower() in ("true", "1", "yes")
        if typ.startswith("int"):
            return int(val)
        if typ.startswith("float"):
            return None if val == "" else float(val)
        return val
    except ValueError:
        raise ConfigError(f"config key {key}: cannot parse {val!r} as {typ}") from None


def backend_from_config(cfg: PipelineConfig, dataset=None, dataset_path=None) -> GeneratorBackend:
    if cfg.backend == "empirical":
        backend = make_backend("empirical", rewire_fraction=cfg.rewire_fraction,
                               edge_epsilon=cfg.edge_epsilon, dataset_path=dataset_path)
    else:
        backend = make_backend(cfg.backend, edge_epsilon=cfg.edge_epsilon, count_mode=cfg.count_mode)
    return backend.fit(dataset) if dataset is not None else backend


# --------------------------------------------------------------------------
# sampling


@dataclass
class H1Job:
    index: int
    seed: int
    condition: int
    size_hint: int | None
    size: int = 0
    edges: int = 0
    retried: bool = False
    seconds: float = 0.0


@dataclass
class CrossJob:
    index: int
    left: int
    right: int
    seed: int
    pair_size: int = 0
    count: int = 0
    seconds: float = 0.0


@dataclass
class SampleTrace:
    master_seed: int
    template: object = None
    h1_jobs: list[H1Job] = field(default_factory=list)
    cross_jobs: list[CrossJob] = field(default_factory=list)
    offsets: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    assembled_nodes: int = 0
    assembled_edges: int = 0
    lcc_nodes: np.ndarray | None = None  # assembled-graph ids kept, None if already connected
    provenance_ok: bool = False
    stage_seconds: dict[str, float] = field(default_factory=dict)
    tallies: dict[str, int] = field(default_factory=dict)

    @property
    def max_h1_size(self) -> int:
        return max((j.size for j in self.h1_jobs), default=0)

    @property
    def peak_pair_size(self) -> int:
        return max((j.pair_size for j in self.cross_jobs), default=0)

    def seeds(self) -> list[int]:
        return [j.seed for j in self.h1_jobs] + [j.seed for j in self.cross_jobs]


def _h1_job(args):
    backend, job, max_size = args
    t0 = time.perf_counter()
    g = backend.sample_h1(job.condition, job.size_hint, job.seed)
    if g.node_count > max_size:
        job.retried = True
        g = backend.sample_h1(job.condition, max_size, derive_seed(job.seed, 1))
        if g.node_count > max_size:
            raise GuardError(f"community job {job.index} produced {g.node_count} nodes "
                             f"> max_h1_size={max_size} after clamping the size hint")
    job.size, job.edges = g.node_count, g.num_edges
    job.seconds = time.perf_counter() - t0
    return g, job


def _cross_job(args):
    backend, job, left, right = args
    t0 = time.perf_counter()
    pairs = backend.checked_cross_edges(left, right, None, job.seed)
    job.pair_size = left.node_count + right.node_count
    job.count = len(pairs)
    job.seconds = time.perf_counter() - t0
    return pairs, job


def _chunk(n, workers):
    return max(1, math.ceil(n / (4 * workers))) if workers > 1 else 1


def sample_graph(cfg: PipelineConfig, backend: GeneratorBackend,
                 index: int = 0) -> tuple[AttributedGraph, SampleTrace]:
    """Draw sample ``index`` of a run; returns its largest component and the trace."""
    master = derive_seed(cfg.seed, STAGE_SAMPLE, index)
    trace = SampleTrace(master)

    t0 = time.perf_counter()
    template = backend.sample_h2(derive_seed(master, STAGE_H2, 0))
    trace.template = template
    trace.stage_seconds["template"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    labels = template.node_labels
    jobs = []
    for i in range(template.node_count):
        hint = int(template.size_hints[i]) if cfg.size_hint_mode == "hint" else None
        if hint is not None and hint > cfg.max_h1_size:
            hint = cfg.max_h1_size
            trace.tallies["hints_clamped"] = trace.tallies.get("hints_clamped", 0) + 1
        jobs.append(H1Job(i, derive_seed(master, STAGE_H1, i), int(labels[i]), hint))
    out = parallel_map(_h1_job, [(backend, j, cfg.max_h1_size) for j in jobs], cfg.workers,
                       _chunk(len(jobs), cfg.workers))
    parts = [g for g, _ in out]
    trace.h1_jobs = [j for _, j in out]
    retries = sum(j.retried for j in trace.h1_jobs)
    if retries:
        trace.tallies["guard_retries"] = retries
    trace.stage_seconds["communities"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    t_edges = template.graph.edges.tolist()
    cjobs = [CrossJob(e, a, b, derive_seed(master, STAGE_CROSS, e)) for e, (a, b) in enumerate(t_edges)]
    out = parallel_map(_cross_job, [(backend, j, parts[j.left], parts[j.right]) for j in cjobs],
                       cfg.workers, _chunk(len(cjobs), cfg.workers))
    trace.cross_jobs = [j for _, j in out]
    cross = []
    for (pairs, j) in out:
        cross.extend((j.left, u, j.right, v) for u, v in pairs.tolist())
    trace.stage_seconds["cross"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    asm = union_disjoint(parts, cross)
    g = asm.graph
    trace.offsets = asm.offsets
    trace.assembled_nodes, trace.assembled_edges = g.node_count, g.num_edges
    if asm.duplicates:
        trace.tallies["duplicate_cross_edges"] = asm.duplicates
    trace.provenance_ok = check_provenance(g, trace)
    if g.node_count and not g.is_connected():
        lcc, kept = largest_connected_component(g)
        trace.tallies["nodes_outside_lcc"] = g.node_count - lcc.node_count
        warnings.warn(f"sample {index}: assembled graph disconnected; keeping largest component "
                      f"({lcc.node_count} of {g.node_count} nodes)", RuntimeWarning, stacklevel=2)
        g, trace.lcc_nodes = lcc, kept
    trace.stage_seconds["assembly"] = time.perf_counter() - t0
    return g, trace


def check_provenance(assembled: AttributedGraph, trace: SampleTrace) -> bool:
    """Every edge is inside one community, or between the two ends of a template edge
    with exactly the number of edges its cross job reported."""
    sizes = np.array([j.size for j in trace.h1_jobs], dtype=np.int64)
    if assembled.node_count != sizes.sum():
        return False
    block = np.repeat(np.arange(len(sizes)), sizes)
    bu, bv = block[assembled.edges[:, 0]], block[assembled.edges[:, 1]]
    inside = bu == bv
    if int(inside.sum()) != sum(j.edges for j in trace.h1_jobs):
        return False
    per_block = np.bincount(bu[inside], minlength=len(sizes))
    if any(per_block[j.index] != j.edges for j in trace.h1_jobs):
        return False
    lo, hi = np.minimum(bu, bv)[~inside], np.maximum(bu, bv)[~inside]
    found: dict[tuple[int, int], int] = {}
    for a, b in zip(lo.tolist(), hi.tolist()):
        found[(a, b)] = found.get((a, b), 0) + 1
    expected = {(min(j.left, j.right), max(j.left, j.right)): j.count for j in trace.cross_jobs if j.count}
    return found == expected


def sample_many(cfg: PipelineConfig, backend: GeneratorBackend, count: int):
    return [sample_graph(cfg, backend, i) for i in range(count)]


# --------------------------------------------------------------------------
# scaling probe


@dataclass
class ScalingReport:
    n_max: int
    template_nodes: int
    template_edges: int
    nodes: int
    edges: int
    max_h1_size: int
    peak_pair_size: int
    stage_seconds: dict[str, float]
    guard_retries: int

    @property
    def pair_bound_ok(self) -> bool:
        return self.peak_pair_size <= 2 * self.max_h1_size

    def as_row(self) -> dict:
        row = {k: v for k, v in dataclasses.asdict(self).items() if k != "stage_seconds"}
        row["pair_bound_ok"] = self.pair_bound_ok
        row.update({f"seconds_{k}": round(v, 4) for k, v in self.stage_seconds.items()})
        return row


def synthetic_model(n_max: int) -> ClassConditionedModel:
    """One class; template of ``n_max`` nodes; communities of ceil(n_max/2)..n_max nodes."""
    if n_max < 1:
        raise ConfigError("n_max must be >= 1")
    lo = math.ceil(n_max / 2)
    sizes = np.arange(lo, n_max + 1, dtype=np.int64)
    weights = np.arange(6, 13, dtype=np.int64)
    link = min(1.0, 2.0 * math.log(n_max) / n_max) if n_max > 1 else 0.0
    return ClassConditionedModel(
        sizes={0: sizes},
        label_mixture={0: np.array([1.0])},
        degree_weights={0: weights},
        cross_density={(0, 0): np.array([0.001, 0.002, 0.003])},
        global_density=np.array([0.001, 0.002, 0.003]),
        h2_node_counts=np.array([n_max], dtype=np.int64),
        class_freq={0: 1.0},
        pair_prob={(0, 0): link},
        label_vocab={0: "all"},
    )


def scaling_probe(n_max: int, cfg: PipelineConfig | None = None) -> ScalingReport:
    """Sample from a synthetic model whose communities are capped at ``n_max`` nodes."""
    cfg = (cfg or PipelineConfig()).replace(max_h1_size=max(2, n_max))
    backend = StatisticalBackend(synthetic_model(n_max), edge_epsilon=cfg.edge_epsilon,
                                 count_mode=cfg.count_mode)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        g, tr = sample_graph(cfg, backend)
    return ScalingReport(
        n_max=n_max,
        template_nodes=tr.template.node_count,
        template_edges=tr.template.graph.num_edges,
        nodes=g.node_count,
        edges=g.num_edges,
        max_h1_size=tr.max_h1_size,
        peak_pair_size=tr.peak_pair_size,
        stage_seconds=tr.stage_seconds,
        guard_retries=tr.tallies.get("guard_retries", 0),
    )


# --------------------------------------------------------------------------
# experiments


def manifest_lines(cfg: PipelineConfig, extra: dict | None = None) -> list[str]:
    import matplotlib
    import scipy

    info = {
        "hiergraph_version": __version__,
        "config_sha256_16": cfg.digest(),
        "seed": cfg.seed,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "matplotlib": matplotlib.__version__,
    }
    info.update(extra or {})
    return [f"{k}={v}" for k, v in info.items()]


def _require_paths(name: str, cfg: PipelineConfig):
    if name == "cora":
        if cfg.cora_npz:
            need = [cfg.cora_npz]
        elif cfg.cora_content or cfg.cora_cites:
            need = [cfg.cora_content, cfg.cora_cites]
        else:
            raise ConfigError("cora experiment needs cora_npz or cora_content + cora_cites")
    elif name == "facebook":
        need = [cfg.facebook_edges, cfg.facebook_target]
    else:
        return
    missing = [p for p in need if not p or not Path(p).is_file()]
    if missing:
        raise ConfigError(f"{name} experiment: dataset file(s) not found: {missing}")


def load_real(name: str, cfg: PipelineConfig):
    from hiergraph import datasets

    _require_paths(name, cfg)
    if name == "cora":
        if cfg.cora_npz:
            return datasets.ingest_cora_npz(cfg.cora_npz)
        return datasets.ingest_cora(cfg.cora_content, cfg.cora_cites)
    return datasets.ingest_facebook(cfg.facebook_edges, cfg.facebook_target)


@dataclass
class ExperimentReport:
    name: str
    out_dir: Path
    stats: dict[str, dict]  # model -> GraphStats columns averaged over the set
    mmd: dict[str, object]  # model -> MmdReport
    files: list[Path]
    traces: list[SampleTrace]
    extra: dict = field(default_factory=dict)


def _bter_job(args):
    from hiergraph.bter import fit_bter, sample_bter

    g, seed = args
    s = sample_bter(fit_bter(g, seed))
    lcc, _ = largest_connected_component(s.graph)
    return lcc, s.dropped


def run_experiment(name: str, cfg: PipelineConfig) -> ExperimentReport:
    """Build, fit, sample and evaluate one of the three benchmark settings."""
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
    _require_paths(name, cfg)
    out = Path(cfg.out_dir) / name
    out.mkdir(parents=True, exist_ok=True)
    if name == "sbm":
        return _run_sbm(cfg, out)
    return _run_large(name, cfg, out)


def _run_sbm(cfg: PipelineConfig, out: Path) -> ExperimentReport:
    from hiergraph import datasets
    from hiergraph.hierarchy import build_from_corpus

    t0 = time.perf_counter()
    corpus = datasets.generate_sbm_corpus(datasets.SbmSpec(
        p_intra=cfg.sbm_p_intra, p_inter=cfg.sbm_p_inter, seed=cfg.seed))
    split = datasets.split_corpus(corpus)
    ds = build_from_corpus(split["train"], cfg.resolution_for("sbm"), seed=cfg.seed,
                           workers=cfg.workers, uniform_label=True)
    backend = backend_from_config(cfg, ds)
    test = [largest_connected_component(g)[0] for g in split["test"]]
    samples = sample_many(cfg, backend, cfg.samples)
    sets = {"real": test, "hiergraph": [g for g, _ in samples]}
    extra = {"build_seconds": 0.0}
    if cfg.eval_bter:
        res = parallel_map(_bter_job, [(g, derive_seed(cfg.seed, 7, i)) for i, g in enumerate(test)],
                           cfg.workers)
        sets["bter"] = [g for g, _ in res]
        extra["bter_dropped_edges"] = sum(d for _, d in res)
    if cfg.eval_er:
        er = []
        for i, g in enumerate(test):
            rng = np.random.Generator(np.random.PCG64(derive_seed(cfg.seed, 8, i)))
            er.append(largest_connected_component(datasets.er_like(g, rng))[0])
        sets["er"] = er
    extra["build_seconds"] = round(time.perf_counter() - t0, 3)

    return evaluate_sets("sbm", sets, cfg, out, community=False,
                         traces=[t for _, t in samples], extra=extra)


def _run_large(name: str, cfg: PipelineConfig, out: Path) -> ExperimentReport:
    from hiergraph.hierarchy import build_from_large_graph

    real = load_real(name, cfg).graph
    ds = build_from_large_graph(real, cfg.resolution_for(name), cfg.repeats, cfg.seed, cfg.workers)
    backend = backend_from_config(cfg, ds)
    g, trace = sample_graph(cfg, backend)
    sets = {"real": [real], "hiergraph": [g]}
    extra = {"real_nodes": real.node_count, "sample_nodes": g.node_count}
    if cfg.eval_bter:
        b, dropped = _bter_job((real, derive_seed(cfg.seed, 7, 0)))
        sets["bter"] = [b]
        extra["bter_dropped_edges"] = dropped
    return evaluate_sets(name, sets, cfg, out, community=True, traces=[trace], extra=extra)


def evaluate_sets(name: str, sets: dict[str, list[AttributedGraph]], cfg: PipelineConfig, out,
                  community: bool = False, traces=(), extra=None) -> ExperimentReport:
    """Statistics, MMD and QQ output for ``sets['real']`` against every other set.

    With ``community`` each set must hold one large graph, compared through
    its Louvain communities; otherwise the sets are compared graph by graph.
    """
    from hiergraph import metrics

    if "real" not in sets or len(sets) < 2:
        raise ConfigError("evaluation needs a 'real' set and at least one generated set")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    stats = {k: metrics.mean_stats([metrics.graph_stats(g, seed=cfg.seed) for g in v])
             for k, v in sets.items()}
    mmd = {}
    if cfg.eval_mmd:
        real = sets["real"]
        for k, v in sets.items():
            if k == "real":
                continue
            if community:
                if len(real) != 1 or len(v) != 1:
                    raise ConfigError("community evaluation compares exactly one graph per side")
                mmd[k] = metrics.community_eval(real[0], v[0], seed=cfg.seed, workers=cfg.workers)
            else:
                mmd[k] = metrics.compare_sets(real, v, seed=cfg.seed, workers=cfg.workers)
    report = ExperimentReport(name, out, stats, mmd, [], list(traces), dict(extra or {}))
    _write_outputs(report, cfg, sets)
    return report


def _write_outputs(report: ExperimentReport, cfg: PipelineConfig, sets: dict) -> None:
    from hiergraph import metrics, reporting

    out = report.out_dir
    report.files.append(reporting.write_stats_tsv(out / "stats.tsv", report.stats))
    if report.mmd:
        report.files.append(reporting.write_mmd_tsv(out / "mmd.tsv", report.mmd))
    if cfg.eval_qq:
        pooled = {}
        for k, graphs in sets.items():
            vals = [metrics.node_values(g, cfg.seed) for g in graphs]
            pooled[k] = {s: np.concatenate([v[s] for v in vals]) for s in vals[0]}
        real = pooled.pop("real")
        cols = metrics.qq_table(real, pooled)
        path = out / "qq.csv"
        metrics.write_qq_csv(path, cols)
        report.files.append(path)
        if cfg.figures:
            from hiergraph.plotting import plot_qq

            report.files.extend(plot_qq(cols, out, report.name))
    manifest = out / "manifest.txt"
    extra = {"experiment": report.name, **report.extra,
             "sample_seeds": ",".join(str(t.master_seed) for t in report.traces)}
    manifest.write_text("\n".join(manifest_lines(cfg, extra)) + "\n")
    cfg.save(out / "config.txt")
    report.files += [manifest, out / "config.txt"]
