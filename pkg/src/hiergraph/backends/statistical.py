"""Class-conditioned statistical backend.

Community graphs are Chung-Lu graphs whose weights are resampled from the
degrees seen in training communities of the requested class. Templates draw
their node count, node classes and community sizes from fitted frequencies;
two template nodes are linked at the rate fitted for their class pair and the
log2 bucket of their size product.
Cross edges draw a density from the training pairs of the same class pair
whose size product ``|left| * |right|`` is closest to the requested one, turn
it into an edge count, then choose endpoints with probability proportional to
``degree + epsilon`` on each side. Conditioning on pair size matters because
small communities split off a larger one are much more densely joined to it
than two unrelated communities are to each other.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from hiergraph.backends.base import GeneratorBackend
from hiergraph.errors import DataError
from hiergraph.graph import AttributedGraph, largest_connected_component
from hiergraph.random_graphs import chung_lu
from hiergraph.seeding import make_rng

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
H2_RETRIES = 100
COUNT_MODES = ("normal", "empirical")
CROSS_NEIGHBOURS = 25


def adjust_majority(labels: np.ndarray, condition: int) -> np.ndarray:
    """Recolour as few nodes as needed so ``condition`` is the majority label.

    Ties count against ``condition`` only when a smaller label id is tied
    with it, matching the smallest-id tie-break of majority_label.
    """
    labels = labels.copy()
    if len(labels) == 0:
        return labels
    size = max(int(labels.max()), condition) + 1
    counts = np.bincount(labels, minlength=size)
    while int(np.argmax(counts)) != condition:
        top = int(np.argmax(counts))
        idx = int(np.flatnonzero(labels == top)[0])
        labels[idx] = condition
        counts[top] -= 1
        counts[condition] += 1
    return labels


def _pair_key(a: int, b: int) -> tuple[int, int]:
    return (a, b) if a <= b else (b, a)


def _class_of(g: AttributedGraph) -> int:
    if g.graph_label is not None:
        return int(g.graph_label)
    if g.node_labels is None or g.node_count == 0:
        return 0
    return int(np.argmax(np.bincount(g.node_labels)))


@dataclass
class ClassConditionedModel:
    sizes: dict[int, np.ndarray] = field(default_factory=dict)
    label_mixture: dict[int, np.ndarray] = field(default_factory=dict)
    degree_weights: dict[int, np.ndarray] = field(default_factory=dict)
    cross_density: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    # |left| * |right| of each training pair, aligned with cross_density; may be empty
    cross_products: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    global_density: np.ndarray = field(default_factory=lambda: np.zeros(0))
    global_products: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    h2_node_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    class_freq: dict[int, float] = field(default_factory=dict)
    pair_prob: dict[tuple[int, int], float] = field(default_factory=dict)
    # link rate by (class a, class b, size bin); pair_prob is the fallback
    pair_prob_size: dict[tuple[int, int, int], float] = field(default_factory=dict)
    label_vocab: dict[int, str] = field(default_factory=dict)

    @property
    def classes(self) -> list[int]:
        return sorted(self.sizes)

    def density_stats(self, a: int, b: int) -> tuple[float, float]:
        d = self.cross_density.get(_pair_key(a, b))
        if d is None or len(d) == 0:
            d = self.global_density
        return float(np.mean(d)), float(np.std(d))

    def density_pool(self, a: int, b: int, product: int, k: int = CROSS_NEIGHBOURS) -> np.ndarray:
        """Densities of the ``k`` training pairs nearest in log size product.

        Unseen class pairs fall back to all pairs.
        """
        key = _pair_key(a, b)
        d = self.cross_density.get(key)
        prods = self.cross_products.get(key)
        if d is None or len(d) == 0:
            d, prods = self.global_density, self.global_products
        if prods is None or len(prods) != len(d) or len(d) <= k:
            return d
        gap = np.abs(np.log(prods) - np.log(max(product, 1)))
        return d[np.argsort(gap, kind="stable")[:k]]


def fit_statistical(dataset) -> ClassConditionedModel:
    """Empirical estimates of every distribution the sampler draws from."""
    by_class = dataset.h1_by_condition()
    model = ClassConditionedModel(label_vocab=dict(dataset.label_vocab))
    n_labels = 1 + max((int(g.node_labels.max()) for g, _ in dataset.h1_samples
                        if g.node_labels is not None and g.node_count), default=0)
    for c, graphs in sorted(by_class.items()):
        model.sizes[c] = np.array([g.node_count for g in graphs], dtype=np.int64)
        counts = np.zeros(n_labels)
        for g in graphs:
            counts += np.bincount(g.node_labels, minlength=n_labels)
        model.label_mixture[c] = counts / counts.sum()
        model.degree_weights[c] = np.concatenate([g.degrees for g in graphs])

    dens: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for p in dataset.pair_samples:
        key = _pair_key(_class_of(p.left), _class_of(p.right))
        prod = p.left.node_count * p.right.node_count
        dens.setdefault(key, []).append((prod, len(p.cross_edges) / prod))
    for k, v in sorted(dens.items()):
        v.sort()
        model.cross_products[k] = np.array([x for x, _ in v], dtype=np.int64)
        model.cross_density[k] = np.array([y for _, y in v])
    _set_global(model)

    node_counts, class_counts = [], {}
    links: dict[tuple[int, int], int] = {}
    possible: dict[tuple[int, int], int] = {}
    for t in dataset.h2_samples:
        labels = t.node_labels
        node_counts.append(t.node_count)
        per = np.bincount(labels) if len(labels) else np.zeros(0, dtype=np.int64)
        present = np.flatnonzero(per)
        for c in present:
            if int(c) not in by_class:
                raise DataError(f"class {int(c)} appears in templates but has no community samples")
            class_counts[int(c)] = class_counts.get(int(c), 0) + int(per[c])
        for i, a in enumerate(present):
            for b in present[i:]:
                key = (int(a), int(b))
                possible[key] = possible.get(key, 0) + (
                    int(per[a]) * (int(per[a]) - 1) // 2 if a == b else int(per[a]) * int(per[b]))
        for u, v in t.graph.edges.tolist():
            key = _pair_key(int(labels[u]), int(labels[v]))
            links[key] = links.get(key, 0) + 1
    model.h2_node_counts = np.array(node_counts, dtype=np.int64)
    total = sum(class_counts.values())
    model.class_freq = {c: class_counts[c] / total for c in sorted(class_counts)}
    model.pair_prob = {k: links.get(k, 0) / v for k, v in sorted(possible.items()) if v > 0}
    model.pair_prob_size = _fit_size_links(dataset.h2_samples)
    return model


def size_bin(product) -> np.ndarray:
    """floor(log2(|left| * |right|)), the size bucket of a community pair."""
    return np.floor(np.log2(np.maximum(np.asarray(product, dtype=float), 1.0))).astype(np.int64)


def _fit_size_links(templates) -> dict[tuple[int, int, int], float]:
    links: dict[tuple[int, int, int], int] = {}
    possible: dict[tuple[int, int, int], int] = {}
    for t in templates:
        n = t.node_count
        if n < 2:
            continue
        labels, sizes = t.node_labels, t.size_hints
        iu, ju = np.triu_indices(n, k=1)
        keys = np.column_stack([np.minimum(labels[iu], labels[ju]), np.maximum(labels[iu], labels[ju]),
                                size_bin(sizes[iu] * sizes[ju])])
        for k, c in zip(*np.unique(keys, axis=0, return_counts=True)):
            k = tuple(int(x) for x in k)
            possible[k] = possible.get(k, 0) + int(c)
        e = t.graph.edges
        if len(e):
            u, v = e[:, 0], e[:, 1]
            keys = np.column_stack([np.minimum(labels[u], labels[v]), np.maximum(labels[u], labels[v]),
                                    size_bin(sizes[u] * sizes[v])])
            for k, c in zip(*np.unique(keys, axis=0, return_counts=True)):
                k = tuple(int(x) for x in k)
                links[k] = links.get(k, 0) + int(c)
    return {k: links.get(k, 0) / v for k, v in sorted(possible.items())}


class StatisticalBackend(GeneratorBackend):
    name = "statistical"

    def __init__(self, model: ClassConditionedModel | None = None, *, edge_epsilon: float = 1.0,
                 count_mode: str = "empirical"):
        if count_mode not in COUNT_MODES:
            raise DataError(f"count_mode must be one of {COUNT_MODES}")
        self.model = model
        self.edge_epsilon = float(edge_epsilon)
        self.count_mode = count_mode

    def fit(self, dataset) -> "StatisticalBackend":
        self.model = fit_statistical(dataset)
        return self

    def _require(self):
        if self.model is None:
            raise DataError("backend has not been fitted")
        return self.model

    # -- stage one
    def sample_h2(self, seed: int):
        from hiergraph.hierarchy import H2Template

        model = self._require()
        rng = make_rng(seed)
        classes = np.array(sorted(model.class_freq))
        freq = np.array([model.class_freq[c] for c in classes])
        for _ in range(H2_RETRIES):
            n = int(rng.choice(model.h2_node_counts))
            labels = rng.choice(classes, size=n, p=freq)
            hints = np.empty(n, dtype=np.int64)
            for c in np.unique(labels):
                at = np.flatnonzero(labels == c)
                hints[at] = rng.choice(model.sizes[int(c)], size=len(at))
            g = self._h2_links(labels, hints, rng)
            if g.is_connected():
                break
        else:
            warnings.warn("no connected template within retry bound; using largest component",
                          RuntimeWarning, stacklevel=2)
            g, kept = largest_connected_component(g)
            hints = hints[kept]
            if g.node_count < 2:
                raise DataError("template largest component has fewer than 2 nodes")
        return H2Template(g, hints)

    def _h2_links(self, labels, sizes, rng) -> AttributedGraph:
        model = self.model
        n = len(labels)
        iu, ju = np.triu_indices(n, k=1)
        lo = np.minimum(labels[iu], labels[ju])
        hi = np.maximum(labels[iu], labels[ju])
        bins = size_bin(sizes[iu] * sizes[ju])
        prob = np.zeros(len(iu))
        keys = np.column_stack([lo, hi, bins])
        uniq, inv = np.unique(keys, axis=0, return_inverse=True) if len(iu) else (np.zeros((0, 3)), [])
        for idx, (a, b, s) in enumerate(uniq.tolist()):
            p = model.pair_prob_size.get((a, b, s))
            prob[np.asarray(inv).ravel() == idx] = model.pair_prob.get((a, b), 0.0) if p is None else p
        hit = rng.random(len(iu)) < prob
        return AttributedGraph(n, np.column_stack([iu[hit], ju[hit]]), node_labels=labels,
                               label_vocab=model.label_vocab)

    # -- stage two
    def sample_h1(self, condition: int, size_hint: int | None, seed: int) -> AttributedGraph:
        model = self._require()
        if condition not in model.sizes:
            raise DataError(f"unknown condition class {condition}")
        rng = make_rng(seed)
        n = int(size_hint) if size_hint is not None else int(rng.choice(model.sizes[condition]))
        weights = rng.choice(model.degree_weights[condition], size=n).astype(float)
        edges = chung_lu(weights, rng)
        mix = model.label_mixture[condition]
        labels = rng.choice(len(mix), size=n, p=mix)
        labels = adjust_majority(labels, condition)
        return AttributedGraph(n, edges, node_labels=labels, graph_label=condition,
                               label_vocab=model.label_vocab)

    # -- stage three
    def sample_cross_edges(self, left, right, condition=None, seed=0) -> np.ndarray:
        model = self._require()
        rng = make_rng(seed)
        nl, nr = left.node_count, right.node_count
        key = _pair_key(_class_of(left), _class_of(right))
        if len(model.cross_density.get(key, ())) == 0:
            log.warning("class pair %s unseen in training; using global cross density", key)
        densities = model.density_pool(*key, nl * nr)
        if len(densities) == 0:
            raise DataError("model has no cross-edge statistics")
        if self.count_mode == "empirical":
            d = float(rng.choice(densities))
        else:
            d = rng.normal(float(np.mean(densities)), float(np.std(densities)))
        k = int(min(max(round(d * nl * nr), 1), nl * nr))
        wl = left.degrees + self.edge_epsilon
        wr = right.degrees + self.edge_epsilon
        # Gumbel top-k: the k largest log p + G equal successive draws without replacement
        logp = (np.log(wl / wl.sum())[:, None] + np.log(wr / wr.sum())[None, :]).ravel()
        keys = logp + rng.gumbel(size=logp.size)
        flat = np.sort(np.argpartition(-keys, k - 1)[:k]) if k < keys.size else np.arange(keys.size)
        return np.column_stack([flat // nr, flat % nr])

    def save(self, path) -> None:
        write_model_text(path, self._header() + model_lines(self._require()))

    def _header(self):
        return [
            "format=hiergraph-model",
            f"version={FORMAT_VERSION}",
            f"backend={self.name}",
            f"edge_epsilon={self.edge_epsilon!r}",
            f"count_mode={self.count_mode}",
        ]


# --------------------------------------------------------------------------
# text serialisation: flat key=value lines, lists space separated


def _ints(a):
    return " ".join(str(int(x)) for x in a)


def _floats(a):
    return " ".join(repr(float(x)) for x in a)


def model_lines(m: ClassConditionedModel) -> list[str]:
    out = [f"classes={_ints(m.classes)}"]
    for k in sorted(m.label_vocab):
        out.append(f"vocab.{k}={m.label_vocab[k]}")
    for c in m.classes:
        out.append(f"class.{c}.sizes={_ints(m.sizes[c])}")
        out.append(f"class.{c}.label_mixture={_floats(m.label_mixture[c])}")
        out.append(f"class.{c}.degree_weights={_ints(m.degree_weights[c])}")
    out.append(f"h2.node_counts={_ints(m.h2_node_counts)}")
    for c, f in m.class_freq.items():
        out.append(f"h2.class_freq.{c}={f!r}")
    for (a, b), p in m.pair_prob.items():
        out.append(f"h2.pair_prob.{a}.{b}={p!r}")
    for (a, b, s), p in m.pair_prob_size.items():
        out.append(f"h2.pair_prob_size.{a}.{b}.{s}={p!r}")
    for (a, b), d in m.cross_density.items():
        out.append(f"cross.{a}.{b}.densities={_floats(d)}")
        if len(m.cross_products.get((a, b), ())):
            out.append(f"cross.{a}.{b}.products={_ints(m.cross_products[(a, b)])}")
    return out


def _set_global(m: ClassConditionedModel) -> None:
    keys = list(m.cross_density)
    m.global_density = np.concatenate([m.cross_density[k] for k in keys]) if keys else np.zeros(0)
    if keys and all(len(m.cross_products.get(k, ())) == len(m.cross_density[k]) for k in keys):
        m.global_products = np.concatenate([m.cross_products[k] for k in keys])
    else:
        m.global_products = np.zeros(0, dtype=np.int64)


def write_model_text(path, lines) -> None:
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_model_text(path) -> dict[str, str]:
    kv = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.startswith("#"):
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise DataError(f"{path}:{lineno}: expected key=value")
        kv[k] = v
    if kv.get("format") != "hiergraph-model":
        raise DataError(f"{path}: not a fitted model file")
    if int(kv.get("version", -1)) != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model version {kv.get('version')}")
    return kv


def model_from_kv(kv: dict[str, str]) -> ClassConditionedModel:
    ints = lambda s: np.array([int(x) for x in s.split()], dtype=np.int64)  # noqa: E731
    floats = lambda s: np.array([float(x) for x in s.split()])  # noqa: E731
    m = ClassConditionedModel()
    for c in ints(kv.get("classes", "")):
        c = int(c)
        m.sizes[c] = ints(kv[f"class.{c}.sizes"])
        m.label_mixture[c] = floats(kv[f"class.{c}.label_mixture"])
        m.degree_weights[c] = ints(kv[f"class.{c}.degree_weights"])
    m.h2_node_counts = ints(kv.get("h2.node_counts", ""))
    for k, v in kv.items():
        parts = k.split(".")
        if k.startswith("vocab."):
            m.label_vocab[int(parts[1])] = v
        elif k.startswith("h2.class_freq."):
            m.class_freq[int(parts[2])] = float(v)
        elif k.startswith("h2.pair_prob."):
            m.pair_prob[(int(parts[2]), int(parts[3]))] = float(v)
        elif k.startswith("h2.pair_prob_size."):
            m.pair_prob_size[(int(parts[2]), int(parts[3]), int(parts[4]))] = float(v)
        elif k.startswith("cross.") and k.endswith(".densities"):
            m.cross_density[(int(parts[1]), int(parts[2]))] = floats(v)
        elif k.startswith("cross.") and k.endswith(".products"):
            m.cross_products[(int(parts[1]), int(parts[2]))] = ints(v)
    m.cross_density = dict(sorted(m.cross_density.items()))
    _set_global(m)
    return m
