import numpy as np
import pytest

from conftest import complete, graph
from hiergraph.backends import (
    ClassConditionedModel,
    EmpiricalBackend,
    MaskViolation,
    PairMask,
    StatisticalBackend,
    adjust_majority,
    conditioning_fidelity,
    fit_statistical,
    load_backend,
    make_backend,
    sample_h1_empirical,
)
from hiergraph.datasets import SbmSpec, generate_sbm_corpus, sample_sbm_graph
from hiergraph.errors import ConfigError, DataError
from hiergraph.graph import GraphCorpus, largest_connected_component
from hiergraph.hierarchy import (
    H2Template,
    HierarchicalDataset,
    PairSample,
    build_from_corpus,
    build_from_large_graph,
    label_segmenter,
    majority_label,
    save_dataset,
)
from hiergraph.random_graphs import chung_lu_probabilities


def labelled(g, labels, graph_label=None):
    labels = np.asarray(labels)
    return g.with_labels(labels, {int(i): f"c{i}" for i in np.unique(labels)}, graph_label)


def triangle(label=0):
    return labelled(complete(3), [label] * 3, label)


def triangle_pairs_dataset():
    """Templates of two linked triangles whose pairs share exactly one cross edge."""
    ds = HierarchicalDataset()
    for _ in range(4):
        ds.h2_samples.append(H2Template(labelled(graph(2, [(0, 1)]), [0, 0]), [3, 3]))
        ds.h1_samples.extend([(triangle(), 0), (triangle(), 0)])
        ds.pair_samples.append(PairSample(triangle(), triangle(), [(0, 2)]))
    return ds


@pytest.fixture(scope="module")
def sbm_dataset():
    # ground-truth blocks as communities, so every pair sample is an inter-block cut
    c = generate_sbm_corpus(SbmSpec(seed=3))
    return build_from_corpus(c, 1.0, segmenter=label_segmenter, uniform_label=True)


@pytest.fixture(scope="module")
def multiclass_dataset():
    rng = np.random.default_rng(5)
    g = sample_sbm_graph([40, 40, 40, 40], 0.25, 0.01, rng)
    block = g.node_labels
    # each block is 60% its own class, the rest spread over all four
    labels = np.where(rng.random(g.node_count) < 0.6, block, rng.integers(0, 4, g.node_count))
    g = labelled(g, labels)
    g, _ = largest_connected_component(g)
    return build_from_large_graph(g, 1.0, repeats=4, seed=0)


class TestPairMask:
    def test_regions(self):
        m = PairMask(2, 3)
        assert m.free_size == 6
        assert m.matrix().sum() == 2 * 6
        assert m.is_free(0, 2) and m.is_free(4, 1)
        assert not m.is_free(0, 1) and not m.is_free(2, 4) and not m.is_free(0, 5)

    def test_validate(self):
        m = PairMask(2, 3)
        assert m.validate([(0, 0), (1, 2)]).shape == (2, 2)
        with pytest.raises(MaskViolation):
            m.validate([(2, 0)])
        with pytest.raises(MaskViolation):
            m.validate([(0, 3)])
        with pytest.raises(MaskViolation):
            m.validate([(0, 1), (0, 1)])
        m.validate_union(m.to_union([(1, 2)]))
        with pytest.raises(MaskViolation):
            m.validate_union([(2, 3)])


class TestFit:
    def test_triangles_point_mass(self):
        m = fit_statistical(triangle_pairs_dataset())
        assert m.sizes[0].tolist() == [3] * 8
        assert set(m.degree_weights[0].tolist()) == {2}
        assert m.density_stats(0, 0) == pytest.approx((1 / 9, 0.0))
        assert m.h2_node_counts.tolist() == [2] * 4
        assert m.pair_prob[(0, 0)] == 1.0

    def test_sbm_cross_density(self, sbm_dataset):
        m = fit_statistical(sbm_dataset)
        d = m.cross_density[(0, 0)]
        prods = m.cross_products[(0, 0)]
        # binomial standard error of the pooled mean density
        se = np.sqrt(np.sum(0.05 * 0.95 / prods)) / len(d)
        assert abs(d.mean() - 0.05) <= 3 * se

    def test_missing_class(self):
        ds = triangle_pairs_dataset()
        ds.h2_samples.append(H2Template(labelled(graph(1, []), [7]), [3]))
        with pytest.raises(DataError, match="7"):
            fit_statistical(ds)

    def test_probabilities_in_range(self, multiclass_dataset):
        m = fit_statistical(multiclass_dataset)
        for v in list(m.pair_prob.values()) + list(m.pair_prob_size.values()) + list(m.class_freq.values()):
            assert 0.0 <= v <= 1.0
        for c in m.classes:
            assert len(m.sizes[c]) >= 1
            assert m.label_mixture[c].sum() == pytest.approx(1.0)


class TestStatisticalSampling:
    def test_one_cross_edge_for_small_parts(self):
        b = StatisticalBackend(fit_statistical(triangle_pairs_dataset()))
        for seed in range(20):
            assert len(b.checked_cross_edges(triangle(), triangle(), None, seed)) == 1

    def test_sbm_cross_count(self, sbm_dataset):
        model = fit_statistical(sbm_dataset)
        left = labelled(sample_sbm_graph([30], 0.3, 0.0, np.random.default_rng(0)), [0] * 30, 0)
        right = labelled(sample_sbm_graph([30], 0.3, 0.0, np.random.default_rng(1)), [0] * 30, 0)
        pool = model.density_pool(0, 0, 900)
        for mode in ("empirical", "normal"):
            b = StatisticalBackend(model, count_mode=mode)
            ks = np.array([len(b.checked_cross_edges(left, right, None, s)) for s in range(1000)])
            # Monte Carlo error of the mean plus the binomial error of the pool
            # of fitted densities (pairs of about 900 node pairs each)
            fit_var = 900**2 * (0.05 * 0.95 / 900) / len(pool)
            sd = np.sqrt(ks.var() / len(ks) + fit_var)
            assert abs(ks.mean() - 45) <= 3 * sd

    def test_mask_safety(self, multiclass_dataset):
        b = StatisticalBackend(fit_statistical(multiclass_dataset))
        for seed in range(50):
            left = b.sample_h1(seed % 4, None, seed)
            right = b.sample_h1((seed + 1) % 4, None, seed + 1000)
            pairs = b.checked_cross_edges(left, right, None, seed)
            assert len(pairs) >= 1
            assert np.all(pairs[:, 0] < left.node_count) and np.all(pairs[:, 1] < right.node_count)

    def test_endpoints_follow_degree(self):
        # with k = 1 the single pair is drawn with probability (d_u+1)(d_v+1)/norm
        b = StatisticalBackend(fit_statistical(triangle_pairs_dataset()))
        left = labelled(graph(3, [(0, 1), (0, 2)]), [0] * 3, 0)
        right = labelled(graph(3, [(0, 1)]), [0] * 3, 0)
        counts = np.zeros((3, 3))
        trials = 6000
        for s in range(trials):
            (u, v), = b.sample_cross_edges(left, right, None, s).tolist()
            counts[u, v] += 1
        wl, wr = left.degrees + 1.0, right.degrees + 1.0
        p = np.outer(wl / wl.sum(), wr / wr.sum())
        assert np.all(np.abs(counts / trials - p) <= 3 * np.sqrt(p * (1 - p) / trials))

    def test_k5_chung_lu_expectation(self):
        ds = HierarchicalDataset()
        ds.h2_samples.append(H2Template(labelled(graph(1, []), [0]), [5]))
        ds.h1_samples.append((labelled(complete(5), [0] * 5, 0), 0))
        b = StatisticalBackend(fit_statistical(ds))
        expected = chung_lu_probabilities([4] * 5).sum() / 2
        assert expected == pytest.approx(8.0)
        counts = np.array([b.sample_h1(0, None, s).num_edges for s in range(1000)])
        sd = np.sqrt(10 * 0.8 * 0.2 / 1000)
        assert abs(counts.mean() - expected) <= 3 * sd

    def test_zero_weights_give_empty_graph(self):
        ds = HierarchicalDataset()
        ds.h2_samples.append(H2Template(labelled(graph(1, []), [0]), [4]))
        ds.h1_samples.append((labelled(graph(4, []), [0] * 4, 0), 0))
        g = StatisticalBackend(fit_statistical(ds)).sample_h1(0, None, 0)
        assert g.node_count == 4 and g.num_edges == 0

    def test_size_hint_is_used(self, multiclass_dataset):
        b = StatisticalBackend(fit_statistical(multiclass_dataset))
        assert b.sample_h1(1, 17, 0).node_count == 17

    def test_conditioning_fidelity(self, multiclass_dataset):
        b = StatisticalBackend(fit_statistical(multiclass_dataset))
        for c in b.model.classes:
            assert conditioning_fidelity(b, c, 100) >= 0.9

    def test_unknown_condition(self, multiclass_dataset):
        b = StatisticalBackend(fit_statistical(multiclass_dataset))
        with pytest.raises(DataError):
            b.sample_h1(42, None, 0)

    def test_unfitted(self):
        with pytest.raises(DataError):
            StatisticalBackend().sample_h2(0)

    def test_determinism(self, multiclass_dataset):
        b = StatisticalBackend(fit_statistical(multiclass_dataset))
        assert b.sample_h1(0, None, 9) == b.sample_h1(0, None, 9)
        assert b.sample_h2(4).graph == b.sample_h2(4).graph
        left, right = b.sample_h1(0, None, 1), b.sample_h1(1, None, 2)
        assert np.array_equal(b.sample_cross_edges(left, right, None, 3),
                              b.sample_cross_edges(left, right, None, 3))


class TestTemplates:
    def test_single_edge_templates(self):
        b = StatisticalBackend(fit_statistical(triangle_pairs_dataset()))
        for seed in range(10):
            t = b.sample_h2(seed)
            assert t.node_count == 2 and t.graph.num_edges == 1
            assert t.size_hints.tolist() == [3, 3]

    def test_complete_when_only_aa_links(self):
        m = ClassConditionedModel(
            sizes={0: np.array([3]), 1: np.array([4])},
            label_mixture={0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])},
            degree_weights={0: np.array([2]), 1: np.array([2])},
            h2_node_counts=np.array([6]),
            class_freq={0: 1.0, 1: 0.0},
            pair_prob={(0, 0): 1.0, (0, 1): 0.0, (1, 1): 0.0},
        )
        t = StatisticalBackend(m).sample_h2(0)
        assert t.node_count == 6 and t.graph.num_edges == 15
        assert set(t.node_labels.tolist()) == {0}

    def test_sbm_template_sizes(self, sbm_dataset):
        b = StatisticalBackend(fit_statistical(sbm_dataset))
        for seed in range(200):
            t = b.sample_h2(seed)
            assert 2 <= t.node_count <= 5
            assert t.graph.is_connected()

    def test_disconnected_fallback(self):
        m = ClassConditionedModel(
            sizes={0: np.array([3])}, label_mixture={0: np.array([1.0])},
            degree_weights={0: np.array([2])}, h2_node_counts=np.array([4]),
            class_freq={0: 1.0}, pair_prob={(0, 0): 0.0},
        )
        with pytest.warns(RuntimeWarning), pytest.raises(DataError):
            StatisticalBackend(m).sample_h2(0)


class TestEmpirical:
    def test_zero_rewire_is_exact(self, multiclass_dataset):
        pool = multiclass_dataset.h1_by_condition()[2]
        g = sample_h1_empirical(multiclass_dataset, 2, seed=3, rewire_fraction=0.0)
        assert any(g is x for x in pool)

    def test_degree_multiset_preserved(self, multiclass_dataset):
        pool = multiclass_dataset.h1_by_condition()[1]
        for seed in range(10):
            g = sample_h1_empirical(multiclass_dataset, 1, seed=seed, rewire_fraction=0.5)
            sources = [x for x in pool if x.node_count == g.node_count
                       and np.array_equal(np.sort(x.degrees), np.sort(g.degrees))]
            assert sources

    def test_triangle_stays_triangle(self):
        ds = triangle_pairs_dataset()
        for seed in range(10):
            g = sample_h1_empirical(ds, 0, seed=seed, rewire_fraction=1.0)
            assert sorted(map(tuple, g.edges.tolist())) == [(0, 1), (0, 2), (1, 2)]

    def test_unknown_condition(self):
        with pytest.raises(DataError):
            sample_h1_empirical(triangle_pairs_dataset(), 5, seed=0)

    def test_backend_draws_training_templates(self, multiclass_dataset):
        b = EmpiricalBackend(multiclass_dataset, rewire_fraction=0.1)
        t = b.sample_h2(0)
        assert any(t is x for x in multiclass_dataset.h2_samples)
        g = b.sample_h1(0, 12, 1)
        assert majority_label(g) == 0 or g.graph_label == 0


class TestSerialisation:
    def test_statistical_round_trip(self, tmp_path, multiclass_dataset):
        b = StatisticalBackend(fit_statistical(multiclass_dataset), edge_epsilon=0.5, count_mode="normal")
        b.save(tmp_path / "m.txt")
        c = load_backend(tmp_path / "m.txt")
        assert isinstance(c, StatisticalBackend)
        assert (c.edge_epsilon, c.count_mode) == (0.5, "normal")
        for seed in range(5):
            assert b.sample_h2(seed).graph == c.sample_h2(seed).graph
            assert b.sample_h1(seed % 4, None, seed) == c.sample_h1(seed % 4, None, seed)
        left, right = b.sample_h1(0, None, 1), b.sample_h1(1, None, 2)
        assert np.array_equal(b.sample_cross_edges(left, right, None, 7), c.sample_cross_edges(left, right, None, 7))

    def test_empirical_round_trip(self, tmp_path, multiclass_dataset):
        save_dataset(multiclass_dataset, tmp_path / "ds")
        b = EmpiricalBackend(multiclass_dataset, rewire_fraction=0.2, dataset_path=str(tmp_path / "ds"))
        b.save(tmp_path / "m.txt")
        c = load_backend(tmp_path / "m.txt")
        assert isinstance(c, EmpiricalBackend) and c.rewire_fraction == 0.2
        assert b.sample_h1(0, 10, 3) == c.sample_h1(0, 10, 3)

    def test_empirical_needs_dataset_path(self, tmp_path, multiclass_dataset):
        with pytest.raises(DataError):
            EmpiricalBackend(multiclass_dataset).save(tmp_path / "m.txt")

    def test_bad_files(self, tmp_path):
        (tmp_path / "x.txt").write_text("format=other\n")
        with pytest.raises(DataError):
            load_backend(tmp_path / "x.txt")
        (tmp_path / "y.txt").write_text("format=hiergraph-model\nversion=99\n")
        with pytest.raises(DataError):
            load_backend(tmp_path / "y.txt")

    def test_factory(self):
        assert isinstance(make_backend("statistical"), StatisticalBackend)
        with pytest.raises(ConfigError):
            make_backend("digress")
        with pytest.raises(DataError):
            StatisticalBackend(count_mode="poisson")


def test_adjust_majority():
    assert majority_label(labelled(complete(5), adjust_majority(np.array([1, 1, 1, 2, 0]), 2))) == 2
    out = adjust_majority(np.array([0, 1]), 1)
    assert np.bincount(out)[1] > np.bincount(out, minlength=2)[0]
    assert adjust_majority(np.array([3, 3, 1]), 3).tolist() == [3, 3, 1]
