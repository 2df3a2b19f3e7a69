import itertools
import math

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import complete, cycle, data_paths, graph, path, random_graph
from hiergraph.errors import DataError
from hiergraph.graph import AttributedGraph, largest_connected_component
from hiergraph.metrics import (
    Histogram,
    clustering_hist,
    community_eval,
    compare_sets,
    degree_hist,
    diameter,
    double_sweep_diameter,
    eccentricities,
    eccentricity_hist,
    graph_stats,
    local_clustering,
    mean_stats,
    mmd,
    node_values,
    normalized_laplacian_eigenvalues,
    qq_quantiles,
    qq_table,
    spectral_hist,
    transitivity,
    write_qq_csv,
)
from hiergraph.random_graphs import chung_lu


def to_nx(g):
    h = nx.Graph()
    h.add_nodes_from(range(g.node_count))
    h.add_edges_from(g.edges.tolist())
    return h


def connected_random(n, p, seed):
    g, _ = largest_connected_component(random_graph(n, p, seed))
    return g


def brute_clustering(g):
    """Per-node ratio of linked neighbour pairs, by enumeration."""
    a = g.csr.toarray().astype(bool)
    out = []
    for v in range(g.node_count):
        nb = np.flatnonzero(a[v])
        pairs = list(itertools.combinations(nb, 2))
        out.append(sum(a[x, y] for x, y in pairs) / len(pairs) if pairs else 0.0)
    return np.array(out)


def brute_transitivity(g):
    """3 x triangles / connected triples, enumerating all node triples."""
    a = g.csr.toarray().astype(bool)
    tri = triads = 0
    for i, j, k in itertools.combinations(range(g.node_count), 3):
        e = int(a[i, j]) + int(a[j, k]) + int(a[i, k])
        tri += e == 3
        triads += 3 if e == 3 else (e == 2)
    return 3 * tri / triads if triads else 0.0


class TestGraphStats:
    def test_triangle_pendant(self, triangle_pendant):
        s = graph_stats(triangle_pendant)
        assert s.clustering == pytest.approx(7 / 12)
        assert s.transitivity == pytest.approx(3 / 5)
        assert s.density == pytest.approx(2 / 3)
        assert (s.diameter, s.diameter_exact) == (2, True)
        assert (s.nodes, s.edges) == (4, 4)

    @pytest.mark.parametrize("n", [2, 3, 6, 10])
    def test_complete(self, n):
        s = graph_stats(complete(n))
        assert s.density == 1.0 and s.diameter == 1
        if n >= 3:
            assert s.clustering == 1.0 and s.transitivity == 1.0

    def test_disconnected_rejected(self, two_triangles):
        with pytest.raises(DataError, match="largest connected component"):
            graph_stats(two_triangles)
        with pytest.raises(DataError):
            degree_hist(two_triangles)

    def test_communities(self, bridged_triangles):
        s = graph_stats(bridged_triangles)
        assert (s.n_c, s.c_med) == (2, 3)

    def test_approximate_diameter_flag(self):
        g = path(30)
        s = graph_stats(g, exact_diameter_threshold=10)
        assert s.diameter_exact is False and s.diameter <= 29

    def test_mean_stats(self):
        rows = mean_stats([graph_stats(complete(3)), graph_stats(path(4))])
        assert rows["nodes"] == 3.5 and rows["diameter"] == 2.0
        assert rows["diameter_exact"] is True

    @settings(max_examples=60, deadline=None)
    @given(st.integers(3, 50), st.floats(0.05, 0.8), st.integers(0, 10**6))
    def test_clustering_and_transitivity_oracles(self, n, p, seed):
        g = random_graph(n, p, seed)
        assert np.allclose(local_clustering(g), brute_clustering(g))
        assert transitivity(g) == pytest.approx(brute_transitivity(g))
        h = to_nx(g)
        assert np.allclose(local_clustering(g), [nx.clustering(h)[v] for v in range(n)])
        assert transitivity(g) == pytest.approx(nx.transitivity(h))

    def test_bounds(self):
        for seed in range(20):
            g = connected_random(40, 0.15, seed)
            s = graph_stats(g, communities=False)
            assert 0 <= s.density <= 1 and 0 <= s.transitivity <= 1 and 0 <= s.clustering <= 1
            assert s.diameter >= 1


class TestDistances:
    def test_eccentricity_oracle(self):
        for seed in range(20):
            g = connected_random(60, 0.08, seed)
            ecc, exact = eccentricities(g)
            assert exact
            h = to_nx(g)
            assert ecc.tolist() == [nx.eccentricity(h)[v] for v in range(g.node_count)]
            assert diameter(g) == (nx.diameter(h), True)

    def test_sampled_sources(self):
        g = connected_random(300, 0.03, 1)
        # fewer nodes than sample sources: every node is a source, so exact
        ecc, exact = eccentricities(g, threshold=100)
        assert exact and len(ecc) == g.node_count
        g = connected_random(900, 0.006, 1)
        ecc, exact = eccentricities(g, threshold=100, seed=5)
        assert not exact and len(ecc) == 500
        assert np.array_equal(ecc, eccentricities(g, threshold=100, seed=5)[0])
        full = dict(enumerate(eccentricities(g)[0].tolist()))
        assert set(ecc.tolist()) <= set(full.values())
        assert eccentricity_hist(g, threshold=100).approximate

    def test_double_sweep_is_lower_bound(self):
        rng = np.random.default_rng(0)
        for seed in range(100):
            n = int(rng.integers(2, 201))
            g = connected_random(n, float(rng.uniform(1.5, 4.0)) / n, seed)
            assert double_sweep_diameter(g, seed=seed) <= diameter(g)[0]

    def test_double_sweep_exact_on_trees(self):
        for seed in range(30):
            t = nx.random_labeled_tree(int(np.random.default_rng(seed).integers(2, 200)), seed=seed)
            g = AttributedGraph.from_edges(t.number_of_nodes(), list(t.edges()))
            assert double_sweep_diameter(g, seed=seed) == nx.diameter(t)

    def test_path_p3_histogram(self):
        h = eccentricity_hist(path(3))
        assert h.values.tolist() == pytest.approx([0, 1 / 3, 2 / 3])
        assert not h.approximate


class TestSpectrum:
    def test_k3(self):
        ev = normalized_laplacian_eigenvalues(complete(3))
        assert ev == pytest.approx([0.0, 1.5, 1.5])
        h = spectral_hist(complete(3))
        assert h.values[0] == pytest.approx(1 / 3) and h.values[150] == pytest.approx(2 / 3)
        assert h.values.sum() == pytest.approx(1.0)

    def test_matches_networkx(self):
        for seed in range(10):
            g = connected_random(40, 0.15, seed)
            ref = np.sort(nx.normalized_laplacian_spectrum(to_nx(g)))
            assert np.allclose(normalized_laplacian_eigenvalues(g), ref, atol=1e-8)

    def test_range_and_zero(self):
        for seed in range(20):
            g = connected_random(50, 0.1, seed)
            ev = normalized_laplacian_eigenvalues(g)
            assert ev.min() >= -1e-8 and ev.max() <= 2 + 1e-8
            assert abs(ev[0]) < 1e-8

    def test_large_graph_subsample(self):
        g = connected_random(700, 0.01, 2)
        h = spectral_hist(g, seed=3)
        assert h.approximate and h.values.sum() == pytest.approx(1.0)
        assert np.array_equal(h.values, spectral_hist(g, seed=3).values)


class TestHistograms:
    def test_regular_graph_clustering_point_mass(self):
        for g in (cycle(8), complete(6)):
            h = clustering_hist(g)
            assert h.values.max() == 1.0

    def test_degree(self, triangle_pendant):
        assert degree_hist(triangle_pendant).values.tolist() == pytest.approx([0, 0.25, 0.5, 0.25])


def rand_hists(rng, count, width=8):
    return [Histogram(v / v.sum(), "int") for v in rng.random((count, width)) + 1e-3]


class TestMmd:
    def test_closed_form(self):
        a, b = [Histogram(np.array([1.0, 0.0]), "int")], [Histogram(np.array([0.0, 1.0]), "int")]
        assert mmd(a, b) == pytest.approx(2 - 2 * math.exp(-0.5))
        assert mmd(a, b) == pytest.approx(0.78693868, abs=1e-8)

    def test_axioms(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a, b = rand_hists(rng, 10), rand_hists(rng, 10)
            assert abs(mmd(a, a)) <= 1e-9
            assert mmd(a, b) >= 0
            assert abs(mmd(a, b) - mmd(b, a)) <= 1e-9

    def test_padding_of_integer_bins(self):
        a = [Histogram(np.array([0.5, 0.5]), "int")]
        b = [Histogram(np.array([0.5, 0.5, 0.0, 0.0]), "int")]
        assert mmd(a, b) == pytest.approx(0.0, abs=1e-12)

    def test_binning_mismatch(self):
        with pytest.raises(DataError):
            mmd([Histogram(np.ones(4) / 4, "int")], [Histogram(np.ones(4) / 4, "uniform:4:0:1")])
        with pytest.raises(DataError):
            mmd([], [Histogram(np.ones(2) / 2, "int")])

    def test_sigma(self):
        a, b = [Histogram(np.array([1.0, 0.0]), "int")], [Histogram(np.array([0.0, 1.0]), "int")]
        assert mmd(a, b, sigma=2.0) == pytest.approx(2 - 2 * math.exp(-1 / 8))


class TestSetComparison:
    def test_identical_sets(self):
        gs = [connected_random(30, 0.2, s) for s in range(5)]
        r = compare_sets(gs, gs)
        assert all(abs(v) <= 1e-9 for v in r.values.values())
        assert r.header().startswith("# metrics_version=")

    def test_size_note(self):
        gs = [connected_random(30, 0.2, s) for s in range(5)]
        r = compare_sets(gs[:2], gs)
        assert r.notes and "2x" in r.notes[0]

    def test_community_eval_identity(self):
        g = connected_random(300, 0.03, 4)
        r = community_eval(g, g, seed=2)
        assert set(r.values) == {"nodes", "degree", "clustering", "eccentricity", "spectral"}
        assert all(abs(v) <= 1e-9 for v in r.values.values())

    def test_community_eval_needs_communities(self):
        with pytest.raises(DataError):
            community_eval(complete(6), complete(6))

    def test_clone_is_farther_than_split_half(self):
        # stand-in for the real-data check below on a clustered synthetic graph
        h = nx.powerlaw_cluster_graph(3000, 4, 0.8, seed=1)
        real = AttributedGraph.from_edges(3000, list(h.edges()))
        clone, _ = largest_connected_component(
            AttributedGraph(3000, chung_lu(real.degrees.astype(float), np.random.default_rng(0))))
        self._split_half_check(real, clone)

    def test_clone_on_facebook(self):
        p = data_paths("facebook_edges", "facebook_target")
        if p is None:
            pytest.skip("Facebook files not configured")
        from hiergraph.datasets import ingest_facebook

        real = ingest_facebook(p["facebook_edges"], p["facebook_target"]).graph
        clone, _ = largest_connected_component(
            AttributedGraph(real.node_count, chung_lu(real.degrees.astype(float), np.random.default_rng(0))))
        self._split_half_check(real, clone)

    @staticmethod
    def _split_half_check(real, clone):
        from hiergraph.metrics import communities_of

        rc = communities_of(real, 0)
        half = compare_sets(rc[0::2], rc[1::2], ["clustering"]).values["clustering"]
        versus = community_eval(real, clone, seed=0).values["clustering"]
        assert versus > half


class TestQQ:
    def test_identical(self):
        v = np.random.default_rng(0).random(500)
        r, s = qq_quantiles(v, v)
        assert np.array_equal(r, s)

    def test_shift(self):
        v = np.random.default_rng(1).normal(size=400)
        r, s = qq_quantiles(v, v + 1)
        assert np.allclose(s, r + 1)

    def test_uniform_order_statistics(self):
        v = np.random.default_rng(2).random(10_000)
        r, _ = qq_quantiles(v, v, q=100)
        assert np.all(np.abs(r - np.arange(100) / 100) <= 0.02)

    def test_empty(self):
        with pytest.raises(DataError):
            qq_quantiles([], [1.0])

    def test_table_and_csv(self, tmp_path):
        g = connected_random(80, 0.08, 3)
        real = node_values(g)
        cols = qq_table(real, {"ours": node_values(connected_random(80, 0.08, 4))}, q=10)
        assert list(cols) == [f"{s}_quantiles_{m}" for s in ("Degree", "Clustering", "Eccentricity")
                              for m in ("real", "ours")]
        write_qq_csv(tmp_path / "qq.csv", cols)
        lines = (tmp_path / "qq.csv").read_text().splitlines()
        assert lines[0].split(",")[:2] == ["Degree_quantiles_real", "Degree_quantiles_ours"]
        assert len(lines) == 11
