import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from energytree import FunctionalColumn, GraphColumn
from energytree.expansion import (bspline_coefficients, bspline_evaluate, expand, fit_expansion,
                                  k_core_shell_indices, s_core_shell_values, shell_distribution)


def _adj(graph, n=None):
    return nx.to_numpy_array(graph, nodelist=range(n or graph.number_of_nodes()))


def test_complete_graph():
    shells = k_core_shell_indices(_adj(nx.complete_graph(5)))
    np.testing.assert_array_equal(shell_distribution(shells, 5), [0, 0, 0, 0, 5])


def test_path_graph():
    shells = k_core_shell_indices(_adj(nx.path_graph(4)))
    np.testing.assert_array_equal(shell_distribution(shells, 4), [0, 4, 0, 0])


def test_k4_with_pendant():
    g = nx.complete_graph(4)
    g.add_edge(3, 4)
    np.testing.assert_array_equal(k_core_shell_indices(_adj(g)), [3, 3, 3, 3, 1])


def test_isolated_vertices_have_shell_zero():
    np.testing.assert_array_equal(k_core_shell_indices(np.zeros((3, 3))), [0, 0, 0])


def test_unit_star_s_core():
    a = _adj(nx.star_graph(4))
    np.testing.assert_allclose(s_core_shell_values(a), np.ones(5))


def test_star_s_core():
    a = np.zeros((4, 4))
    a[0, 1:] = a[1:, 0] = [2.0, 0.5, 1.0]
    # leaves leave at their own strength; the centre then has strength 0 but
    # survives at the running level of the last removal
    np.testing.assert_allclose(s_core_shell_values(a), [2.0, 2.0, 0.5, 1.0])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 25), st.floats(0.05, 0.9))
def test_k_core_matches_networkx(seed, n, p):
    g = nx.gnp_random_graph(n, p, seed=seed)
    expected = nx.core_number(g)
    got = k_core_shell_indices(_adj(g, n))
    np.testing.assert_array_equal(got, [expected[v] for v in range(n)])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 15))
def test_binary_s_core_equals_k_core(seed, n):
    g = nx.gnp_random_graph(n, 0.4, seed=seed)
    a = _adj(g, n)
    np.testing.assert_array_equal(s_core_shell_values(a), k_core_shell_indices(a))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 15))
def test_shell_invariant_to_relabeling(seed, n):
    rng = np.random.default_rng(seed)
    w = np.triu(rng.random((n, n)) * (rng.random((n, n)) < 0.5), 1)
    w = w + w.T
    perm = rng.permutation(n)
    np.testing.assert_allclose(s_core_shell_values(w[perm][:, perm]), s_core_shell_values(w)[perm])


def test_adding_edge_never_lowers_shells():
    rng = np.random.default_rng(3)
    for _ in range(50):
        g = nx.gnp_random_graph(12, 0.3, seed=int(rng.integers(1 << 30)))
        a = _adj(g, 12)
        before = k_core_shell_indices(a)
        i, j = rng.choice(12, 2, replace=False)
        a[i, j] = a[j, i] = 1.0
        assert np.all(k_core_shell_indices(a) >= before)


def test_invalid_graphs():
    with pytest.raises(ValueError, match="symmetric"):
        k_core_shell_indices(np.array([[0, 1], [0, 0]]))
    with pytest.raises(ValueError, match="binary"):
        k_core_shell_indices(np.array([[0, 2], [2, 0]]))


def test_bspline_reconstructs_sine():
    t = np.linspace(0, 1, 100)
    f = np.sin(2 * np.pi * t)
    comp = bspline_coefficients(f, t, 10)
    fit = bspline_evaluate(comp.values[0], comp.meta["knots"], t)
    assert np.sqrt(np.mean((fit - f) ** 2)) < 1e-2


def test_bspline_constant_curve():
    t = np.linspace(0, 1, 50)
    comp = bspline_coefficients(np.full(50, 3.7), t, 10)
    np.testing.assert_allclose(comp.values[0], 3.7, atol=1e-10)


def test_bspline_rank_deficient():
    with pytest.raises(ValueError, match="rank-deficient"):
        bspline_coefficients(np.zeros(6), np.linspace(0, 1, 6), 10)


def test_bspline_batch_equals_single():
    rng = np.random.default_rng(0)
    t = np.linspace(0, 1, 30)
    curves = rng.normal(size=(5, 30))
    batch = bspline_coefficients(curves, t).values
    for k in range(5):
        np.testing.assert_array_equal(bspline_coefficients(curves[k], t).values[0], batch[k])


def test_expand_functional_column():
    t = np.linspace(0, 1, 40)
    col = FunctionalColumn("f", t, np.vstack([np.sin(2 * np.pi * t), np.ones(40)]))
    meta = fit_expansion(col, n_basis=8)
    out = expand(col, meta)
    assert out.values.shape == (2, 8)


def test_weighted_expansion_clips_out_of_range():
    a = np.zeros((2, 3, 3))
    a[0, 0, 1] = a[0, 1, 0] = 1.0
    a[1, 0, 1] = a[1, 1, 0] = 2.0
    train = GraphColumn("g", a, "weighted")
    meta = fit_expansion(train, shell_bins=4)
    big = a.copy() * 10
    out = expand(GraphColumn("g", big, "weighted"), meta)
    assert out.values.shape == (2, 4)
    np.testing.assert_array_equal(out.values.sum(axis=1), [3, 3])
