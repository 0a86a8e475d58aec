import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from netsindy.graph import (DATASETS, EdgeListError, Graph, GraphError, SbmSpec,
                            generate_balanced_tree, generate_path, generate_sbm, laplacian,
                            load_dataset, load_edge_list, serialize_edge_list)


def test_graph_rejects_self_loops_and_negative_weights():
    with pytest.raises(GraphError):
        Graph(np.eye(2))
    with pytest.raises(GraphError):
        Graph(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    with pytest.raises(GraphError):
        Graph(np.array([[0.0, 1.0], [0.0, 0.0]]), directed=False)


def test_adjacency_is_read_only():
    g = generate_path(3)
    with pytest.raises(ValueError):
        g.adjacency[0, 1] = 5.0


def test_sbm_single_node():
    g = generate_sbm(SbmSpec([1], 0.7, 0.3))
    assert g.adjacency.shape == (1, 1)
    assert g.adjacency[0, 0] == 0.0


def test_sbm_two_disjoint_triangles():
    g = generate_sbm(SbmSpec([3, 3], 1.0, 0.0, directed=False))
    block = np.ones((3, 3)) - np.eye(3)
    expected = np.block([[block, np.zeros((3, 3))], [np.zeros((3, 3)), block]])
    np.testing.assert_array_equal(g.adjacency, expected)


def test_sbm_intra_block_edge_fraction():
    spec = SbmSpec([20, 20, 20], 0.5, 0.05, seed=7)
    a = generate_sbm(spec).adjacency
    z = spec.membership()
    same = (z[:, None] == z[None, :]) & ~np.eye(60, dtype=bool)
    frac = (a[same] > 0).mean()
    assert abs(frac - 0.5) <= 0.1
    cross = (a[z[:, None] != z[None, :]] > 0).mean()
    assert abs(cross - 0.05) <= 0.05


def test_sbm_matches_independent_philox_draws():
    # one uniform per ordered pair, row-major, from Philox keyed by the seed
    spec = SbmSpec([4, 3], 0.6, 0.2, edge_weight=0.5, seed=11)
    u = np.random.Generator(np.random.Philox(key=11)).random((7, 7))
    z = np.array([0, 0, 0, 0, 1, 1, 1])
    p = np.where(z[:, None] == z[None, :], 0.6, 0.2)
    expected = 0.5 * ((u < p) & ~np.eye(7, dtype=bool))
    np.testing.assert_array_equal(generate_sbm(spec).adjacency, expected)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_sbm_reproducible(seed):
    spec = SbmSpec([5, 6], 0.4, 0.1, seed=seed)
    assert np.array_equal(generate_sbm(spec).adjacency, generate_sbm(spec).adjacency)


def test_sbm_rejects_bad_probability():
    with pytest.raises(GraphError):
        generate_sbm(SbmSpec([3], 1.5, 0.0))


@pytest.mark.parametrize("branching,height,nodes", [(2, 0, 1), (2, 2, 7), (3, 3, 40)])
def test_balanced_tree_sizes(branching, height, nodes):
    g = generate_balanced_tree(branching, height)
    assert g.n == nodes
    # geometric series 1 + b + ... + b^h, and a tree has n - 1 edges
    assert nodes == sum(branching ** k for k in range(height + 1))
    assert g.num_edges == nodes - 1


def test_path_small_cases():
    assert generate_path(1).adjacency.tolist() == [[0.0]]
    assert generate_path(2).adjacency.tolist() == [[0.0, 1.0], [1.0, 0.0]]


def test_path_laplacian_closed_form():
    lam = np.linalg.eigvalsh(laplacian(generate_path(4)))
    closed = sorted(2 - 2 * math.cos(k * math.pi / 4) for k in range(4))
    np.testing.assert_allclose(lam, closed, atol=1e-12)
    np.testing.assert_allclose(closed, [0, 2 - math.sqrt(2), 2, 2 + math.sqrt(2)], atol=1e-12)


def test_edge_list_single_edge():
    g = load_edge_list("0 1")
    assert g.n == 2 and not g.directed
    assert g.adjacency[1, 0] == g.adjacency[0, 1] == 1.0


def test_edge_list_directed_orientation():
    # line "src dst w" is a link from src to dst, stored at a[dst, src]
    g = load_edge_list("# directed: true\n0 1 0.3\n")
    assert g.adjacency[1, 0] == 0.3 and g.adjacency[0, 1] == 0.0


@pytest.mark.parametrize("text,line", [
    ("0 1\n1 1\n", 2),
    ("0 1 -2\n", 1),
    ("0 1\n0 1\n", 2),
    ("0 x\n", 1),
    ("0 1 nan\n", 1),
])
def test_edge_list_errors_carry_line_numbers(text, line):
    with pytest.raises(EdgeListError) as info:
        load_edge_list(text)
    assert info.value.line == line


@pytest.mark.parametrize("name,nodes,edges", [("karate", 34, 78), ("florentine", 15, 20)])
def test_embedded_datasets(name, nodes, edges):
    g = load_dataset(name)
    assert g.n == nodes
    assert g.num_edges == edges
    assert not g.directed
    assert len(g.labels) == nodes


def test_dataset_edge_counts_match_file_lines():
    from importlib import resources
    for name in DATASETS:
        text = resources.files("netsindy.data").joinpath(f"{name}.edges").read_text()
        lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        assert load_dataset(name).num_edges == len(lines)


def test_laplacian_small_cases():
    assert laplacian(generate_path(1)).tolist() == [[0.0]]
    assert laplacian(generate_path(2)).tolist() == [[1.0, -1.0], [-1.0, 1.0]]
    lam = np.linalg.eigvalsh(laplacian(generate_path(4)))
    assert abs(lam[0]) < 1e-12 and np.all(np.diff(lam) >= 0)


def test_laplacian_rejects_directed():
    with pytest.raises(GraphError):
        laplacian(generate_sbm(SbmSpec([4], 0.5, 0.0, directed=True)))


def symmetric_weights(n, data):
    w = np.array(data.draw(st.lists(st.floats(0, 5), min_size=n * n, max_size=n * n)))
    a = np.triu(w.reshape(n, n), 1)
    return a + a.T


@given(st.data())
@settings(max_examples=50, deadline=None)
def test_laplacian_psd(data):
    n = data.draw(st.integers(1, 8))
    a = symmetric_weights(n, data)
    lap = laplacian(Graph(a))
    assert np.array_equal(lap, lap.T)
    x = np.array(data.draw(st.lists(st.floats(-10, 10), min_size=n, max_size=n)))
    if np.linalg.norm(x) > 0:
        assert x @ lap @ x / (x @ x) >= -1e-10


@given(st.data())
@settings(max_examples=50, deadline=None)
def test_edge_list_round_trip(data):
    n = data.draw(st.integers(1, 7))
    directed = data.draw(st.booleans())
    w = np.array(data.draw(st.lists(st.floats(1e-6, 1e3), min_size=n * n, max_size=n * n)))
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=n * n, max_size=n * n)))
    a = (w * mask).reshape(n, n)
    np.fill_diagonal(a, 0.0)
    if not directed:
        a = np.triu(a, 1) + np.triu(a, 1).T
    g = Graph(a, directed=directed)
    back = load_edge_list(serialize_edge_list(g))
    assert back.directed == directed
    np.testing.assert_array_equal(back.adjacency, g.adjacency)
