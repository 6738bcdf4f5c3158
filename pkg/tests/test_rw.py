"""Walk-return encodings against hand-computed transition powers."""

import numpy as np
import pytest

from aggterm.graphs import from_edges
from aggterm.rw import rw_encoding, rw_encoding_all
from conftest import path_graph, rand_graph, star_graph


def triangle():
    return from_edges(3, [0, 0, 1], [1, 2, 2])


def test_triangle_returns():
    g = triangle()
    # uniform walk on C3: no length-1 return, 1/2 at length 2, 1/4 at 3
    expect = np.array([0.0, 0.5, 0.25, 0.375])
    for v in range(3):
        assert np.allclose(rw_encoding(g, v, 4), expect, atol=1e-12)


def test_single_edge_alternates():
    g = from_edges(2, [0], [1])
    assert np.allclose(rw_encoding(g, 0, 5), [0, 1, 0, 1, 0])


def test_star_center_and_leaf():
    g = star_graph(np.zeros((4, 1)))
    assert np.allclose(rw_encoding(g, 0, 4), [0, 1, 0, 1])
    assert np.allclose(rw_encoding(g, 1, 4), [0, 1 / 3, 0, 1 / 3])


def test_path3_endpoint_and_middle():
    g = path_graph(np.zeros((3, 1)))
    assert np.allclose(rw_encoding(g, 0, 4), [0, 0.5, 0, 0.5])
    assert np.allclose(rw_encoding(g, 1, 4), [0, 1, 0, 1])


def test_isolated_node_is_zero():
    g = from_edges(3, [1], [2])
    assert np.array_equal(rw_encoding(g, 0, 6), np.zeros(6))


def test_all_matches_per_node():
    rng = np.random.default_rng(41)
    for _ in range(5):
        g = rand_graph(rng, 30, 1, ensure_isolated=True)
        allv = rw_encoding_all(g, 5)
        assert allv.shape == (g.n, 5)
        for v in range(g.n):
            assert np.allclose(allv[v], rw_encoding(g, v, 5), atol=1e-12)


def test_exact_matches_matrix_power():
    rng = np.random.default_rng(42)
    g = rand_graph(rng, 25, 1)
    deg = g.degrees.astype(float)
    trans = np.zeros((g.n, g.n))
    for v in range(g.n):
        for u in g.neighbors(v):
            trans[v, u] = 1.0 / deg[v]
    power = np.eye(g.n)
    for k in range(1, 7):
        power = power @ trans
        for v in range(g.n):
            got = rw_encoding(g, v, 6, method="exact_local")
            assert abs(got[k - 1] - power[v, v]) < 1e-12


def test_monte_carlo_close_to_exact():
    rng = np.random.default_rng(43)
    g = rand_graph(rng, 20, 1)
    v = int(np.argmax(g.degrees))
    exact = rw_encoding(g, v, 4, method="exact_local")
    mc = rw_encoding(g, v, 4, method="monte_carlo", walks=200000, seed=7)
    assert np.all(np.abs(mc - exact) < 0.01)


def test_bad_kmax_rejected():
    g = triangle()
    with pytest.raises(ValueError):
        rw_encoding(g, 0, 0)
