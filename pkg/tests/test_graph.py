import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glcons.core import DimensionError, Kernel, PointCloud
from glcons.graph import build_graph, connectivity_report, read_edge_list, write_edge_list


def _w(g, i, j):
    return g.W[i, j]


def test_ball_weight_inside():
    g = build_graph(PointCloud([[0.0, 0.0], [0.3, 0.0]]), Kernel.ball(2), 0.5)
    assert _w(g, 0, 1) == pytest.approx(4.0)


def test_ball_weight_outside():
    g = build_graph(PointCloud([[0.0, 0.0], [0.6, 0.0]]), Kernel.ball(2), 0.5)
    assert _w(g, 0, 1) == 0.0
    assert g.num_edges == 0


def test_gaussian_weight_1d():
    g = build_graph(PointCloud([[0.0], [0.1]]), Kernel.gaussian(1, 1.0, 2.0), 0.1)
    assert _w(g, 0, 1) == pytest.approx(10 * math.exp(-1), rel=1e-12)


def test_self_loops():
    g = build_graph(PointCloud(np.random.default_rng(0).random((20, 2))), Kernel.ball(2), 0.3)
    assert np.allclose(g.W.diagonal(), 1 / 0.09)


def test_errors():
    c = PointCloud(np.zeros((3, 2)))
    with pytest.raises(ValueError):
        build_graph(c, Kernel.ball(2), 0.0)
    with pytest.raises(DimensionError):
        build_graph(c, Kernel.ball(3), 0.1)


@given(st.integers(0, 10_000), st.integers(2, 300), st.integers(1, 3))
def test_grid_equals_brute_force(seed, n, d):
    rng = np.random.default_rng(seed)
    x = rng.random((n, d))
    eps = 0.3 * rng.random() + 0.05
    k = Kernel.gaussian(d, 0.6, 1.2)
    a = build_graph(PointCloud(x), k, eps, method="grid")
    b = build_graph(PointCloud(x), k, eps, method="brute")
    assert (a.W != b.W).nnz == 0
    assert a.is_symmetric()


def test_support_respected_and_symmetric():
    x = np.random.default_rng(4).random((300, 2))
    g = build_graph(PointCloud(x), Kernel.ball(2), 0.1)
    i, j, w = g.edges()
    assert np.all(np.linalg.norm(x[i] - x[j], axis=1) <= 0.1)
    assert np.all(w > 0)
    assert g.is_symmetric()


def test_doubling_eps_scales_indicator_weights():
    x = np.random.default_rng(5).random((200, 2))
    k = Kernel.ball(2)
    a = build_graph(PointCloud(x), k, 0.1)
    b = build_graph(PointCloud(x), k, 0.2)
    ia, ja, wa = a.edges()
    assert np.all(np.asarray(b.W[ia, ja]).ravel() == wa * 0.25)


def test_connectivity_examples():
    x = np.random.default_rng(0).random((10, 2)) * 0.1
    assert connectivity_report(build_graph(PointCloud(x), Kernel.ball(2), 1.0)).n_components == 1
    y = np.vstack([x, x + 5.0])
    rep = connectivity_report(build_graph(PointCloud(y), Kernel.ball(2), 1.0))
    assert rep.n_components == 2 and rep.sizes == [10, 10]


def test_connectivity_rate_monte_carlo():
    n = 100
    eps = 3 * math.sqrt(math.log(n) / n)
    hits = 0
    for s in range(100):
        x = np.random.default_rng(s).random((n, 2))
        hits += connectivity_report(build_graph(PointCloud(x), Kernel.ball(2), eps)).n_components == 1
    assert hits >= 95


def test_edge_list_roundtrip(tmp_path):
    x = np.random.default_rng(6).random((50, 2))
    g = build_graph(PointCloud(x), Kernel.gaussian(2, 1.0, 2.0), 0.2)
    write_edge_list(tmp_path / "e.csv", g, comment="test")
    h = read_edge_list(tmp_path / "e.csv")
    assert (h.W != g.W).nnz == 0
    assert h.eps == g.eps
