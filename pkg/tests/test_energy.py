import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glcons.core import Kernel, PointCloud, Potential, eval_kernel
from glcons.energy import (FidelitySpec, build_pixel_graph, fidelity_energy, gl_energy, gl_gradient,
                           gl_infinity_energy, gl_tilde_energy, segmentation_fidelity, segmentation_objective)
from glcons.graph import build_graph, graph_from_weights

V = Potential.quartic()


def _random_graph(seed, n=50, eps=0.35):
    x = np.random.default_rng(seed).random((n, 2))
    return x, build_graph(PointCloud(x), Kernel.ball(2), eps)


def _brute_energy(x, k, eps, u, p):
    """Independent double loop over all ordered pairs."""
    n, d = x.shape
    s = 0.0
    for i in range(n):
        for j in range(n):
            w = float(eval_kernel(k, (x[i] - x[j]) / eps)) / eps ** d
            s += w * abs(u[i] - u[j]) ** p
    pot = sum((ui * ui - 1) ** 2 for ui in u)
    return s / (eps * n * n) + pot / (eps * n)


def test_constant_one_is_zero():
    _, g = _random_graph(0)
    assert gl_energy(g, np.ones(g.n), 2.0, V).total == 0.0
    assert gl_energy(g, -np.ones(g.n), 3.0, V).total == 0.0


def test_constant_zero_is_potential_over_eps():
    x = np.random.default_rng(1).random((30, 2))
    g = build_graph(PointCloud(x), Kernel.ball(2), 0.2)
    e = gl_energy(g, np.zeros(30), 2.0, V)
    assert e.interaction == 0.0
    assert e.potential == pytest.approx(5.0, rel=1e-12)


def test_three_node_path_matches_pair_enumeration():
    x = np.array([[0.0], [0.5], [1.0]])
    u = np.array([-1.0, 0.0, 1.0])
    g = build_graph(PointCloud(x), Kernel.ball(1), 1.0)
    want = _brute_energy(x, Kernel.ball(1), 1.0, u, 2.0)
    assert want == pytest.approx(15 / 9, rel=1e-15)
    assert gl_energy(g, u, 2.0, V).total == pytest.approx(want, rel=1e-14)


@given(st.integers(0, 1000), st.sampled_from([1.0, 1.5, 2.0, 3.0]))
def test_energy_matches_brute_force(seed, p):
    rng = np.random.default_rng(seed)
    x = rng.random((12, 2))
    u = rng.uniform(-1.2, 1.2, 12)
    k = Kernel.gaussian(2, 0.8, 1.5)
    g = build_graph(PointCloud(x), k, 0.4)
    assert gl_energy(g, u, p, V).total == pytest.approx(_brute_energy(x, k, 0.4, u, p), rel=1e-12)


def test_gradient_constant_field():
    _, g = _random_graph(2)
    c = 0.3
    grad = gl_gradient(g, np.full(g.n, c), 2.0, V)
    assert np.allclose(grad, 4 * c * (c * c - 1) / (g.eps * g.n), rtol=1e-14, atol=0)
    assert not np.any(gl_gradient(g, np.ones(g.n), 2.0, V))


def _fd_rel_error(g, u, p, h=1e-6):
    grad = gl_gradient(g, u, p, V)
    fd = np.empty_like(u)
    for k in range(u.size):
        e = np.zeros_like(u)
        e[k] = h
        fd[k] = (gl_energy(g, u + e, p, V).total - gl_energy(g, u - e, p, V).total) / (2 * h)
    return np.max(np.abs(grad - fd)) / np.max(np.abs(fd))


def test_gradient_finite_differences_p25():
    _, g = _random_graph(3)
    u = np.random.default_rng(3).uniform(-1, 1, g.n)
    assert _fd_rel_error(g, u, 2.5) <= 1e-6


def test_fidelity_examples():
    spec = FidelitySpec([2], [1.0], weight=2.0, q=2.0)
    assert fidelity_energy(spec, [0, 0, -1.0, 0]) == 2.0
    assert fidelity_energy(spec, [0, 0, 1.0, 0]) == 0.0
    assert fidelity_energy(FidelitySpec([2], [1.0], weight=0.0), [5, 5, 5, 5.0]) == 0.0


def test_fidelity_growth_check():
    spec = FidelitySpec([0, 1], [1.0, -1.0], weight=3.0, q=2.0)
    assert spec.satisfies_growth()


def test_breakdown_sums_and_json():
    _, g = _random_graph(4)
    u = np.random.default_rng(4).uniform(-1, 1, g.n)
    fid = FidelitySpec([0, 5], [1.0, -1.0], 10.0)
    e = gl_energy(g, u, 2.0, V, fid)
    assert e.total == (e.interaction + e.potential) + e.fidelity
    assert set(json.loads(e.to_json())) == {"interaction", "potential", "fidelity", "total", "n", "eps", "p"}


@given(st.integers(0, 10_000))
def test_flip_symmetry_and_permutation_invariance(seed):
    rng = np.random.default_rng(seed)
    x = rng.random((40, 2))
    u = rng.uniform(-1, 1, 40)
    g = build_graph(PointCloud(x), Kernel.ball(2), 0.3)
    e = gl_energy(g, u, 2.5, V).total
    assert gl_energy(g, -u, 2.5, V).total == e
    perm = rng.permutation(40)
    gp = build_graph(PointCloud(x[perm]), Kernel.ball(2), 0.3)
    assert gl_energy(gp, u[perm], 2.5, V).total == e


def test_zero_energy_iff_componentwise_constant_wells():
    # two components {0,1} and {2,3}
    W = np.array([[1, 2, 0, 0], [2, 1, 0, 0], [0, 0, 1, 3], [0, 0, 3, 1.0]])
    g = graph_from_weights(W, 0.5, 1)
    for u in itertools.product([-1.0, 0.0, 1.0], repeat=4):
        zero = gl_energy(g, np.array(u), 2.0, V).total == 0.0
        want = abs(u[0]) == 1 and u[0] == u[1] and abs(u[2]) == 1 and u[2] == u[3]
        assert zero == want
        assert gl_energy(g, np.array(u), 2.0, V).total >= 0


def test_p_below_one_rejected():
    _, g = _random_graph(5)
    with pytest.raises(ValueError):
        gl_energy(g, np.zeros(g.n), 0.5, V)
    with pytest.raises(ValueError):
        gl_gradient(g, np.zeros(g.n), 0.5, V)


# ---------------------------------------------------------------- pixels

def test_pixel_graph_weights():
    img = np.zeros((4, 4, 3))
    img[:, 2:, 0] = math.sqrt(5e-4)  # |y_i - y_j|^2 = tau across the colour edge
    g = build_pixel_graph(img)
    eps = 1 / 4
    idx = lambda r, c: r * 4 + c
    assert g.W[idx(0, 0), idx(0, 1)] == pytest.approx(eps ** -2)
    assert g.W[idx(0, 1), idx(0, 2)] == pytest.approx(eps ** -2 * math.exp(-1), rel=1e-12)
    assert g.W[idx(0, 0), idx(1, 1)] == 0.0  # diagonal neighbour is farther than eps
    assert g.W[idx(0, 0), idx(0, 2)] == 0.0
    with pytest.raises(ValueError):
        build_pixel_graph(img, tau_color=0.0)


def test_segmentation_objective_constant_and_lambda_zero():
    img = np.random.default_rng(0).random((3, 3, 3))
    g = build_pixel_graph(img)
    assert segmentation_objective(g, np.ones(9), 2.0, V, [0, 4], [1.0, 1.0], 100.0) == 0.0
    u = np.random.default_rng(1).uniform(-1, 1, 9)
    assert segmentation_objective(g, u, 2.0, V, [0], [1.0], 0.0) == gl_energy(g, u, 2.0, V).total


def test_segmentation_objective_2x2_brute_force():
    img = np.array([[[0, 0, 0], [0.01, 0, 0]], [[0, 0.02, 0], [0.5, 0.5, 0.5]]])
    u = np.array([0.3, -0.2, 0.9, -1.0])
    lam, tau = 7.0, 5e-4
    n, h = 4, 0.5
    ys = img.reshape(4, 3)
    pos = np.array([[c * h, r * h] for r in range(2) for c in range(2)])
    s = 0.0
    for i in range(n):
        for j in range(n):
            if np.linalg.norm(pos[i] - pos[j]) <= h + 1e-12:
                s += h ** -2 * math.exp(-np.sum((ys[i] - ys[j]) ** 2) / tau) * (u[i] - u[j]) ** 2
    want = s / (h * n * n) + sum((v * v - 1) ** 2 for v in u) / (h * n) + 0.5 * lam * (1.0 - u[1]) ** 2
    g = build_pixel_graph(img, tau)
    assert segmentation_objective(g, u, 2.0, V, [1], [1.0], lam) == pytest.approx(want, rel=1e-13)
    # the same objective through the fidelity term of gl_energy
    fid = segmentation_fidelity(n, [1], [1.0], lam)
    assert gl_energy(g, u, 2.0, V, fid).total == pytest.approx(want, rel=1e-13)


def test_segmentation_index_out_of_range():
    g = build_pixel_graph(np.zeros((2, 2, 3)))
    with pytest.raises(IndexError):
        segmentation_objective(g, np.zeros(4), 2.0, V, [4], [1.0], 1.0)


# ---------------------------------------------------------------- p -> infinity

def test_infinity_forms_trivial():
    _, g = _random_graph(6, n=10)
    assert gl_infinity_energy(g, np.ones(10), V) == 0.0
    assert gl_tilde_energy(g, np.ones(10), 50.0, V) == 0.0


def test_single_edge_infinity():
    W = np.array([[0, 2.0], [2.0, 0]])
    g = graph_from_weights(W, 1.0, 1)
    zero = Potential.tabulated([-1, 1], [0, 0], tau=1.0, r_v=2.0)
    assert gl_infinity_energy(g, np.array([0.0, 1.0]), zero) == 2.0


def test_tilde_approaches_infinity_form():
    x = np.random.default_rng(7).random((5, 2))
    g = build_graph(PointCloud(x), Kernel.ball(2), 0.6)
    u = np.random.default_rng(8).uniform(-1, 1, 5)
    inf = gl_infinity_energy(g, u, V)
    vals = [gl_tilde_energy(g, u, p, V) for p in (2, 10, 50, 200)]
    assert abs(vals[-1] - inf) <= 0.05 * inf
    gaps = [abs(v - inf) for v in vals]
    assert gaps[-1] <= gaps[0]


def test_tilde_no_overflow_large_p():
    _, g = _random_graph(9, n=20)
    u = np.random.default_rng(9).uniform(-1, 1, 20)
    assert np.isfinite(gl_tilde_energy(g, u, 1000.0, V))
