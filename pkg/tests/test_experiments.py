import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from glcons.continuum import ProfileOptions
from glcons.core import Kernel, Potential
from glcons.experiments import (BeanGeometry, bean_density, bean_seed, cell_table, converge_summary, converge_table,
                                crossing_statistic, direction_vectors, fan_out, segment_image, two_tone_image)
from glcons.core import Density, PointCloud
from glcons.graph import build_graph
from glcons.solver import SolveOptions

V = Potential.quartic()


def test_bean_geometry_shape():
    g = BeanGeometry()
    assert g.half_height(0.0) == pytest.approx(0.10)
    assert g.half_height(10.0) == pytest.approx(0.18)
    inside = g.contains([[0, 0.09], [0, 0.11], [0.6, 0.0], [0.62, 0.0], [0.3, 0.17]])
    assert inside.tolist() == [True, False, True, True, bool(0.17 <= g.half_height(0.3))]
    assert not g.contains([[0.64, 0.0]])[0]
    with pytest.raises(ValueError):
        BeanGeometry(waist_halfwidth=0.3)


def test_bean_density_support():
    rho = bean_density(BeanGeometry())
    x = rho.sample(500, np.random.default_rng(0))
    assert np.all(BeanGeometry().contains(x))
    # density peaks at the waist: more mass near x1 = 0 than out at the caps
    assert np.mean(np.abs(x[:, 0]) < 0.15) > np.mean(np.abs(x[:, 0]) > 0.45)


def test_crossing_statistic_on_known_cut():
    x = np.array([[-0.3, 0.0], [-0.1, 0.0], [0.1, 0.0], [0.3, 0.0]])
    g = build_graph(PointCloud(x), Kernel.ball(2), 0.25)
    assert crossing_statistic(x, g, [-1, -1, 1, 1]) == pytest.approx(0.0)
    assert crossing_statistic(x, g, [-1, 1, 1, 1]) == pytest.approx(0.2)
    assert crossing_statistic(x, g, [1, 1, 1, 1]) is None


def test_bean_without_fidelity_from_constant_is_constant():
    opts = SolveOptions(dt=0.5, max_iters=200, tol=1e-6)
    res = bean_seed(0, 200, 0.7, Kernel.ball(2, amplitude=0.005), V, [2.0], 0.0, BeanGeometry(), 0.25, 0.3,
                    0.08, opts, init="constant")
    run = res.runs[0]
    assert np.all(run.u == 1.0)
    assert run.crossing is None and run.energy == 0.0


def test_bean_seed_deterministic():
    opts = SolveOptions(dt=0.5, max_iters=300, tol=1e-6, backtrack=True)
    args = (3, 150, 0.7, Kernel.ball(2, amplitude=0.005), V, [2.0, 100.0], 100.0, BeanGeometry(), 0.25, 0.3, 0.08,
            opts, [-0.1, 0.0, 0.1])
    a, b = bean_seed(*args), bean_seed(*args)
    for ra, rb in zip(a.runs, b.runs):
        assert np.array_equal(ra.u, rb.u) and ra.crossing == rb.crossing and ra.monotone


def test_segment_two_tone_exact():
    rgb, mask, truth = two_tone_image(32)
    res = segment_image(rgb, mask)
    assert np.array_equal(res.labels, truth)
    assert res.agreement == 1.0 and res.solve.monotone()


def test_segment_full_mask_is_thresholded_mask():
    rng = np.random.default_rng(4)
    rgb = rng.random((12, 12, 3))
    mask = np.where(rng.random((12, 12)) > 0.5, 1, -1)
    res = segment_image(rgb, mask, lam=1e4)
    assert np.array_equal(res.labels, mask)


def test_segment_rejects_single_class_and_size_mismatch():
    rgb, mask, _ = two_tone_image(16)
    with pytest.raises(ValueError):
        segment_image(rgb, np.ones((16, 16)))
    with pytest.raises(ValueError):
        segment_image(rgb, mask[:8])


def test_converge_table_n1_and_summary():
    rho = Density.unit_box(2)
    rows = converge_table(rho, ([0.5, 0.5], [1, 0]), [1, 50], [0, 1], 4.0, 1.0, Kernel.ball(2), V)
    assert [r.n for r in rows] == [1, 1, 50, 50]
    assert rows[0].discrete == 0.0
    summ = converge_summary(rows)
    assert [s["n"] for s in summ] == [1, 50]
    assert rows[0].prediction == pytest.approx(8 / 3, rel=1e-9)


def test_fan_out_preserves_order():
    assert fan_out(lambda v: v * v, list(range(20)), threads=4) == [v * v for v in range(20)]


def test_direction_vectors():
    vs = direction_vectors(2, [0.0, math.pi / 2, [3, 4]])
    assert np.allclose(vs[2], [0.6, 0.8])
    with pytest.raises(ValueError):
        direction_vectors(2, [])
    with pytest.raises(ValueError):
        direction_vectors(3, [0.3])
    with pytest.raises(ValueError):
        direction_vectors(2, [[1, 0, 0]])


def test_cell_table_monotone_in_rho_and_isotropic():
    opts = ProfileOptions(L=2.0, m=120)
    rows = cell_table(Kernel.ball(2), V, 2.0, [0.5, 1.0, 2.0], [0.0, math.pi / 4], opts, threads=2)
    by_dir = {}
    for r in rows:
        by_dir.setdefault(tuple(np.round(r["nu"], 6)), []).append(r["sigma"])
    for sig in by_dir.values():
        assert sig[0] < sig[1] < sig[2]
    s = [r["sigma"] for r in rows if r["rho"] == 1.0]
    assert (max(s) - min(s)) / max(s) < 0.02


@given(st.floats(min_value=-0.6, max_value=0.6))
def test_half_height_bounded(x1):
    h = float(BeanGeometry().half_height(x1))
    assert 0.10 - 1e-12 <= h <= 0.18 + 1e-12
