"""Desk-scale acceptance checks, one test per criterion, each printing a PASS/FAIL line."""
import itertools
import json
import math
import os
import time

import numpy as np
import pytest

from glcons.cli import run
from glcons.config import BeanConfig
from glcons.continuum import GridField, cell_sigma, f_eps_energy, hard_interface_energy
from glcons.core import Density, Kernel, PointCloud, Potential
from glcons.energy import gl_energy, gl_gradient, gl_infinity_energy, gl_tilde_energy
from glcons.experiments import (bean_seed, bean_summary, converge_summary, converge_table, fan_out,
                                segment_image, two_tone_image)
from glcons.graph import build_graph
from glcons.solver import SolveOptions, minimize
from glcons.transport import WeightedPointSet, ot_distance_p, rate_diagnostic, tlp_distance

V = Potential.quartic()
BALL2 = Kernel.ball(2)
U = WeightedPointSet.uniform
THREADS = min(8, os.cpu_count() or 1)
SLACK = 1e-10


def _monotone(trace) -> bool:
    t = np.asarray(trace)
    return bool(np.all(t[1:] <= t[:-1] + SLACK * np.maximum(1.0, np.abs(t[:-1]))))


# ------------------------------------------------------------------ 1

def test_c01_gradient_matches_central_differences(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    h = 1e-6
    for _ in range(20):
        x = rng.random((50, 2))
        g = build_graph(PointCloud(x), BALL2, 0.3)
        u = rng.uniform(-1, 1, 50)
        for p in (1.5, 2.0, 3.0, 10.0):
            grad = gl_gradient(g, u, p, V)
            fd = np.empty(50)
            for k in range(50):
                e = np.zeros(50)
                e[k] = h
                fd[k] = (gl_energy(g, u + e, p, V).total - gl_energy(g, u - e, p, V).total) / (2 * h)
            worst = max(worst, float(np.max(np.abs(grad - fd)) / np.max(np.abs(fd))))
    dt = time.perf_counter() - t0
    ok = criterion(1, worst <= 1e-6 and dt < 10, f"max rel err {worst:.2e} (<= 1e-6), {dt:.1f}s (< 10s)")
    assert ok


# ------------------------------------------------------------------ 2

def test_c02_exact_values(criterion):
    rng = np.random.default_rng(202)
    x = rng.random((80, 2))
    eps = 0.25
    g = build_graph(PointCloud(x), BALL2, eps)
    errs = []
    for p in (1.0, 2.0, 3.0):
        zero = gl_energy(g, np.zeros(80), p, V).total
        errs.append(abs(zero - V(0.0) / eps) / (V(0.0) / eps))
        assert gl_energy(g, np.ones(80), p, V).total == 0.0
        assert gl_energy(g, -np.ones(80), p, V).total == 0.0
    rho = Density.unit_box(2)
    gf = GridField.from_function(lambda y: np.where(y[:, 0] + 0.4 * y[:, 1] > 0.7, 1.0, -1.0), rho, 40)
    for p in (1.0, 2.0, 3.0):
        s = 0.8
        lhs = f_eps_energy(gf, BALL2, V, 0.15, p, s_eps=s)
        rhs = 2 ** (p - 2) * s * f_eps_energy(gf, BALL2, V, 0.15, 2.0, s_eps=1.0)
        errs.append(abs(lhs - rhs) / abs(rhs))
    worst = max(errs)
    assert criterion(2, worst <= 1e-12, f"max rel err {worst:.1e} (<= 1e-12); constant +-1 energies exactly 0")


# ------------------------------------------------------------------ 3

def _brute(x, y, p, u=None, v=None):
    n = len(x)
    best = math.inf
    for perm in itertools.permutations(range(n)):
        c = sum(np.linalg.norm(x[i] - y[j]) ** p + (0.0 if u is None else abs(u[i] - v[j]) ** p)
                for i, j in enumerate(perm))
        best = min(best, c / n)
    return best ** (1 / p)


def test_c03_transport_oracles(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(303)
    worst = 0.0
    for _ in range(200):
        n = int(rng.integers(1, 6))
        d = int(rng.integers(1, 4))
        p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
        x, y = rng.random((n, d)), rng.random((n, d))
        u, v = rng.uniform(-1, 1, n), rng.uniform(-1, 1, n)
        worst = max(worst, abs(ot_distance_p(U(x), U(y), p)[0] - _brute(x, y, p)))
        worst = max(worst, abs(tlp_distance(u, U(x), v, U(y), p) - _brute(x, y, p, u, v)))
    sort_gap = 0.0
    for _ in range(200):
        n, m = int(rng.integers(1, 9)), int(rng.integers(1, 9))
        a = WeightedPointSet(rng.random(n), rng.dirichlet(np.ones(n)))
        b = WeightedPointSet(rng.random(m), rng.dirichlet(np.ones(m)))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        sort_gap = max(sort_gap, abs(ot_distance_p(a, b, p, "sort")[0] - ot_distance_p(a, b, p, "flow")[0]))
    asym = tri = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 7))
        sets = [(rng.uniform(-1, 1, n), U(rng.random((n, 2)))) for _ in range(3)]
        d = {(i, j): tlp_distance(*sets[i], *sets[j], 1.0) for i in range(3) for j in range(3) if i != j}
        asym = max(asym, abs(d[0, 1] - d[1, 0]))
        tri = max(tri, d[0, 2] - d[0, 1] - d[1, 2])
    dt = time.perf_counter() - t0
    ok = worst <= 1e-9 and sort_gap <= 1e-9 and asym == 0.0 and tri <= 1e-9 and dt < 30
    assert criterion(3, ok, f"brute gap {worst:.1e}, sort gap {sort_gap:.1e}, asym {asym:.1e}, "
                            f"triangle excess {tri:.1e}, {dt:.1f}s (< 30s)")


# ------------------------------------------------------------------ 4

def test_c04_cell_problem(criterion):
    from glcons.continuum import ProfileOptions
    t0 = time.perf_counter()
    notes = []
    ok = True
    for p in (1.0, 1.5, 2.0, 3.0):
        sol = cell_sigma(1.0, [1, 0], BALL2, V, p)
        bound = hard_interface_energy(1.0, BALL2, [1, 0], p)
        good = 1e-6 < sol.sigma <= bound * (1 + 1e-12) and sol.profile.is_monotone()
        ok &= good
        notes.append(f"p={p:g}: {sol.sigma:.4f}/{bound:.4f}")
    angles = np.arange(8) * math.pi / 8
    # tensor-product marginal quadrature, so rotating nu really changes the integration grid
    tensor = ProfileOptions(quad_pts=2000)
    sig = [cell_sigma(1.0, [math.cos(a), math.sin(a)], BALL2, V, 2.0, tensor).sigma for a in angles]
    spread = (max(sig) - min(sig)) / max(sig)
    base = cell_sigma(1.0, [1, 0], BALL2, V, 2.0).sigma
    dbl = cell_sigma(1.0, [1, 0], BALL2, V, 2.0, ProfileOptions(L=20.0, m=800)).sigma
    dl = abs(dbl - base) / base
    dt = time.perf_counter() - t0
    ok = ok and spread < 0.02 and dl < 1e-3 and dt < 60
    assert criterion(4, ok, f"{'; '.join(notes)}; isotropy spread {spread:.1e} (< 2%); "
                            f"L doubling {dl:.1e} (< 0.1%); {dt:.1f}s (< 60s)")


# ------------------------------------------------------------------ 5

def test_c05_consistency(criterion):
    t0 = time.perf_counter()
    rho = Density.unit_box(2)
    plane = ([0.5, 0.5], [1.0, 0.0])
    seeds = list(range(10))
    big = converge_table(rho, plane, [20000], seeds, 4.0, 1.0, BALL2, V, THREADS)
    inside = sum(0.85 <= r.ratio <= 1.15 for r in big)
    pred = big[0].prediction
    rows = converge_table(rho, plane, [1000, 4000, 16000], seeds, 4.0, 1.0, BALL2, V, THREADS)
    med = [s["median_abs_dev"] for s in converge_summary(rows)]
    dt = time.perf_counter() - t0
    ok = abs(pred - 8 / 3) < 1e-9 and inside >= 8 and med[0] > med[1] > med[2] and dt < 300
    assert criterion(5, ok, f"prediction {pred:.6f}; {inside}/10 ratios in [0.85, 1.15] at n=20000; "
                            f"median |ratio-1| {med[0]:.3f} > {med[1]:.3f} > {med[2]:.3f}; {dt:.0f}s (< 300s)")


# ------------------------------------------------------------------ 6

def test_c06_p_infinity_limit(criterion):
    rng = np.random.default_rng(606)
    worst = 0.0
    mono = True
    for _ in range(10):
        x = rng.random((10, 2))
        g = build_graph(PointCloud(x), BALL2, 0.6)
        u = rng.uniform(-1, 1, 10)
        ginf = gl_infinity_energy(g, u, V)
        gaps = [abs(gl_tilde_energy(g, u, p, V) - ginf) for p in (2, 10, 50, 200)]
        mono &= all(b <= a * (1 + 1e-12) for a, b in zip(gaps, gaps[1:]))
        worst = max(worst, gaps[-1] / ginf)
    assert criterion(6, worst <= 0.05 and mono,
                     f"max |tilde(200) - inf| / inf = {worst:.3%} (<= 5%); gap non-increasing in p: {mono}")


# ------------------------------------------------------------------ 7, 9 (bean runs)

@pytest.fixture(scope="module")
def bean_study():
    cfg = BeanConfig()
    geom, k, pot = cfg.geometry(), cfg.kernel.build(2), cfg.potential.build()
    solver = cfg.solver.build(cfg.seed)
    t0 = time.perf_counter()
    res = fan_out(lambda s: bean_seed(s, cfg.n, cfg.eps_c, k, pot, cfg.p_list, cfg.lam, geom, cfg.std,
                                      cfg.seeds_at, cfg.seed_radius, solver, cfg.starts, cfg.start_width),
                  list(range(cfg.n_seeds)), THREADS)
    return res, time.perf_counter() - t0


def test_c07_bean_ordering(criterion, bean_study):
    res, dt = bean_study
    tab = bean_summary(res)
    c2, c100 = tab["2.0"]["median_crossing"], tab["100.0"]["median_crossing"]
    pur = min(tab["2.0"]["min_purity"], tab["100.0"]["min_purity"])
    ok = c2 is not None and c100 is not None and c2 > c100 and pur >= 0.9 and dt < 300
    assert criterion(7, ok, f"median crossing p=2 {c2:.4f} > p=100 {c100:.4f}; min purity {pur:.3f} (>= 0.9); "
                            f"{dt:.0f}s (< 300s)")


# ------------------------------------------------------------------ 8

def test_c08_segmentation(criterion, tmp_path):
    rgb, mask, truth = two_tone_image(64)
    res = segment_image(rgb, mask)
    agree = float(np.mean(res.labels == truth))
    out = tmp_path / "seg"
    assert run(["segment", "--out", str(out)]) == 0
    echo = json.loads((out / "summary.json").read_text())["config"]["tau_color"]
    ok = agree == 1.0 and echo == 5e-4 and res.solve.monotone()
    assert criterion(8, ok, f"agreement with ground truth {agree:.2%}; tau_color echo {echo:g}")


# ------------------------------------------------------------------ 9

def _tree(path):
    return {f: (path / f).read_bytes() for f in sorted(os.listdir(path))}


def test_c09_solver_invariants(criterion, bean_study, tmp_path):
    res, _ = bean_study
    traces_ok = all(run_.monotone for r in res for run_ in r.runs)
    rgb, mask, _ = two_tone_image(64)
    traces_ok &= _monotone(segment_image(rgb, mask).solve.energy_trace)
    rng = np.random.default_rng(909)
    for p in (1.5, 2.0, 3.0):
        g = build_graph(PointCloud(rng.random((300, 2))), BALL2, 0.15)
        r = minimize(g, p, V, None, SolveOptions(max_iters=2000, tol=1e-7, seed=3))
        traces_ok &= _monotone(r.energy_trace)
    cfgs = {
        "minimize": "points:\n  n: 200\neps_c: 2.0\nsolver:\n  dt: 0.5\n  max_iters: 300\n",
        "bean": "n: 200\nn_seeds: 2\nstarts: [0.0]\nsolver:\n  dt: 0.5\n  max_iters: 300\n  tol: 1.0e-6\n",
        "segment": "",
        "converge": "n_list: [500]\nn_seeds: 2\n",
        "cell": "profile:\n  m: 100\n",
        "graph": "points:\n  n: 300\neps_c: 2.0\n",
    }
    identical = True
    for cmd, text in cfgs.items():
        cf = tmp_path / f"{cmd}.yaml"
        cf.write_text(text)
        outs = []
        for tag in ("a", "b"):
            assert run([cmd, "--config", str(cf), "--seed", "11", "--out", str(tmp_path / f"{cmd}_{tag}")]) == 0
            outs.append(_tree(tmp_path / f"{cmd}_{tag}"))
        identical &= outs[0] == outs[1]
    assert criterion(9, traces_ok and identical,
                     f"all energy traces non-increasing: {traces_ok}; reruns byte-identical over "
                     f"{len(cfgs)} commands: {identical}")


# ------------------------------------------------------------------ 10

def test_c10_rate_diagnostic(criterion):
    tab = rate_diagnostic(2, [64, 128, 256, 512], trials=10, seed=10)
    med = np.array([row["median"] for row in tab])
    mx = max(row["max"] for row in tab)
    slope = float(np.polyfit(np.log([row["n"] for row in tab]), med, 1)[0])
    ok = mx <= 10 and slope <= 0
    assert criterion(10, ok, f"max ratio {mx:.2f} (<= 10); medians {np.round(med, 3).tolist()}, "
                             f"trend slope {slope:.3f} (<= 0)")
