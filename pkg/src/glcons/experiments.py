"""Experiment drivers: bean partitioning, scribble segmentation, fixed-interface
convergence and cell-problem tables. The CLI wires configs to these."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .continuum import ConsistencyResult, ProfileOptions, cell_sigma, hard_interface_consistency
from .core import Density, Kernel, PointCloud, Potential
from .energy import FidelitySpec, build_pixel_graph, segmentation_fidelity, segmentation_objective
from .graph import SparseGraph, build_graph
from .solver import SolveOptions, SolveResult, minimize, phase_purity, threshold


def eps_rule(n: int, d: int, c: float) -> float:
    """eps = c (log n / n)^(1/d); n = 1 falls back to c."""
    if n < 2:
        return float(c)
    return float(c) * (math.log(n) / n) ** (1.0 / d)


def fan_out(fn: Callable, items: Sequence, threads: int = 1) -> list:
    """Map ``fn`` over ``items`` (optionally on a thread pool); results keep item order."""
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


# ------------------------------------------------------------------ bean

@dataclass(frozen=True)
class BeanGeometry:
    """Capsule [-a, a] x [-r, r] with semicircular caps of radius r, pinched by a waist.

    The half-height of the straight part is r - (r - w0) exp(-x1^2 / (2 s^2)),
    so it equals ``waist_halfwidth`` (w0) at x1 = 0 and relaxes to r over a
    length scale ``waist_width`` (s).
    """

    half_length: float = 0.45
    radius: float = 0.18
    waist_halfwidth: float = 0.10
    waist_width: float = 0.16

    def __post_init__(self):
        if not 0 < self.waist_halfwidth <= self.radius:
            raise ValueError("waist_halfwidth must lie in (0, radius]")
        if self.half_length <= 0 or self.waist_width <= 0:
            raise ValueError("bean lengths must be positive")

    def half_height(self, x1) -> np.ndarray:
        x1 = np.asarray(x1, dtype=float)
        pinch = (self.radius - self.waist_halfwidth) * np.exp(-x1 ** 2 / (2 * self.waist_width ** 2))
        return self.radius - pinch

    def contains(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        x1, x2 = x[:, 0], x[:, 1]
        core = (np.abs(x1) <= self.half_length) & (np.abs(x2) <= self.half_height(x1))
        a, r = self.half_length, self.radius
        caps = ((x1 - a) ** 2 + x2 ** 2 <= r * r) | ((x1 + a) ** 2 + x2 ** 2 <= r * r)
        return core | caps

    @property
    def box(self):
        a, r = self.half_length + self.radius, self.radius
        return (-a, -r), (a, r)


def bean_density(geom: BeanGeometry, std: float = 0.25) -> Density:
    """rho proportional to the N(0, std^2) pdf in x1, restricted to the bean."""
    lo, hi = geom.box
    return Density.gaussian_marginal(lo, hi, mean=0.0, std=std, axis=0, mask=geom.contains)


def crossing_statistic(points: np.ndarray, g: SparseGraph, u) -> Optional[float]:
    """|mean x1 of the midpoints of edges whose endpoints threshold to different signs|; None if there are none."""
    s = threshold(u)
    i, j, _ = g.edges()
    cut = s[i] != s[j]
    if not np.any(cut):
        return None
    mid = 0.5 * (points[i[cut], 0] + points[j[cut], 0])
    return float(abs(mid.mean()))


@dataclass
class BeanRun:
    p: float
    energy: float
    crossing: Optional[float]
    purity: float
    converged: bool
    monotone: bool
    iterations: int
    start: Optional[float]
    u: np.ndarray = field(repr=False)

    def summary(self) -> dict:
        return {"p": self.p, "energy": self.energy, "crossing": self.crossing, "purity": self.purity,
                "converged": self.converged, "monotone": self.monotone, "iterations": self.iterations,
                "start": self.start}


@dataclass
class BeanSeedResult:
    seed: int
    eps: float
    points: np.ndarray = field(repr=False)
    runs: list = field(default_factory=list)


def bean_seed(seed: int, n: int, eps_c: float, kernel: Kernel, V: Potential, p_list: Sequence[float],
              lam: float, geom: BeanGeometry, std: float, seeds_at: float, seed_radius: float,
              solver: SolveOptions, starts: Optional[Sequence[float]] = None, start_width: float = 2.0,
              init: str = "starts") -> BeanSeedResult:
    """One bean sample; each p is minimised from every planar start and the lowest energy is kept.

    A start at x1 = a initialises u = tanh((x1 - a) / (start_width * eps)).
    ``init="constant"`` starts once from u = 1 and ``init="random"`` once from
    the solver's random field.
    """
    rho = bean_density(geom, std)
    x = rho.sample(n, np.random.default_rng(np.uint64(seed)))
    eps = eps_rule(n, 2, eps_c)
    g = build_graph(PointCloud(x), kernel, eps)
    fid = None
    if lam > 0:
        regions = [((-seeds_at, 0.0), seed_radius, -1.0), ((seeds_at, 0.0), seed_radius, 1.0)]
        fid = FidelitySpec.from_regions(x, regions, weight=lam, q=2.0)
    out = BeanSeedResult(int(seed), eps, x)
    for p in p_list:
        best: Optional[BeanRun] = None
        for a in (starts if init == "starts" else [None]):
            if init == "constant":
                opts = _with_init(solver, np.ones(n))
            elif a is None:
                opts = solver
            else:
                opts = _with_init(solver, np.tanh((x[:, 0] - a) / (start_width * eps)))
            res = minimize(g, p, V, fid, opts)
            run = BeanRun(float(p), res.final_energy, crossing_statistic(x, g, res.u), phase_purity(res.u),
                          res.converged, res.monotone(), res.iterations, a, res.u)
            if best is None or run.energy < best.energy:
                best = run
        out.runs.append(best)
    return out


def _with_init(opts: SolveOptions, field_values: np.ndarray) -> SolveOptions:
    return SolveOptions(dt=opts.dt, max_iters=opts.max_iters, tol=opts.tol, splitting=opts.splitting,
                        clamp=opts.clamp, seed=opts.seed, init="field", init_field=field_values,
                        backtrack=opts.backtrack, max_halvings=opts.max_halvings)


def bean_summary(results: Sequence[BeanSeedResult]) -> dict:
    """Per-p median crossing and minimum purity across seeds."""
    by_p: dict = {}
    for r in results:
        for run in r.runs:
            by_p.setdefault(run.p, []).append(run)
    table = {}
    for p, runs in by_p.items():
        cr = [r.crossing for r in runs if r.crossing is not None]
        table[str(p)] = {"median_crossing": float(np.median(cr)) if cr else None,
                         "min_purity": float(min(r.purity for r in runs)),
                         "all_monotone": bool(all(r.monotone for r in runs)),
                         "crossings": [r.crossing for r in runs]}
    return table


# ------------------------------------------------------------ segmentation

@dataclass
class SegmentResult:
    labels: np.ndarray
    objective: float
    purity: float
    agreement: float
    solve: SolveResult = field(repr=False)

    def summary(self) -> dict:
        return {"objective": self.objective, "purity": self.purity, "labeled_agreement": self.agreement,
                "converged": self.solve.converged, "iters": self.solve.iterations,
                "monotone": self.solve.monotone()}


def segment_image(rgb: np.ndarray, mask: np.ndarray, p: float = 2.0, lam: float = 100.0,
                  tau_color: float = 5e-4, eps: Optional[float] = None, V: Optional[Potential] = None,
                  solver: Optional[SolveOptions] = None) -> SegmentResult:
    """Minimise (lam/2) sum_I |f - u|^2 + G_n(u) on the colour-weighted pixel graph, then threshold.

    The flow starts from the mask (scribbles at +-1, everything else 0).
    """
    mask = np.asarray(mask)
    if mask.shape != rgb.shape[:2]:
        raise ValueError("mask and image sizes differ")
    flat = mask.reshape(-1)
    if not (np.any(flat > 0) and np.any(flat < 0)):
        raise ValueError("mask must contain both classes")
    V = V or Potential.quartic()
    g = build_pixel_graph(rgb, tau_color, eps)
    n = g.n
    idx = np.flatnonzero(flat != 0)
    f = np.sign(flat[idx]).astype(float)
    fid = segmentation_fidelity(n, idx, f, lam)
    base = solver or SolveOptions()
    opts = _with_init(base, np.sign(flat).astype(float))
    res = minimize(g, p, V, fid, opts)
    lab = threshold(res.u)
    obj = segmentation_objective(g, res.u, p, V, idx, f, lam)
    agree = float(np.mean(lab[idx] == f))
    return SegmentResult(lab.reshape(mask.shape), obj, phase_purity(res.u), agree, res)


def two_tone_image(size: int = 64):
    """Left half black, right half white; one 3x3 scribble in each half. Returns (rgb, mask, truth)."""
    rgb = np.zeros((size, size, 3))
    rgb[:, size // 2:, :] = 1.0
    truth = np.where(np.arange(size)[None, :] >= size // 2, 1, -1) * np.ones((size, 1), dtype=int)
    mask = np.zeros((size, size), dtype=np.int8)
    c = size // 2
    mask[c - 1:c + 2, size // 4 - 1:size // 4 + 2] = -1
    mask[c - 1:c + 2, 3 * size // 4 - 1:3 * size // 4 + 2] = 1
    return rgb, mask, truth


# ------------------------------------------------------------ convergence

def converge_table(rho: Density, plane, n_list: Sequence[int], seeds: Sequence[int], eps_c: float, p: float,
                   k: Kernel, V: Potential, threads: int = 1) -> list:
    """hard_interface_consistency over n and seeds, eps(n) = eps_c (log n / n)^(1/d)."""
    jobs = [(n, s) for n in n_list for s in seeds]

    def one(job) -> ConsistencyResult:
        n, s = job
        return hard_interface_consistency(rho, plane, n, eps_rule(n, rho.dim, eps_c), p, k, V, seed=s)

    return fan_out(one, jobs, threads)


def converge_summary(rows: Sequence[ConsistencyResult]) -> list:
    out = []
    for n in sorted({r.n for r in rows}):
        rs = [r.ratio for r in rows if r.n == n and r.ratio is not None]
        out.append({"n": n, "median_ratio": float(np.median(rs)) if rs else None,
                    "median_abs_dev": float(np.median(np.abs(np.asarray(rs) - 1))) if rs else None})
    return out


# ------------------------------------------------------------ cell tables

def direction_vectors(dim: int, directions) -> list:
    """Angles (d = 2, radians) or explicit vectors, normalised."""
    if directions is None or len(directions) == 0:
        raise ValueError("direction list is empty")
    out = []
    for d in directions:
        if np.isscalar(d):
            if dim != 2:
                raise ValueError("angles are only meaningful in d = 2")
            out.append(np.array([math.cos(d), math.sin(d)]))
        else:
            v = np.asarray(d, dtype=float)
            if v.size != dim:
                raise ValueError(f"direction {d} does not have dimension {dim}")
            out.append(v / np.linalg.norm(v))
    return out


def cell_table(k: Kernel, V: Potential, p: float, rho_values: Sequence[float], directions,
               opts: Optional[ProfileOptions] = None, threads: int = 1) -> list:
    """Rows (rho, nu, sigma, converged) over the grid rho_values x directions."""
    if len(rho_values) == 0:
        raise ValueError("rho list is empty")
    nus = direction_vectors(k.dim, directions)
    jobs = [(float(r), nu) for r in rho_values for nu in nus]

    def one(job):
        r, nu = job
        sol = cell_sigma(r, nu, k, V, p, opts)
        return {"rho": r, "nu": nu.tolist(), "sigma": sol.sigma, "converged": sol.converged}

    return fan_out(one, jobs, threads)
