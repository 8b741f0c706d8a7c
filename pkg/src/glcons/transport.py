"""Exact discrete optimal transport: Wasserstein-p, bottleneck (p = infinity), TL^p,
transport maps from a density to samples and the stagnation-rate diagnostic."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linear_sum_assignment, linprog
from scipy.sparse.csgraph import maximum_bipartite_matching, maximum_flow

from .core import DimensionError, Density, LabelField, PointCloud

EXACT_BUDGET = 4000
INF_BUDGET = 2000


class BudgetError(ValueError):
    """Instance is larger than the exact solvers are allowed to handle."""


@dataclass(frozen=True, eq=False)
class WeightedPointSet:
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        m = np.asarray(self.masses, dtype=float).reshape(-1)
        if x.shape[0] != m.shape[0] or x.shape[0] == 0:
            raise DimensionError("points and masses must be nonempty and aligned")
        if np.any(m < 0) or abs(m.sum() - 1.0) > 1e-12:
            raise ValueError("masses must be nonnegative and sum to 1")
        object.__setattr__(self, "points", x)
        object.__setattr__(self, "masses", m)

    @classmethod
    def uniform(cls, points) -> "WeightedPointSet":
        x = np.asarray(points, dtype=float)
        n = x.shape[0]
        return cls(x, np.full(n, 1.0 / n))

    @classmethod
    def empirical(cls, cloud: PointCloud) -> "WeightedPointSet":
        return cls.uniform(cloud.points)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def is_uniform(self) -> bool:
        return bool(np.all(self.masses == self.masses[0]))


@dataclass
class TransportPlan:
    """Sparse coupling: pi[rows[k], cols[k]] = mass[k]."""

    rows: np.ndarray
    cols: np.ndarray
    mass: np.ndarray
    shape: tuple
    cost: float

    def dense(self) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.cols), self.mass)
        return out

    def marginals(self):
        a = np.bincount(self.rows, weights=self.mass, minlength=self.shape[0])
        b = np.bincount(self.cols, weights=self.mass, minlength=self.shape[1])
        return a, b

    def check(self, a: WeightedPointSet, b: WeightedPointSet, tol: float = 1e-9) -> bool:
        ra, rb = self.marginals()
        return bool(np.all(self.mass >= -tol) and np.allclose(ra, a.masses, atol=tol, rtol=0)
                    and np.allclose(rb, b.masses, atol=tol, rtol=0))

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        with open(path, "w") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            fh.write("a,b,mass\n")
            for i, j, m in zip(self.rows.tolist(), self.cols.tolist(), self.mass.tolist()):
                fh.write(f"{i},{j},{m!r}\n")


def _check_pair(a: WeightedPointSet, b: WeightedPointSet, budget: int = EXACT_BUDGET) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if a.n + b.n > budget:
        raise BudgetError(f"combined support {a.n + b.n} exceeds exact-solver budget {budget}")


def _pairwise(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum((x[:, None, :] - y[None, :, :]) ** 2, axis=-1))


def _solve_cost(C: np.ndarray, a: np.ndarray, b: np.ndarray, method: str):
    """Minimise <C, pi> over couplings of a and b. Returns (value, rows, cols, mass)."""
    n, m = C.shape
    if method == "assignment":
        if n != m or not (np.all(a == a[0]) and np.all(b == b[0])):
            raise ValueError("assignment solver needs uniform measures of equal size")
        r, c = linear_sum_assignment(C)
        mass = np.full(n, 1.0 / n)
        return math.fsum((C[r, c] / n).tolist()), r, c, mass
    if method == "flow":
        # transportation LP (min-cost flow on the complete bipartite graph)
        A_rows = sp.kron(sp.identity(n), np.ones((1, m)))
        A_cols = sp.kron(np.ones((1, n)), sp.identity(m))
        A = sp.vstack([A_rows, A_cols]).tocsr()
        res = linprog(C.ravel(), A_eq=A, b_eq=np.concatenate([a, b]), bounds=(0, None), method="highs")
        if res.status != 0:
            raise RuntimeError(f"transport LP failed: {res.message}")
        x = res.x.reshape(n, m)
        r, c = np.nonzero(x > 1e-15)
        return float(res.fun), r, c, x[r, c]
    raise ValueError(f"unknown method {method!r}")


def _solve_sorted_1d(x: np.ndarray, y: np.ndarray, a: np.ndarray, b: np.ndarray, p: float):
    """Monotone (north-west corner) coupling on sorted supports; optimal for convex costs in 1D."""
    ia = np.argsort(x, kind="stable")
    ib = np.argsort(y, kind="stable")
    ma = a[ia].astype(float).copy()
    mb = b[ib].astype(float).copy()
    rows, cols, mass = [], [], []
    i = j = 0
    while i < ma.size and j < mb.size:
        t = min(ma[i], mb[j])
        if t > 0:
            rows.append(ia[i])
            cols.append(ib[j])
            mass.append(t)
        ma[i] -= t
        mb[j] -= t
        # advance the side that is exhausted (ties: both)
        ea = ma[i] <= 1e-15
        eb = mb[j] <= 1e-15
        if ea:
            i += 1
        if eb:
            j += 1
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    mass = np.asarray(mass)
    val = math.fsum((mass * np.abs(x[rows] - y[cols]) ** p).tolist())
    return val, rows, cols, mass


def ot_distance_p(a: WeightedPointSet, b: WeightedPointSet, p: float = 2.0, method: str = "auto",
                  budget: int = EXACT_BUDGET):
    """Exact Wasserstein-p distance and an optimal plan.

    ``method``: ``assignment`` (uniform, equal sizes), ``flow`` (transport LP),
    ``sort`` (d = 1) or ``auto``.
    """
    if not p >= 1:
        raise ValueError("p must be >= 1")
    _check_pair(a, b, budget)
    if method == "auto":
        if a.dim == 1:
            method = "sort"
        elif a.n == b.n and a.is_uniform and b.is_uniform:
            method = "assignment"
        else:
            method = "flow"
    if method == "sort":
        if a.dim != 1:
            raise DimensionError("sort solver is one-dimensional")
        val, r, c, m = _solve_sorted_1d(a.points[:, 0], b.points[:, 0], a.masses, b.masses, p)
    else:
        C = _pairwise(a.points, b.points) ** p
        val, r, c, m = _solve_cost(C, a.masses, b.masses, method)
    val = max(val, 0.0)
    return val ** (1.0 / p), TransportPlan(r, c, m, (a.n, b.n), val)


def ot_distance_inf(a: WeightedPointSet, b: WeightedPointSet, budget: int = INF_BUDGET) -> float:
    """Bottleneck matching value min_sigma max_i |x_i - y_sigma(i)| for uniform sets of equal size."""
    if a.dim != b.dim:
        raise DimensionError("dimension mismatch")
    if a.n != b.n or not (a.is_uniform and b.is_uniform):
        raise ValueError("dist_inf is implemented for uniform sets of equal size")
    if a.n > budget:
        raise BudgetError(f"n={a.n} exceeds bottleneck budget {budget}")
    D = _pairwise(a.points, b.points)
    cand = np.unique(D)
    n = a.n

    def feasible(t):
        M = sp.csr_matrix(D <= t)
        match = maximum_bipartite_matching(M, perm_type="column")
        return bool(np.all(match >= 0)) and match.size == n

    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(cand[mid]):
            hi = mid
        else:
            lo = mid + 1
    return float(cand[lo])


def tlp_distance(u, mu: WeightedPointSet, v, nu: WeightedPointSet, p: float = 1.0, method: str = "auto",
                 budget: int = EXACT_BUDGET) -> float:
    """TL^p distance: optimal coupling for the cost |x - y|^p + |u(x) - v(y)|^p, p-th root."""
    if not p >= 1:
        raise ValueError("p must be >= 1")
    _check_pair(mu, nu, budget)
    uu = u.values if isinstance(u, LabelField) else np.asarray(u, float).reshape(-1)
    vv = v.values if isinstance(v, LabelField) else np.asarray(v, float).reshape(-1)
    if uu.size != mu.n or vv.size != nu.n:
        raise DimensionError("label fields must match their measures")
    C = _pairwise(mu.points, nu.points) ** p + np.abs(uu[:, None] - vv[None, :]) ** p
    if method == "auto":
        method = "assignment" if (mu.n == nu.n and mu.is_uniform and nu.is_uniform) else "flow"
    val, *_ = _solve_cost(C, mu.masses, nu.masses, method)
    return max(val, 0.0) ** (1.0 / p)


# ---------------------------------------------------------------------------
# Transport maps from a density to samples
# ---------------------------------------------------------------------------


@dataclass
class CellMap:
    """Piecewise-constant map T sending each equal-mass box cell to one sample."""

    lo: np.ndarray          # (N, d) cell lower corners
    hi: np.ndarray          # (N, d) cell upper corners
    mass: np.ndarray        # (N,)
    target: np.ndarray      # (N,) sample index per cell
    samples: np.ndarray     # (n, d)

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def cell_diameter(self) -> float:
        return float(np.max(np.linalg.norm(self.hi - self.lo, axis=1)))

    def __call__(self, x) -> np.ndarray:
        """Image of points x (each located by the cell containing it)."""
        x = np.atleast_2d(np.asarray(x, float))
        inside = np.all((x[:, None, :] >= self.lo[None]) & (x[:, None, :] <= self.hi[None]), axis=-1)
        cell = np.argmax(inside, axis=1)
        return self.samples[self.target[cell]]

    def sup_displacement(self) -> float:
        """max over cells of |centre - T(centre)| plus the cell diameter (covers every point of a cell)."""
        d = np.linalg.norm(self.centers - self.samples[self.target], axis=1)
        return float(d.max() + self.cell_diameter)

    def pushforward_sum(self, phi) -> float:
        vals = np.asarray(phi(self.samples[self.target]), float)
        return math.fsum((self.mass * vals).tolist())


def equal_mass_cells(rho: Density, count: int):
    """Split rho's box into ``count`` boxes of equal mass by recursive bisection."""
    if rho.mask is not None:
        raise ValueError("equal-mass cells need a density on its full box")
    lo0 = np.asarray(rho.lo, float)
    hi0 = np.asarray(rho.hi, float)
    out_lo, out_hi = [], []

    def split(lo, hi, k):
        if k == 1:
            out_lo.append(lo)
            out_hi.append(hi)
            return
        k1 = k // 2
        axis = int(np.argmax(hi - lo))
        frac = k1 / k
        total = rho.box_mass(lo, hi)
        if rho.form == "uniform":
            cut = lo[axis] + frac * (hi[axis] - lo[axis])
        else:
            def f(t):
                h = hi.copy()
                h[axis] = t
                return rho.box_mass(lo, h) - frac * total
            from scipy.optimize import brentq
            cut = brentq(f, lo[axis], hi[axis], xtol=1e-13)
        h1 = hi.copy()
        h1[axis] = cut
        l2 = lo.copy()
        l2[axis] = cut
        split(lo, h1, k1)
        split(l2, hi, k - k1)

    split(lo0, hi0, int(count))
    return np.array(out_lo), np.array(out_hi)


def _bottleneck_capacitated(C: np.ndarray, cap: int) -> np.ndarray:
    """Assign each row to a column (each column takes exactly ``cap`` rows) minimising the max cost."""
    N, n = C.shape

    src, sink = N + n, N + n + 1
    base_r = np.concatenate([np.full(N, src), N + np.arange(n)])
    base_c = np.concatenate([np.arange(N), np.full(n, sink)])
    base_w = np.concatenate([np.ones(N, dtype=np.int32), np.full(n, cap, dtype=np.int32)])

    def match(t):
        # unit-capacity rows, capacity-cap columns: a full flow is a feasible assignment
        r, c = np.nonzero(C <= t)
        G = sp.csr_matrix((np.concatenate([base_w, np.ones(r.size, dtype=np.int32)]),
                           (np.concatenate([base_r, r]), np.concatenate([base_c, N + c]))),
                          shape=(N + n + 2, N + n + 2))
        res = maximum_flow(G, src, sink, method="dinic")
        if res.flow_value < N:
            return None
        F = res.flow.tocsr()[:N, N:N + n].tocoo()
        out = np.empty(N, dtype=np.int64)
        sel = F.data > 0
        out[F.row[sel]] = F.col[sel]
        return out

    # bracket the optimum geometrically, then bisect over the attained costs
    lower = float(C.min(axis=1).max())
    upper = lower
    best = match(upper)
    while best is None:
        lower, upper = upper, upper * 1.25 + 1e-12
        best = match(upper)
    cand = np.unique(C[(C >= lower) & (C <= upper)])
    lo, hi = 0, cand.size - 1
    while lo < hi:
        mid = (lo + hi) // 2
        m = match(cand[mid])
        if m is not None:
            hi, best = mid, m
        else:
            lo = mid + 1
    return match(cand[lo])


def transport_map_to_samples(rho: Density, cloud, m_per: int = 16, budget: int = EXACT_BUDGET,
                             objective: str = "sum") -> CellMap:
    """Discretise rho into n * m_per equal-mass cells and assign m_per cells to each sample.

    ``objective="sum"`` minimises the total distance |cell centre - sample|;
    ``"bottleneck"`` minimises the largest one.
    """
    x = cloud.points if isinstance(cloud, PointCloud) else np.asarray(cloud, float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if x.shape[1] != rho.dim:
        raise DimensionError("cloud and density dimensions differ")
    N = n * int(m_per)
    if N > budget:
        raise BudgetError(f"n * m_per = {N} exceeds exact-solver budget {budget}")
    lo, hi = equal_mass_cells(rho, N)
    mass = np.full(N, 1.0 / N)
    centers = 0.5 * (lo + hi)
    if n == 1:
        target = np.zeros(N, dtype=np.int64)
    else:
        C = _pairwise(centers, x)
        if objective == "sum":
            r, c = linear_sum_assignment(np.repeat(C, m_per, axis=1))
            target = np.empty(N, dtype=np.int64)
            target[r] = c // m_per
        elif objective == "bottleneck":
            target = _bottleneck_capacitated(C, int(m_per)).astype(np.int64)
        else:
            raise ValueError(f"unknown objective {objective!r}")
    return CellMap(lo, hi, mass, target, x)


def delta_n(n: int, d: int) -> float:
    """Stagnation rate of optimal maps to iid samples (up to a constant)."""
    if d == 1:
        return math.sqrt(math.log(math.log(n)) / n)
    if d == 2:
        return math.log(n) ** 0.75 / math.sqrt(n)
    return (math.log(n) / n) ** (1.0 / d)


def rate_diagnostic(d: int, n_list: Sequence[int], trials: int, seed: int = 0, m_per: int = 4,
                    objective: str = "bottleneck", budget: int = EXACT_BUDGET) -> list:
    """Table of ||T_n - Id||_inf / delta_n for uniform samples on the unit box.

    Each n uses min(m_per, budget // n) cells per sample, so the cell-diameter
    slack shrinks at the same order as the sample spacing.
    """
    rho = Density.unit_box(d)
    rng = np.random.default_rng(seed)
    table = []
    for n in n_list:
        m = min(int(m_per), budget // n)
        if m < 1:
            raise BudgetError(f"n={n} exceeds budget {budget}")
        ratios = []
        for _ in range(trials):
            x = rng.random((n, d))
            T = transport_map_to_samples(rho, x, m, budget, objective=objective)
            ratios.append(T.sup_displacement() / delta_n(n, d))
        r = np.asarray(ratios)
        table.append({"n": int(n), "delta_n": delta_n(n, d), "m_per": m, "ratios": r.tolist(),
                      "mean": float(r.mean()), "median": float(np.median(r)), "max": float(r.max())})
    return table
