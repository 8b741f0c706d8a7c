"""Shared domain types: point clouds, label fields, kernels, potentials, densities.

Everything here is immutable after construction and all evaluations are pure,
vectorised over a leading batch axis.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator


class DimensionError(ValueError):
    pass


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# Point clouds and label fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PointCloud:
    points: np.ndarray
    ids: Optional[tuple] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DimensionError(f"expected an (n, d) array with n, d >= 1, got shape {pts.shape}")
        if self.ids is not None and len(self.ids) != pts.shape[0]:
            raise DimensionError("ids length does not match number of points")
        object.__setattr__(self, "points", _readonly(pts))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.n


@dataclass(frozen=True, eq=False)
class LabelField:
    values: np.ndarray
    cloud: Optional[PointCloud] = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(-1)
        if self.cloud is not None and v.shape[0] != self.cloud.n:
            raise DimensionError(f"label field has {v.shape[0]} values, cloud has {self.cloud.n} points")
        object.__setattr__(self, "values", _readonly(v))

    def __len__(self) -> int:
        return self.values.shape[0]


def read_points_csv(path) -> PointCloud:
    """Read one point per row; a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                if k == 0 or not rows:
                    continue
                raise
    if not rows:
        raise DimensionError(f"{path}: no points")
    if len({len(r) for r in rows}) != 1:
        raise DimensionError(f"{path}: rows have differing numbers of columns")
    return PointCloud(np.array(rows))


def write_points_csv(path, cloud: PointCloud, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow([f"x{k}" for k in range(cloud.dim)])
        for p in cloud.points:
            w.writerow([repr(float(x)) for x in p])


def read_labels_csv(path, cloud: Optional[PointCloud] = None) -> LabelField:
    vals = []
    with open(path, newline="") as fh:
        for k, row in enumerate(csv.reader(fh)):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                vals.append(float(row[0]))
            except ValueError:
                if k == 0 or not vals:
                    continue
                raise
    return LabelField(np.array(vals), cloud)


def write_labels_csv(path, u, header: str = "u", comment: Optional[str] = None) -> None:
    values = u.values if isinstance(u, LabelField) else np.asarray(u, dtype=float)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for v in values:
            fh.write(repr(float(v)) + "\n")


# ---------------------------------------------------------------------------
# Kernels
# ---------------------------------------------------------------------------

KERNEL_SHAPES = ("ball", "gaussian", "box", "ellipsoid", "ring")


@dataclass(frozen=True)
class Kernel:
    """Interaction profile eta on R^d.

    Shapes:
      * ``ball``      indicator of the closed ball of ``radius``
      * ``gaussian``  exp(-|x|^2 / bandwidth^2) truncated at ``cutoff``
      * ``box``       indicator of the centred box with ``half_widths``
      * ``ellipsoid`` indicator of the centred ellipsoid with semi-axes ``half_widths``
      * ``ring``      indicator of inner < |x| <= radius (vanishes at 0; only
                      useful as a negative example for assumption checks)

    ``amplitude`` multiplies every shape; the normalisation of eta is not
    fixed by the model and energies scale linearly in it.
    """

    dim: int
    shape: str = "ball"
    radius: float = 1.0
    bandwidth: float = 1.0
    cutoff: float = 2.0
    half_widths: tuple = ()
    inner: float = 0.0
    amplitude: float = 1.0

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ValueError("kernel amplitude must be positive")
        if self.dim < 1:
            raise DimensionError("kernel dimension must be >= 1")
        if self.shape not in KERNEL_SHAPES:
            raise ValueError(f"unknown kernel shape {self.shape!r}")
        if self.shape in ("box", "ellipsoid"):
            hw = tuple(float(a) for a in self.half_widths)
            if len(hw) != self.dim or min(hw) <= 0:
                raise ValueError("half_widths must give one positive value per dimension")
            object.__setattr__(self, "half_widths", hw)
        if self.shape == "gaussian" and (self.bandwidth <= 0 or self.cutoff <= 0):
            raise ValueError("gaussian kernel needs positive bandwidth and cutoff")
        if self.shape in ("ball", "ring") and self.radius <= 0:
            raise ValueError("radius must be positive")

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0, amplitude: float = 1.0) -> "Kernel":
        return cls(dim, "ball", radius=radius, amplitude=amplitude)

    @classmethod
    def gaussian(cls, dim: int, bandwidth: float = 1.0, cutoff: float = 2.0, amplitude: float = 1.0) -> "Kernel":
        return cls(dim, "gaussian", bandwidth=bandwidth, cutoff=cutoff, amplitude=amplitude)

    @classmethod
    def box(cls, half_widths: Sequence[float]) -> "Kernel":
        return cls(len(half_widths), "box", half_widths=tuple(half_widths))

    @classmethod
    def ellipsoid(cls, semi_axes: Sequence[float]) -> "Kernel":
        return cls(len(semi_axes), "ellipsoid", half_widths=tuple(semi_axes))

    @classmethod
    def ring(cls, dim: int, inner: float, outer: float) -> "Kernel":
        return cls(dim, "ring", radius=outer, inner=inner)

    @property
    def support_radius(self) -> float:
        if self.shape in ("ball", "ring"):
            return float(self.radius)
        if self.shape == "gaussian":
            return float(self.cutoff)
        if self.shape == "box":
            return float(np.linalg.norm(self.half_widths))
        return float(max(self.half_widths))

    @property
    def is_radial(self) -> bool:
        return self.shape in ("ball", "gaussian", "ring")

    def __call__(self, x) -> np.ndarray:
        return eval_kernel(self, x)

    def to_dict(self) -> dict:
        d = {"shape": self.shape, "dim": self.dim}
        if self.shape in ("ball", "ring"):
            d["radius"] = self.radius
        if self.shape == "ring":
            d["inner"] = self.inner
        if self.shape == "gaussian":
            d.update(bandwidth=self.bandwidth, cutoff=self.cutoff)
        if self.shape in ("box", "ellipsoid"):
            d["half_widths"] = list(self.half_widths)
        if self.amplitude != 1.0:
            d["amplitude"] = self.amplitude
        return d


def eval_kernel(k: Kernel, x) -> np.ndarray:
    """Evaluate eta at one point (shape (d,)) or a batch (shape (..., d))."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1:] != (k.dim,):
        raise DimensionError(f"kernel has dimension {k.dim}, got points of shape {x.shape}")
    out = _shape_value(k, x)
    return out if k.amplitude == 1.0 else k.amplitude * out


def _shape_value(k: Kernel, x: np.ndarray) -> np.ndarray:
    if k.shape == "box":
        inside = np.all(np.abs(x) <= np.asarray(k.half_widths), axis=-1)
        return inside.astype(float)
    if k.shape == "ellipsoid":
        r2 = np.sum((x / np.asarray(k.half_widths)) ** 2, axis=-1)
        return (r2 <= 1.0).astype(float)
    r2 = np.sum(x * x, axis=-1)
    if k.shape == "ball":
        return (r2 <= k.radius**2).astype(float)
    if k.shape == "ring":
        return ((r2 <= k.radius**2) & (r2 > k.inner**2)).astype(float)
    out = np.exp(-r2 / k.bandwidth**2)
    return np.where(r2 <= k.cutoff**2, out, 0.0)


# ---------------------------------------------------------------------------
# Potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Potential:
    """Double-well potential V.

    ``quartic`` is (s^2 - 1)^2. ``tabulated`` interpolates the table linearly
    and continues with the boundary slopes outside it; its growth constants
    must be given because they cannot be inferred from finitely many values.
    """

    kind: str = "quartic"
    table_s: tuple = ()
    table_v: tuple = ()
    tau: float = 1.0
    r_v: float = 2.0
    lipschitz: float = 8.0 / (3.0 * math.sqrt(3.0))

    def __post_init__(self):
        if self.kind not in ("quartic", "tabulated"):
            raise ValueError(f"unknown potential kind {self.kind!r}")
        if self.tau <= 0 or self.r_v <= 1:
            raise ValueError("growth constants need tau > 0 and R_V > 1")
        if self.kind == "tabulated":
            s = np.asarray(self.table_s, dtype=float)
            v = np.asarray(self.table_v, dtype=float)
            if s.ndim != 1 or s.shape != v.shape or s.size < 2 or np.any(np.diff(s) <= 0):
                raise ValueError("tabulated potential needs >= 2 strictly increasing abscissae")
            object.__setattr__(self, "table_s", tuple(s))
            object.__setattr__(self, "table_v", tuple(v))

    @classmethod
    def quartic(cls) -> "Potential":
        return cls()

    @classmethod
    def tabulated(cls, s, v, tau: float, r_v: float, lipschitz: Optional[float] = None) -> "Potential":
        s = np.asarray(s, dtype=float)
        v = np.asarray(v, dtype=float)
        if lipschitz is None:
            inside = (s[:-1] >= -1) & (s[1:] <= 1)
            slopes = np.abs(np.diff(v) / np.diff(s))
            lipschitz = float(slopes[inside].max()) if inside.any() else float(slopes.max())
        return cls("tabulated", tuple(s), tuple(v), tau, r_v, lipschitz)

    @property
    def second_derivative_bound(self) -> float:
        """Upper bound of V'' on [-1, 1] (used for step-size estimates)."""
        if self.kind == "quartic":
            return 8.0
        return 0.0

    def __call__(self, s):
        return eval_potential(self, s)

    def deriv(self, s):
        return eval_potential_deriv(self, s)

    def to_dict(self) -> dict:
        if self.kind == "quartic":
            return {"kind": "quartic"}
        return {"kind": "tabulated", "s": list(self.table_s), "v": list(self.table_v),
                "tau": self.tau, "r_v": self.r_v}


def _tab_slopes(V: Potential):
    s = np.asarray(V.table_s)
    v = np.asarray(V.table_v)
    return s, v, np.diff(v) / np.diff(s)


def eval_potential(V: Potential, s):
    s = np.asarray(s, dtype=float)
    if V.kind == "quartic":
        return (s * s - 1.0) ** 2
    ts, tv, sl = _tab_slopes(V)
    out = np.interp(s, ts, tv)
    out = np.where(s < ts[0], tv[0] + sl[0] * (s - ts[0]), out)
    out = np.where(s > ts[-1], tv[-1] + sl[-1] * (s - ts[-1]), out)
    return out


def eval_potential_deriv(V: Potential, s):
    s = np.asarray(s, dtype=float)
    if V.kind == "quartic":
        return 4.0 * s * (s * s - 1.0)
    ts, _, sl = _tab_slopes(V)
    idx = np.clip(np.searchsorted(ts, s, side="right") - 1, 0, sl.size - 1)
    return sl[idx]


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Density:
    """Probability density on a box, optionally restricted to a sub-domain.

    ``form`` is one of ``uniform``, ``gaussian_marginal`` (normal pdf in one
    coordinate, constant in the others) or ``tabulated`` (multilinear
    interpolation of grid values). ``mask`` restricts the support to
    ``mask(x) == True``; the density is renormalised on the restricted domain.
    """

    form: str
    lo: tuple
    hi: tuple
    mean: float = 0.0
    std: float = 1.0
    axis: int = 0
    grid_values: Optional[np.ndarray] = None
    mask: Optional[Callable[[np.ndarray], np.ndarray]] = None
    quad_res: int = 400
    _norm: float = field(default=1.0, init=False, repr=False)
    _c1: float = field(default=1.0, init=False, repr=False)
    _c2: float = field(default=1.0, init=False, repr=False)
    _interp: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        lo = tuple(float(a) for a in self.lo)
        hi = tuple(float(b) for b in self.hi)
        if len(lo) != len(hi) or not lo or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("density box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if self.form not in ("uniform", "gaussian_marginal", "tabulated"):
            raise ValueError(f"unknown density form {self.form!r}")
        if self.form == "gaussian_marginal" and (self.std <= 0 or not 0 <= self.axis < len(lo)):
            raise ValueError("gaussian_marginal needs std > 0 and a valid axis")
        if self.form == "tabulated":
            g = np.asarray(self.grid_values, dtype=float)
            if g.ndim != len(lo) or min(g.shape) < 2 or np.any(g <= 0):
                raise ValueError("tabulated density needs a positive grid with >= 2 nodes per axis")
            axes = [np.linspace(a, b, m) for a, b, m in zip(lo, hi, g.shape)]
            object.__setattr__(self, "_interp", RegularGridInterpolator(axes, g))
            object.__setattr__(self, "grid_values", _readonly(g))
        # normalisation and bounds by midpoint quadrature on the box
        if self.form == "uniform" and self.mask is None:
            vol = float(np.prod(np.subtract(hi, lo)))
            object.__setattr__(self, "_norm", vol)
            object.__setattr__(self, "_c1", 1.0 / vol)
            object.__setattr__(self, "_c2", 1.0 / vol)
            return
        pts, cell = self._quad_nodes(self.quad_res)
        raw = self._raw(pts)
        inside = self.contains(pts)
        z = float(np.sum(raw[inside]) * cell)
        if z <= 0:
            raise ValueError("density has zero mass on its domain")
        object.__setattr__(self, "_norm", z)
        # bounds also need the box faces, where the extremes of a monotone profile sit
        d = len(lo)
        m = max(3, int(round(self.quad_res ** (1.0 / d))) + 1)
        axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
        edge = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        pts = np.concatenate([pts, edge])
        inside = self.contains(pts)
        vals = self._raw(pts)[inside] / z
        object.__setattr__(self, "_c1", float(vals.min()))
        object.__setattr__(self, "_c2", float(vals.max()))

    # -- constructors -------------------------------------------------------
    @classmethod
    def uniform(cls, lo, hi, mask=None) -> "Density":
        return cls("uniform", tuple(lo), tuple(hi), mask=mask)

    @classmethod
    def unit_box(cls, dim: int) -> "Density":
        return cls.uniform([0.0] * dim, [1.0] * dim)

    @classmethod
    def gaussian_marginal(cls, lo, hi, mean=0.0, std=1.0, axis=0, mask=None) -> "Density":
        return cls("gaussian_marginal", tuple(lo), tuple(hi), mean=mean, std=std, axis=axis, mask=mask)

    @classmethod
    def tabulated(cls, lo, hi, grid_values, mask=None) -> "Density":
        return cls("tabulated", tuple(lo), tuple(hi), grid_values=np.asarray(grid_values), mask=mask)

    # -- geometry -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def c1(self) -> float:
        return self._c1

    @property
    def c2(self) -> float:
        return self._c2

    def _quad_nodes(self, res: int):
        d = self.dim
        m = max(8, int(round(res ** (2.0 / d)))) if d > 1 else res * 10
        axes = [a + (np.arange(m) + 0.5) * (b - a) / m for a, b in zip(self.lo, self.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        cell = float(np.prod([(b - a) / m for a, b in zip(self.lo, self.hi)]))
        return pts, cell

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        ok = np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=-1)
        if self.mask is not None:
            ok = ok & np.asarray(self.mask(x), dtype=bool)
        return ok

    def _raw(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.form == "uniform":
            return np.ones(x.shape[:-1])
        if self.form == "gaussian_marginal":
            t = (x[..., self.axis] - self.mean) / self.std
            return np.exp(-0.5 * t * t) / (self.std * math.sqrt(2 * math.pi))
        xc = np.clip(x, self.lo, self.hi)
        return self._interp(xc.reshape(-1, self.dim)).reshape(x.shape[:-1])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise DimensionError(f"density has dimension {self.dim}, got shape {x.shape}")
        return np.where(self.contains(x), self._raw(x) / self._norm, 0.0)

    def total_mass(self, res: int = 400) -> float:
        pts, cell = self._quad_nodes(res)
        return float(np.sum(self(pts)) * cell)

    def box_mass(self, lo, hi, res: int = 24) -> float:
        """Mass of an axis-aligned sub-box (exact for unmasked uniform densities)."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.form == "uniform" and self.mask is None:
            return float(np.prod(hi - lo) / self._norm)
        if self.form == "gaussian_marginal" and self.mask is None:
            other = np.prod(np.delete(hi - lo, self.axis))
            za = (lo[self.axis] - self.mean) / (self.std * math.sqrt(2))
            zb = (hi[self.axis] - self.mean) / (self.std * math.sqrt(2))
            return float(other * 0.5 * (math.erf(zb) - math.erf(za)) / self._norm)
        axes = [a + (np.arange(res) + 0.5) * (b - a) / res for a, b in zip(lo, hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in mesh], axis=-1)
        return float(np.sum(self(pts)) * np.prod((hi - lo) / res))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n iid points by rejection from the bounding box."""
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        if self.form == "uniform" and self.mask is None:
            return lo + (hi - lo) * rng.random((n, self.dim))
        out = []
        need = n
        while need > 0:
            batch = max(64, 2 * need)
            x = lo + (hi - lo) * rng.random((batch, self.dim))
            acc = rng.random(batch) * self._c2 < self(x)
            out.append(x[acc][:need])
            need -= out[-1].shape[0]
        return np.concatenate(out, axis=0)

    def to_dict(self) -> dict:
        d = {"form": self.form, "lo": list(self.lo), "hi": list(self.hi)}
        if self.form == "gaussian_marginal":
            d.update(mean=self.mean, std=self.std, axis=self.axis)
        return d


# ---------------------------------------------------------------------------
# Assumption checks
# ---------------------------------------------------------------------------


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    detail: str = ""
    counterexample: Optional[list] = None

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, "detail": self.detail,
                "counterexample": self.counterexample}


@dataclass
class AssumptionReport:
    checks: list

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failed(self) -> list:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"all_passed": self.all_passed, "checks": [c.to_dict() for c in self.checks]}


def _first(mask: np.ndarray, pts: np.ndarray):
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        return None
    v = pts[idx[0]]
    return np.atleast_1d(v).tolist()


def validate_assumptions(k: Kernel, V: Potential, rho: Optional[Density] = None,
                         n_random: int = 2000, seed: int = 0) -> AssumptionReport:
    """Sample every checkable assumption on kernel, potential and density.

    Grid points plus ``n_random`` seeded random points are used; each failing
    check records its first counterexample.
    """
    rng = np.random.default_rng(seed)
    checks = []
    R = k.support_radius
    d = k.dim

    # kernel samples: grid on [-1.5R, 1.5R]^d plus random points
    m = max(3, int(round(4000 ** (1.0 / d))))
    ax = np.linspace(-1.5 * R, 1.5 * R, m)
    grid = np.stack([g.ravel() for g in np.meshgrid(*([ax] * d), indexing="ij")], axis=-1)
    xs = np.concatenate([grid, rng.uniform(-1.5 * R, 1.5 * R, (n_random, d))])
    ev = eval_kernel(k, xs)
    e0 = float(eval_kernel(k, np.zeros(d)))

    bad = ev < 0
    checks.append(AssumptionCheck(
        "C1", bool(not bad.any() and e0 > 0),
        f"eta(0) = {e0}" + ("" if e0 > 0 else " (must be > 0)"),
        _first(bad, xs) if bad.any() else ([0.0] * d if e0 <= 0 else None)))
    odd = ev != eval_kernel(k, -xs)
    checks.append(AssumptionCheck("C2", bool(not odd.any()), "eta(-x) == eta(x) on samples", _first(odd, xs)))
    outside = (np.linalg.norm(xs, axis=-1) > R) & (ev != 0)
    checks.append(AssumptionCheck("C3", bool(not outside.any()), f"support radius {R}", _first(outside, xs)))
    if k.shape == "ring":
        checks.append(AssumptionCheck("C4", False, "not established for this shape"))
    else:
        checks.append(AssumptionCheck("C4", True, "assumed by construction"))
    # first moment by midpoint quadrature on the support box
    mq = max(8, int(round(40000 ** (1.0 / d))))
    axq = -R + (np.arange(mq) + 0.5) * (2 * R / mq)
    gq = np.stack([g.ravel() for g in np.meshgrid(*([axq] * d), indexing="ij")], axis=-1)
    moment = float(np.sum(eval_kernel(k, gq) * np.linalg.norm(gq, axis=-1)) * (2 * R / mq) ** d)
    checks.append(AssumptionCheck("moment", bool(np.isfinite(moment)), f"int eta(x)|x| dx ~ {moment:.6g}"))

    # potential samples
    s = np.concatenate([np.linspace(-3 * V.r_v, 3 * V.r_v, 2001), rng.uniform(-3 * V.r_v, 3 * V.r_v, n_random)])
    vs = eval_potential(V, s)
    checks.append(AssumptionCheck("B1", bool(np.all(np.isfinite(vs))),
                                  "continuous by construction (quartic / piecewise linear)"))
    wells = eval_potential(V, np.array([-1.0, 1.0]))
    off = ~np.isclose(np.abs(s), 1.0, rtol=0, atol=1e-12)
    bad = (vs < 0) | (off & (vs <= 0))
    if np.any(wells != 0):
        ce = [-1.0] if wells[0] != 0 else [1.0]
    else:
        ce = _first(bad, s)
    checks.append(AssumptionCheck("B2", bool(np.all(wells == 0) and not bad.any()),
                                  f"V(-1), V(1) = {wells.tolist()}", ce))
    big = np.abs(s) >= V.r_v
    bad = big & (vs < V.tau * np.abs(s))
    checks.append(AssumptionCheck("B3", bool(not bad.any()), f"tau={V.tau}, R_V={V.r_v}", _first(bad, s)))
    a = rng.uniform(-1, 1, n_random)
    b = rng.uniform(-1, 1, n_random)
    lhs = np.abs(eval_potential(V, a) - eval_potential(V, b))
    bad = lhs > V.lipschitz * np.abs(a - b) * (1 + 1e-12) + 1e-15
    checks.append(AssumptionCheck("B4", bool(not bad.any()), f"L_V={V.lipschitz:.6g}",
                                  None if not bad.any() else [float(a[bad][0]), float(b[bad][0])]))

    if rho is not None:
        lo = np.asarray(rho.lo)
        hi = np.asarray(rho.hi)
        xs = lo + (hi - lo) * rng.random((n_random, rho.dim))
        xs = xs[rho.contains(xs)]
        vals = rho(xs)
        bad = (vals < rho.c1 * (1 - 1e-9)) | (vals > rho.c2 * (1 + 1e-9)) | (vals <= 0)
        checks.append(AssumptionCheck("A1", bool(not bad.any() and rho.c1 > 0),
                                      f"c1={rho.c1:.6g}, c2={rho.c2:.6g}", _first(bad, xs)))
        mass = rho.total_mass()
        checks.append(AssumptionCheck("mass", bool(abs(mass - 1) < 1e-2), f"total mass {mass:.6g}"))
    return AssumptionReport(checks)
