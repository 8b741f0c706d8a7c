"""Continuum objects: the nonlocal functional F_eps on grids, marginal kernels,
the 1D cell problem for the surface tension sigma, the local limit energy on
polyhedral interfaces, and the fixed-interface consistency experiment."""
from __future__ import annotations

import csv
import math
import threading
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .core import DimensionError, Density, Kernel, Potential, PointCloud, eval_kernel, eval_potential
from .energy import gl_energy
from .graph import build_graph


def _unit(nu, dim: Optional[int] = None, tol: float = 1e-9) -> np.ndarray:
    v = np.atleast_1d(np.asarray(nu, dtype=float))
    if dim is not None and v.size != dim:
        raise DimensionError(f"direction has dimension {v.size}, expected {dim}")
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"direction must be a unit vector (|nu| = {np.linalg.norm(v):.6g})")
    return v / np.linalg.norm(v)


# ---------------------------------------------------------------- grid fields

@dataclass(frozen=True, eq=False)
class GridField:
    """Cell-centred samples of u and rho on an axis-aligned box.

    ``values`` and ``rho`` have shape ``res`` (one entry per cell); the node
    of cell ``idx`` sits at ``lo + (idx + 1/2) * h``.
    """

    lo: tuple
    hi: tuple
    values: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        lo = tuple(float(a) for a in self.lo)
        hi = tuple(float(b) for b in self.hi)
        u = np.asarray(self.values, dtype=float)
        r = np.asarray(self.rho, dtype=float)
        if len(lo) != len(hi) or u.ndim != len(lo):
            raise DimensionError("grid values must have one axis per box dimension")
        if any(b <= a for a, b in zip(lo, hi)):
            raise ValueError("grid box needs lo < hi")
        if min(u.shape) < 2:
            raise ValueError("grid resolution must be >= 2 per axis")
        if r.shape != u.shape:
            raise ValueError("rho must live on the same grid as u")
        if np.any(r <= 0):
            raise ValueError("rho must be positive on the grid")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "values", u)
        object.__setattr__(self, "rho", r)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def res(self) -> tuple:
        return self.values.shape

    @property
    def spacing(self) -> np.ndarray:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / np.asarray(self.res)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def nodes(self) -> np.ndarray:
        axes = [a + (np.arange(m) + 0.5) * h for a, m, h in zip(self.lo, self.res, self.spacing)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    @classmethod
    def from_function(cls, f, rho: Density, res) -> "GridField":
        """Sample ``f(points)`` and ``rho`` on a grid covering rho's box."""
        d = rho.dim
        res = (int(res),) * d if np.isscalar(res) else tuple(int(r) for r in res)
        lo, hi = rho.lo, rho.hi
        axes = [a + (np.arange(m) + 0.5) * (b - a) / m for a, b, m in zip(lo, hi, res)]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        u = np.asarray(f(pts), dtype=float).reshape(res)
        r = np.asarray(rho(pts), dtype=float).reshape(res)
        return cls(lo, hi, u, r)


def _stencil(k: Kernel, eps: float, h: np.ndarray):
    """Integer offsets o with |o h| <= eps R and their weights eps^-d eta(o h / eps)."""
    d = h.size
    reach = np.floor(eps * k.support_radius / h + 1e-12).astype(int)
    axes = [np.arange(-r, r + 1) for r in reach]
    offs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    w = eps ** (-d) * eval_kernel(k, offs * h / eps)
    keep = w > 0
    return offs[keep], w[keep]


def f_eps_energy(gf: GridField, k: Kernel, V: Potential, eps: float, p: float, s_eps: float = 1.0) -> float:
    """Midpoint rule for (s/eps) iint eta_eps(x-z)|u(x)-u(z)|^p rho rho + (1/eps) int V(u) rho over the box."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    if k.dim != gf.dim:
        raise DimensionError("kernel and grid dimensions differ")
    extent = np.asarray(gf.hi) - np.asarray(gf.lo)
    if eps * k.support_radius > extent.min():
        raise ValueError("kernel stencil eps * R_eta exceeds the grid domain")
    h = gf.spacing
    u, r = gf.values, gf.rho
    offs, w = _stencil(k, eps, h)
    vol = gf.cell_volume
    pair = 0.0
    for o, wo in zip(offs, w):
        if not np.any(o):
            continue
        a = tuple(slice(max(0, -c), n - max(0, c)) for c, n in zip(o, u.shape))
        b = tuple(slice(max(0, c), n - max(0, -c)) for c, n in zip(o, u.shape))
        diff = np.abs(u[a] - u[b])
        pair += wo * float(np.sum(diff ** p * r[a] * r[b]))
    pair *= vol * vol * s_eps / eps
    pot = float(np.sum(eval_potential(V, u) * r)) * vol / eps
    return pair + pot


# ---------------------------------------------------------- marginal kernels

def _perp_basis(nu: np.ndarray) -> np.ndarray:
    """Orthonormal basis of nu^perp as columns (d x (d-1))."""
    d = nu.size
    q, _ = np.linalg.qr(np.column_stack([nu, np.eye(d)]))
    return q[:, 1:d]


def _default_quad_pts(d: int) -> int:
    return {1: 1, 2: 2000, 3: 300}.get(d, 40)


def _radial_marginal(k: Kernel, s: np.ndarray) -> np.ndarray:
    """|S^{d-2}| int_0^sqrt(R^2 - s^2) eta(sqrt(s^2 + r^2)) r^(d-2) dr, adaptively per s."""
    d, R = k.dim, k.support_radius
    sphere = 2.0 if d == 2 else 2.0 * math.pi ** ((d - 1) / 2) / math.gamma((d - 1) / 2)
    e = np.zeros(d)

    def prof(rad):
        e[0] = rad
        return float(eval_kernel(k, e))

    out = np.zeros(s.size)
    for i, si in enumerate(np.abs(s)):
        if si >= R:
            continue
        top = math.sqrt(R * R - si * si)
        brk = None
        if k.shape == "ring" and si < k.inner:
            brk = [math.sqrt(k.inner ** 2 - si * si)]
        f = lambda r: prof(math.sqrt(si * si + r * r)) * r ** (d - 2)
        val, _ = integrate.quad(f, 0.0, top, points=brk, limit=200, epsabs=1e-14, epsrel=1e-12)
        out[i] = sphere * val
    return out


def marginal_values(k: Kernel, nu, s, quad_pts: Optional[int] = None) -> np.ndarray:
    """eta_hat_nu(s) = int_{nu^perp} eta(s nu + y) dy.

    Radial kernels use an adaptive radial integral unless ``quad_pts`` is
    given; otherwise midpoint quadrature on [-R, R]^(d-1).
    """
    nu = _unit(nu, k.dim)
    s = np.atleast_1d(np.asarray(s, dtype=float))
    d = k.dim
    if d == 1:
        return eval_kernel(k, s[:, None] * nu)
    if k.is_radial and quad_pts is None:
        return _radial_marginal(k, s)
    q = quad_pts or _default_quad_pts(d)
    R = k.support_radius
    c = -R + (np.arange(q) + 0.5) * (2 * R / q)
    grid = np.stack(np.meshgrid(*([c] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    ys = grid @ _perp_basis(nu).T
    cell = (2 * R / q) ** (d - 1)
    out = np.empty(s.size)
    for i, si in enumerate(s):
        out[i] = eval_kernel(k, si * nu + ys).sum() * cell
    return out


@dataclass(frozen=True)
class MarginalKernel:
    """Tabulated 1D kernel on a uniform grid over [-R, R], linearly interpolated, 0 outside."""

    s: np.ndarray
    values: np.ndarray
    nu: tuple

    def __call__(self, t) -> np.ndarray:
        return np.interp(t, self.s, self.values, left=0.0, right=0.0)

    def moment(self, order: float = 1.0) -> float:
        """int eta_hat(s) |s|^order ds (trapezoid)."""
        return float(integrate.trapezoid(self.values * np.abs(self.s) ** order, self.s))

    def mass(self) -> float:
        return float(integrate.trapezoid(self.values, self.s))


def marginal_kernel(k: Kernel, nu, quad_pts: Optional[int] = None, n_s: int = 201) -> MarginalKernel:
    R = k.support_radius
    s = np.linspace(-R, R, n_s)
    vals = marginal_values(k, nu, s, quad_pts)
    return MarginalKernel(s, vals, tuple(_unit(nu, k.dim).tolist()))


def _sphere_abs_moment(d: int) -> float:
    """int_{S^{d-1}} |w_1| dH^{d-1}(w)."""
    return 2.0 * math.pi ** ((d - 1) / 2) / math.gamma((d + 1) / 2)


def interface_moment(k: Kernel, nu, quad_pts: Optional[int] = None) -> float:
    """int eta(h) |h . nu| dh, the hard-interface constant (per 2^p and per unit area).

    Radial kernels reduce to a 1D radial integral; other shapes integrate the
    tabulated marginal.
    """
    nu = _unit(nu, k.dim)
    d = k.dim
    if k.is_radial and d > 1:
        R = k.support_radius
        prof = lambda r: float(eval_kernel(k, np.r_[r, np.zeros(d - 1)][None, :])[0]) * r ** d
        brk = [k.inner] if k.shape == "ring" and 0 < k.inner < R else None
        val, _ = integrate.quad(prof, 0.0, R, points=brk, limit=200, epsabs=1e-13, epsrel=1e-12)
        return val * _sphere_abs_moment(d)
    R = k.support_radius
    s = np.linspace(-R, R, 4001)
    vals = marginal_values(k, nu, s, quad_pts)
    return float(integrate.trapezoid(vals * np.abs(s), s))


def hard_interface_energy(rho_x: float, k: Kernel, nu, p: float, quad_pts: Optional[int] = None) -> float:
    """Energy of the step profile: rho_x 2^p int eta_hat(s)|s| ds."""
    return rho_x * 2.0 ** p * interface_moment(k, nu, quad_pts)


# ---------------------------------------------------------------- cell problem

@dataclass(frozen=True, eq=False)
class Profile1D:
    """Transition profile on [-L, L] with f(-L) = -1, f(L) = 1 and constant extension."""

    L: float
    values: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.values, dtype=float)
        if not self.L > 0:
            raise ValueError("L must be positive")
        if f.ndim != 1 or f.size < 3:
            raise ValueError("profile needs at least 3 nodes")
        if f[0] != -1.0 or f[-1] != 1.0:
            raise ValueError("profile must be pinned to -1 and +1 at the ends")
        if np.any(np.abs(f) > 1.0):
            raise ValueError("profile values must lie in [-1, 1]")
        object.__setattr__(self, "values", f)

    @property
    def m(self) -> int:
        return self.values.size - 1

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.m

    @property
    def t(self) -> np.ndarray:
        return np.linspace(-self.L, self.L, self.m + 1)

    def __call__(self, t) -> np.ndarray:
        return np.interp(t, self.t, self.values, left=-1.0, right=1.0)

    def is_monotone(self, tol: float = 1e-8) -> bool:
        return bool(np.all(np.diff(self.values) >= -tol))

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["t", "f"])
            for a, b in zip(self.t.tolist(), self.values.tolist()):
                w.writerow([repr(a), repr(b)])


@dataclass(frozen=True)
class ProfileOptions:
    L: float = 10.0
    m: int = 400
    max_iters: int = 20000
    tol: float = 1e-13
    quad_pts: Optional[int] = None

    def __post_init__(self):
        if not self.L > 0:
            raise ValueError("L must be positive")
        if self.m < 4 or self.m % 2:
            raise ValueError("m must be an even integer >= 4")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


@dataclass(frozen=True, eq=False)
class CellSolution:
    sigma: float
    profile: Profile1D
    converged: bool
    iterations: int
    rearranged: bool

    def __iter__(self):
        yield self.sigma
        yield self.profile


class _CellEnergy:
    """Discrete 1D cell energy on nodes t_k = -L + k h.

    E(f) = rho * 2 sum_{j>=1} w_j h sum_k |F_{k+j} - F_k|^p + h sum_k V(f_k),
    with w_j the hat-function weights of eta_hat and F padded by J constant nodes.
    """

    def __init__(self, rho_x, weights, h, p, V, m):
        self.rho = float(rho_x)
        self.w = np.asarray(weights, float)
        self.J = self.w.size
        self.h = h
        self.p = float(p)
        self.V = V
        self.m = m

    def _full(self, x):
        J = self.J
        return np.concatenate([np.full(J + 1, -1.0), x, np.full(J + 1, 1.0)])

    def __call__(self, x):
        F = self._full(x)
        J, p, h = self.J, self.p, self.h
        e_int = 0.0
        grad = np.zeros_like(F)
        for j in range(1, J + 1):
            wj = self.w[j - 1]
            if wj == 0:
                continue
            d = F[j:] - F[:-j]
            ad = np.abs(d)
            e_int += wj * float(np.sum(ad ** p))
            g = wj * p * ad ** (p - 1) * np.sign(d)
            grad[j:] += g
            grad[:-j] -= g
        c = 2.0 * self.rho * h
        e = c * e_int + h * float(np.sum(eval_potential(self.V, x)))
        gx = c * grad[J + 1:J + 1 + x.size] + h * self.V.deriv(x)
        return e, gx

    def energy(self, x) -> float:
        return self(x)[0]


def _cell_weights(k: Kernel, nu, h: float, quad_pts, gauss: int = 8) -> np.ndarray:
    """w_j = int eta_hat(s) hat_j(s) ds for the hat functions centred at s = j h, j >= 1.

    Product integration makes the discrete step profile reproduce
    int eta_hat(s)|s| ds exactly, since |s| is linear on each side of 0.
    """
    J = int(math.ceil(k.support_radius / h - 1e-12))
    if k.is_radial and quad_pts is None and k.dim > 1:
        # the marginal has a square-root edge at the support radius, so integrate adaptively
        w = np.zeros(J + 1)
        for i in range(J):
            def f(s, i=i):
                e = float(marginal_values(k, nu, [s])[0])
                g = s / h - i
                return np.array([e * g, e * (1.0 - g)])
            val, _ = integrate.quad_vec(f, i * h, (i + 1) * h, epsabs=1e-14, epsrel=1e-12)
            w[i + 1] += val[0]
            w[i] += val[1]
        return w[1:]
    g, gw = np.polynomial.legendre.leggauss(gauss)
    g = 0.5 * (g + 1.0)
    gw = 0.5 * gw * h
    s = (np.arange(J)[:, None] + g[None, :]) * h  # panel i covers [i h, (i+1) h]
    vals = marginal_values(k, nu, s.ravel(), quad_pts).reshape(J, gauss) * gw
    w = np.zeros(J + 1)
    w[1:] += np.sum(vals * g, axis=1)  # rising half of hat_{i+1}
    w[:-1] += np.sum(vals * (1.0 - g), axis=1)  # falling half of hat_i
    return w[1:]


def cell_sigma(rho_x: float, nu, k: Kernel, V: Potential, p: float,
               opts: Optional[ProfileOptions] = None, weights=None) -> CellSolution:
    """Minimise rho_x iint eta_hat(s)|f(t+s)-f(t)|^p ds dt + int V(f) dt over pinned profiles.

    Bound-constrained L-BFGS from the tanh initialiser; the result is sorted
    (monotone rearrangement) if it is not nondecreasing, and the sharp step
    profile is kept instead when its energy is lower. ``weights`` may pass
    precomputed interaction weights for the grid spacing 2L/m.
    """
    opts = opts or ProfileOptions()
    if not rho_x > 0:
        raise ValueError("rho_x must be positive")
    if p < 1:
        raise ValueError("p must be >= 1")
    nu = _unit(nu, k.dim)
    m, L = opts.m, opts.L
    h = 2.0 * L / m
    t = np.linspace(-L, L, m + 1)
    w = _cell_weights(k, nu, h, opts.quad_pts) if weights is None else np.asarray(weights, float)
    E = _CellEnergy(rho_x, w, h, p, V, m)
    x0 = np.tanh(t[1:-1])
    res = optimize.minimize(E, x0, jac=True, method="L-BFGS-B", bounds=[(-1.0, 1.0)] * (m - 1),
                            options={"maxiter": opts.max_iters, "maxfun": 4 * opts.max_iters,
                                     "ftol": opts.tol, "gtol": 1e-11, "maxcor": 30})
    x = np.clip(res.x, -1.0, 1.0)
    rearranged = False
    if np.any(np.diff(x) < -1e-8):
        x = np.sort(x)
        rearranged = True
    x = np.maximum.accumulate(x)  # remove sub-tolerance wiggles
    sigma = E.energy(x)
    # the sharp step is admissible too; for p = 1 it is optimal but nonsmooth for L-BFGS
    step = np.where(t[1:-1] >= 0, 1.0, -1.0)
    e_step = E.energy(step)
    if e_step < sigma:
        x, sigma = step, e_step
    prof = Profile1D(L, np.concatenate([[-1.0], x, [1.0]]))
    return CellSolution(float(sigma), prof, bool(res.success), int(res.nit), rearranged)


# ---------------------------------------------------- sigma cache and G_infty

def _round_sig(x: float, digits: int = 3) -> float:
    if x == 0:
        return 0.0
    return float(f"{x:.{digits - 1}e}")


def _fibonacci_sphere(m: int) -> np.ndarray:
    i = np.arange(m) + 0.5
    z = 1.0 - 2.0 * i / m
    r = np.sqrt(1.0 - z * z)
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


class SigmaCache:
    """sigma(rho, nu) memoised on (rho to 3 significant digits, snapped direction).

    Directions snap to 64 azimuthal angles in d=2 and a 256-point Fibonacci
    sphere in d=3; sigma is evaluated at the snapped direction so every key
    maps to one deterministic value.
    """

    def __init__(self, k: Kernel, V: Potential, p: float, opts: Optional[ProfileOptions] = None,
                 digits: int = 3):
        self.k, self.V, self.p = k, V, float(p)
        self.opts = opts or ProfileOptions()
        self.digits = digits
        d = k.dim
        if d == 1:
            self.table = np.array([[1.0], [-1.0]])
        elif d == 2:
            a = 2 * math.pi * np.arange(64) / 64
            self.table = np.column_stack([np.cos(a), np.sin(a)])
        elif d == 3:
            self.table = _fibonacci_sphere(256)
        else:
            self.table = None
        self._store: dict = {}
        self._eta: dict = {}
        self._lock = threading.Lock()

    def snap(self, nu) -> tuple:
        nu = _unit(nu, self.k.dim)
        if self.table is None:
            return tuple(np.round(nu, 6).tolist())
        return int(np.argmax(self.table @ nu))

    def direction(self, key) -> np.ndarray:
        return np.asarray(key, float) if self.table is None else self.table[key]

    def __len__(self) -> int:
        return len(self._store)

    def sigma(self, rho_x: float, nu) -> float:
        dkey = self.snap(nu)
        key = (_round_sig(rho_x, self.digits), dkey)
        hit = self._store.get(key)
        if hit is not None:
            return hit
        direction = self.direction(dkey)
        eta = self._eta.get(dkey)
        if eta is None:
            h = 2.0 * self.opts.L / self.opts.m
            eta = _cell_weights(self.k, direction, h, self.opts.quad_pts)
            self._eta[dkey] = eta
        val = cell_sigma(key[0], direction, self.k, self.V, self.p, self.opts, weights=eta).sigma
        with self._lock:
            self._store[key] = val
        return val

    def write_csv(self, path, comment: Optional[str] = None) -> None:
        d = self.k.dim
        names = ["nu_angle"] if d == 2 else [f"nu_{i}" for i in range(d)]
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["rho", *names, "sigma"])
            for (rho, dkey), val in sorted(self._store.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))):
                nu = self.direction(dkey)
                cols = [math.atan2(nu[1], nu[0])] if d == 2 else nu.tolist()
                w.writerow([repr(rho), *map(repr, cols), repr(val)])


@dataclass(frozen=True, eq=False)
class Face:
    """Flat (d-1)-simplex: a point (d=1), a segment (d=2) or a triangle (d=3)."""

    vertices: np.ndarray
    normal: np.ndarray
    area: float

    @classmethod
    def simplex(cls, vertices, normal=None) -> "Face":
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        d = v.shape[1]
        if v.shape[0] != d:
            raise DimensionError(f"a face in d={d} needs {d} vertices")
        if d == 1:
            area, nrm = 1.0, np.array([1.0])
        elif d == 2:
            e = v[1] - v[0]
            area = float(np.linalg.norm(e))
            nrm = np.array([e[1], -e[0]])
        elif d == 3:
            c = np.cross(v[1] - v[0], v[2] - v[0])
            area = 0.5 * float(np.linalg.norm(c))
            nrm = c
        else:
            raise DimensionError("faces are supported for d <= 3")
        if not area > 0:
            raise ValueError("degenerate face (zero area)")
        nrm = nrm / np.linalg.norm(nrm)
        if normal is not None:
            given = _unit(normal, d)
            if abs(abs(float(given @ nrm)) - 1.0) > 1e-9:
                raise ValueError("given normal is not orthogonal to the face")
            nrm = given
        return cls(v, nrm, area)

    def quadrature(self, order: int = 4):
        """Gauss points and weights (weights sum to the face area)."""
        d = self.vertices.shape[1]
        if d == 1:
            return self.vertices.copy(), np.array([1.0])
        g, w = np.polynomial.legendre.leggauss(order)
        g = 0.5 * (g + 1.0)
        w = 0.5 * w
        v = self.vertices
        if d == 2:
            pts = v[0] + g[:, None] * (v[1] - v[0])
            return pts, w * self.area
        # collapsed (Duffy) tensor rule on the triangle
        a, b = np.meshgrid(g, g, indexing="ij")
        wa, wb = np.meshgrid(w, w, indexing="ij")
        x1 = a.ravel()
        x2 = (b * (1.0 - a)).ravel()
        ww = (wa * wb * (1.0 - a)).ravel() * 2.0 * self.area
        pts = v[0] + x1[:, None] * (v[1] - v[0]) + x2[:, None] * (v[2] - v[0])
        return pts, ww


@dataclass(frozen=True, eq=False)
class PolyhedralInterface:
    faces: tuple

    def __post_init__(self):
        object.__setattr__(self, "faces", tuple(self.faces))
        if not self.faces:
            raise ValueError("interface has no faces")
        dims = {f.vertices.shape[1] for f in self.faces}
        if len(dims) != 1:
            raise DimensionError("faces of mixed dimension")

    @property
    def dim(self) -> int:
        return self.faces[0].vertices.shape[1]

    @property
    def area(self) -> float:
        return float(sum(f.area for f in self.faces))

    @classmethod
    def from_polyline(cls, points, normal_side: int = 1) -> "PolyhedralInterface":
        """d=2 polyline; normals rotate each segment by -90 degrees (flip with normal_side=-1)."""
        pts = np.asarray(points, dtype=float)
        faces = []
        for a, b in zip(pts[:-1], pts[1:]):
            f = Face.simplex([a, b])
            faces.append(Face(f.vertices, normal_side * f.normal, f.area))
        return cls(tuple(faces))


def g_infinity_energy(interface: PolyhedralInterface, rho: Density, k: Kernel, V: Potential, p: float,
                      quad: int = 4, cache: Optional[SigmaCache] = None,
                      opts: Optional[ProfileOptions] = None) -> float:
    """sum over faces of int_face sigma(rho(x), nu) rho(x) dH^{d-1} by Gauss quadrature."""
    if interface.dim != rho.dim or k.dim != rho.dim:
        raise DimensionError("interface, density and kernel dimensions differ")
    cache = cache or SigmaCache(k, V, p, opts)
    total = 0.0
    for face in interface.faces:
        pts, w = face.quadrature(quad)
        if not np.all(rho.contains(pts)):
            raise ValueError("interface face leaves the density's domain")
        r = rho(pts)
        sig = np.array([cache.sigma(float(ri), face.normal) for ri in r])
        total += float(np.sum(w * sig * r))
    return total


# ------------------------------------------------ fixed-interface consistency

@dataclass
class ConsistencyResult:
    n: int
    eps: float
    p: float
    discrete: float
    prediction: float
    ratio: Optional[float]
    seed: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _clip_line_to_box(point, nu, lo, hi):
    """Segment of the line {x : (x - point).nu = 0} inside the box (d=2)."""
    tang = np.array([-nu[1], nu[0]])
    t0, t1 = -np.inf, np.inf
    for ax in range(2):
        if abs(tang[ax]) < 1e-15:
            if not lo[ax] <= point[ax] <= hi[ax]:
                return None
            continue
        a = (lo[ax] - point[ax]) / tang[ax]
        b = (hi[ax] - point[ax]) / tang[ax]
        t0, t1 = max(t0, min(a, b)), min(t1, max(a, b))
    if not t1 > t0:
        return None
    return point + t0 * tang, point + t1 * tang


def plane_rho2_integral(rho: Density, point, nu, res: Optional[int] = None) -> float:
    """int over {(x - point).nu = 0} of rho^2 dH^{d-1}, restricted to the domain."""
    d = rho.dim
    point = np.asarray(point, float)
    nu = _unit(nu, d)
    lo, hi = np.asarray(rho.lo), np.asarray(rho.hi)
    if d == 1:
        if not rho.contains(point[None, :])[0]:
            raise ValueError("interface point is outside the domain")
        return float(rho(point[None, :])[0] ** 2)
    if d == 2:
        seg = _clip_line_to_box(point, nu, lo, hi)
        if seg is None:
            raise ValueError("interface does not meet the domain")
        a, b = seg
        panels = res or 256
        g, w = np.polynomial.legendre.leggauss(6)
        edges = np.linspace(0.0, 1.0, panels + 1)
        s = (edges[:-1, None] + 0.5 * (g + 1.0)[None, :] / panels).ravel()
        ws = np.tile(0.5 * w / panels, panels)
        pts = a + s[:, None] * (b - a)
        val = float(np.sum(ws * rho(pts) ** 2)) * float(np.linalg.norm(b - a))
    else:
        m = res or 400
        R = float(np.linalg.norm(hi - lo))
        c = -R + (np.arange(m) + 0.5) * (2 * R / m)
        grid = np.stack(np.meshgrid(*([c] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
        pts = point + grid @ _perp_basis(nu).T
        val = float(np.sum(rho(pts) ** 2)) * (2 * R / m) ** (d - 1)
    if not val > 0:
        raise ValueError("interface does not meet the domain")
    return val


def hard_interface_consistency(rho: Density, plane, n: int, eps: float, p: float, k: Kernel, V: Potential,
                               seed: int = 0, method: str = "auto") -> ConsistencyResult:
    """Discrete energy of u = sign((x - point).nu) on n iid samples vs 2^p int eta|h_nu| int_Gamma rho^2.

    ``plane=None`` uses u = 1 (no interface; both values are 0 and the ratio is None).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if k.dim != rho.dim:
        raise DimensionError("kernel and density dimensions differ")
    rng = np.random.default_rng(np.uint64(seed))
    x = rho.sample(n, rng)
    g = build_graph(PointCloud(x), k, eps, method=method)
    if plane is None:
        u = np.ones(n)
        pred = 0.0
    else:
        point, nu = np.asarray(plane[0], float), _unit(plane[1], rho.dim)
        u = np.where((x - point) @ nu >= 0, 1.0, -1.0)
        pred = 2.0 ** p * interface_moment(k, nu) * plane_rho2_integral(rho, point, nu)
    e = gl_energy(g, u, p, V, exact=False).total
    ratio = e / pred if pred > 0 else None
    return ConsistencyResult(int(n), float(eps), float(p), float(e), float(pred), ratio, int(seed))
