"""Gradient-flow minimisation of the GL energy with a convexity-splitting step."""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import LabelField, Potential
from .energy import (FidelitySpec, _offdiag, _values, fidelity_gradient, gl_energy, gl_gradient)
from .graph import SparseGraph


class NumericalError(RuntimeError):
    """Raised when the flow produces a non-finite or increasing energy (dt too large)."""


INITS = ("random", "field", "signed_distance")
MONOTONE_SLACK = 1e-10


@dataclass
class SolveOptions:
    """Options for :func:`minimize`.

    ``dt=None`` means 0.1 * eps and ``splitting=None`` means L_V / (eps n).
    With ``backtrack`` a step that would raise the energy is retried with a
    halved time step instead of aborting.
    """

    dt: Optional[float] = None
    max_iters: int = 10000
    tol: float = 1e-8
    splitting: Optional[float] = None
    clamp: bool = True
    seed: int = 0
    init: str = "random"
    init_field: Optional[np.ndarray] = None
    plane_point: Optional[tuple] = None
    plane_normal: Optional[tuple] = None
    backtrack: bool = False
    max_halvings: int = 60

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.splitting is not None and self.splitting < 0:
            raise ValueError("splitting constant must be >= 0")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}")
        if self.init == "field" and self.init_field is None:
            raise ValueError("init='field' needs init_field")
        if self.init == "signed_distance" and (self.plane_point is None or self.plane_normal is None):
            raise ValueError("init='signed_distance' needs plane_point and plane_normal")


@dataclass
class SolveResult:
    u: np.ndarray
    iterations: int
    energy_trace: np.ndarray
    converged: bool
    wall_time: float = field(default=0.0, compare=False)

    @property
    def final_energy(self) -> float:
        return float(self.energy_trace[-1])

    def monotone(self, slack: float = MONOTONE_SLACK) -> bool:
        e = self.energy_trace
        return bool(np.all(np.diff(e) <= slack * np.maximum(1.0, np.abs(e[:-1]))))

    def to_dict(self, max_trace: int = 1000) -> dict:
        e = self.energy_trace
        if e.size > max_trace:
            keep = np.unique(np.linspace(0, e.size - 1, max_trace).round().astype(int))
            e = e[keep]
        return {"converged": self.converged, "iters": self.iterations,
                "energy_trace": [float(x) for x in e], "final_energy": self.final_energy,
                "purity": phase_purity(self.u)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def threshold(u) -> np.ndarray:
    """sign(u) with sign(0) = +1."""
    v = _values(u)
    return np.where(v >= 0, 1.0, -1.0)


def phase_purity(u, level: float = 0.9) -> float:
    v = _values(u)
    return float(np.mean(np.abs(v) > level))


def estimate_lipschitz(g: SparseGraph, p: float, V: Potential, fidelity: Optional[FidelitySpec] = None) -> float:
    """Gershgorin bound on the Hessian of the energy over [-1, 1]^n.

    Only finite for p >= 2 (the pair term is not C^2 at ties for p < 2); for
    p < 2 the bound at |u_i - u_j| = 2 is returned, which is not rigorous.
    """
    n = g.n
    rows, _, w = _offdiag(g)
    rowsum = np.bincount(rows, weights=w, minlength=n).max(initial=0.0)
    phi2 = p * (p - 1) * 2.0 ** (p - 2) if p > 1 else 0.0
    L = 4.0 * rowsum * phi2 / (g.eps * n * n) + V.second_derivative_bound / (g.eps * n)
    if fidelity is not None and fidelity.indices.size:
        q = fidelity.q
        L += fidelity.weight * q * max(q - 1, 1.0) * 2.0 ** max(q - 2, 0.0) / n
    return float(L)


def stable_dt(g: SparseGraph, p: float, V: Potential, fidelity=None, splitting: Optional[float] = None,
              safety: float = 0.9) -> float:
    """Largest dt whose effective step dt/(1 + c dt) stays below safety / L."""
    L = estimate_lipschitz(g, p, V, fidelity)
    c = V.lipschitz / (g.eps * g.n) if splitting is None else splitting
    h = safety / L
    if c * h >= 1:
        return 1e12
    return h / (1.0 - c * h)


def signed_distance_field(points, plane_point, plane_normal, eps: float) -> np.ndarray:
    pts = np.asarray(points, float)
    nu = np.asarray(plane_normal, float)
    nu = nu / np.linalg.norm(nu)
    return np.tanh((pts - np.asarray(plane_point, float)) @ nu / eps)


def initial_field(g: SparseGraph, opts: SolveOptions) -> np.ndarray:
    if opts.init == "field":
        u0 = _values(opts.init_field, g.n).copy()
    elif opts.init == "signed_distance":
        if g.points is None:
            raise ValueError("signed-distance initialisation needs vertex positions")
        u0 = signed_distance_field(g.points, opts.plane_point, opts.plane_normal, g.eps)
    else:
        rng = np.random.default_rng(np.uint64(opts.seed))
        u0 = 0.1 * np.where(rng.random(g.n) < 0.5, -1.0, 1.0)
    return u0


def minimize(g: SparseGraph, p: float, V: Potential, fidelity: Optional[FidelitySpec] = None,
             opts: Optional[SolveOptions] = None) -> SolveResult:
    """Semi-implicit gradient flow u <- u - dt/(1 + c dt) * grad(E)(u), optionally clamped to [-1, 1].

    Stops when max|u_new - u| / dt < tol. Every step must not raise the energy
    by more than a 1e-10 relative slack; otherwise the step is halved (when
    ``opts.backtrack``) or :class:`NumericalError` is raised.
    """
    opts = opts or SolveOptions()
    if g.n < 1:
        raise ValueError("graph has no nodes")
    if fidelity is not None:
        fidelity.validate(g.n)
    t0 = time.perf_counter()
    dt = 0.1 * g.eps if opts.dt is None else opts.dt
    c = V.lipschitz / (g.eps * g.n) if opts.splitting is None else opts.splitting
    u = initial_field(g, opts)
    if opts.clamp:
        u = np.clip(u, -1.0, 1.0)

    def energy(v):
        return gl_energy(g, v, p, V, fidelity, exact=False).total

    def grad(v):
        gr = gl_gradient(g, v, p, V)
        if fidelity is not None:
            gr = gr + fidelity_gradient(fidelity, v)
        return gr

    e = energy(u)
    if not np.isfinite(e):
        raise NumericalError("initial energy is not finite")
    trace = [e]
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        gr = grad(u)
        step_dt = dt
        for _ in range(opts.max_halvings + 1):
            h = step_dt / (1.0 + c * step_dt)
            new = u - h * gr
            if opts.clamp:
                np.clip(new, -1.0, 1.0, out=new)
            e_new = energy(new)
            ok = np.isfinite(e_new) and e_new <= e + MONOTONE_SLACK * max(1.0, abs(e))
            if ok or not opts.backtrack:
                break
            step_dt *= 0.5
        if not np.isfinite(e_new):
            raise NumericalError(f"non-finite energy at iteration {it}; dt={dt} is too large")
        if not ok:
            raise NumericalError(f"energy increased at iteration {it} ({e} -> {e_new}); dt={dt} is too large")
        change = float(np.max(np.abs(new - u))) / dt
        u = new
        e = e_new
        trace.append(e)
        if change < opts.tol:
            converged = True
            break
    return SolveResult(u, it, np.asarray(trace), converged, time.perf_counter() - t0)


def to_label_field(res: SolveResult, cloud=None) -> LabelField:
    return LabelField(res.u, cloud)
