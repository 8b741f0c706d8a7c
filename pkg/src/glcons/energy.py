"""Discrete Ginzburg-Landau energy, its gradient, fidelity terms and the p -> infinity forms."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .core import DimensionError, LabelField, Potential, eval_potential, eval_potential_deriv
from .graph import DROP_REL, SparseGraph


def _values(u, n: Optional[int] = None) -> np.ndarray:
    v = u.values if isinstance(u, LabelField) else np.asarray(u, dtype=float).reshape(-1)
    if n is not None and v.shape[0] != n:
        raise DimensionError(f"label field has {v.shape[0]} values, graph has {n} nodes")
    return v


def _check_p(p: float) -> None:
    if not p >= 1:
        raise ValueError(f"p must be >= 1, got {p}")


def _offdiag(g: SparseGraph):
    """Row indices, column indices and weights of all stored off-diagonal entries, CSR order."""
    W = g.W
    rows = np.repeat(np.arange(g.n), np.diff(W.indptr))
    m = rows != W.indices
    return rows[m], W.indices[m], W.data[m]


# ---------------------------------------------------------------------------
# Fidelity
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class FidelitySpec:
    """k_n(x_i, u) = weight * |target_i - u|^q on the labelled indices, 0 elsewhere."""

    indices: np.ndarray
    targets: np.ndarray
    weight: float = 1.0
    q: float = 2.0
    beta: Optional[float] = None

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        y = np.asarray(self.targets, dtype=float).reshape(-1)
        if y.size == 1 and idx.size != 1:
            y = np.full(idx.size, float(y[0]))
        if idx.shape != y.shape:
            raise DimensionError("indices and targets differ in length")
        if self.weight < 0:
            raise ValueError("fidelity weight must be >= 0")
        if self.q < 1:
            raise ValueError("fidelity exponent q must be >= 1")
        if np.unique(idx).size != idx.size:
            raise ValueError("duplicate labelled indices")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "targets", y)
        if self.beta is None:
            ymax = float(np.max(np.abs(y))) if y.size else 0.0
            object.__setattr__(self, "beta", max(1e-300, self.weight * 2 ** (self.q - 1) * max(ymax**self.q, 1.0)))

    @classmethod
    def from_regions(cls, points, regions, weight: float, q: float = 2.0) -> "FidelitySpec":
        """Label every point inside a ball; ``regions`` is a list of (centre, radius, value)."""
        pts = np.asarray(points, dtype=float)
        idx, vals = [], []
        taken = np.zeros(pts.shape[0], dtype=bool)
        for centre, radius, value in regions:
            inside = np.linalg.norm(pts - np.asarray(centre, float), axis=1) < radius
            inside &= ~taken
            taken |= inside
            idx.append(np.flatnonzero(inside))
            vals.append(np.full(int(inside.sum()), float(value)))
        idx = np.concatenate(idx) if idx else np.zeros(0, np.int64)
        vals = np.concatenate(vals) if vals else np.zeros(0)
        order = np.argsort(idx)
        return cls(idx[order], vals[order], weight, q)

    def validate(self, n: int) -> None:
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= n):
            raise IndexError(f"labelled index out of range for {n} nodes")

    def satisfies_growth(self, s=None) -> bool:
        """Sampled check of k(x, u) <= beta (1 + |u|^q)."""
        s = np.linspace(-10, 10, 2001) if s is None else np.asarray(s, float)
        if not self.targets.size:
            return True
        k = self.weight * np.abs(self.targets[:, None] - s[None, :]) ** self.q
        return bool(np.all(k <= self.beta * (1 + np.abs(s) ** self.q)[None, :] * (1 + 1e-12)))


def fidelity_energy(spec: FidelitySpec, u, n: Optional[int] = None) -> float:
    v = _values(u)
    n = v.shape[0] if n is None else n
    spec.validate(n)
    if spec.indices.size == 0 or spec.weight == 0:
        return 0.0
    terms = spec.weight * np.abs(spec.targets - v[spec.indices]) ** spec.q
    return math.fsum(terms.tolist()) / n


def fidelity_gradient(spec: FidelitySpec, u) -> np.ndarray:
    v = _values(u)
    n = v.shape[0]
    g = np.zeros(n)
    if spec.indices.size == 0 or spec.weight == 0:
        return g
    r = v[spec.indices] - spec.targets
    g[spec.indices] = spec.weight * spec.q * np.abs(r) ** (spec.q - 1) * np.sign(r) / n
    return g


# ---------------------------------------------------------------------------
# Ginzburg-Landau energy
# ---------------------------------------------------------------------------


@dataclass
class EnergyBreakdown:
    interaction: float
    potential: float
    fidelity: float
    total: float
    n: int
    eps: float
    p: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _interaction_terms(g: SparseGraph, v: np.ndarray, p: float) -> np.ndarray:
    """W_ij |u_i - u_j|^p for each unordered edge i < j (the double sum counts each twice)."""
    i, j, w = g.edges()
    diff = np.abs(v[i] - v[j])
    if p == 1:
        return w * diff
    if p == 2:
        return w * diff * diff
    return w * diff**p


def gl_energy(g: SparseGraph, u, p: float, V: Potential, fidelity: Optional[FidelitySpec] = None,
              exact: bool = True) -> EnergyBreakdown:
    """Interaction (1/(eps n^2)) sum W|u_i-u_j|^p, potential (1/(eps n)) sum V(u_i), fidelity.

    With ``exact`` the sums are correctly rounded (``math.fsum``), which makes
    the result independent of node ordering; otherwise numpy pairwise sums are
    used (deterministic for a fixed ordering, much faster).
    """
    _check_p(p)
    n = g.n
    v = _values(u, n)
    it = _interaction_terms(g, v, p)
    pt = eval_potential(V, v)
    if exact:
        s_int = math.fsum(it.tolist())
        s_pot = math.fsum(pt.tolist())
    else:
        s_int = float(np.sum(it))
        s_pot = float(np.sum(pt))
    interaction = 2.0 * s_int / (g.eps * n * n)
    potential = s_pot / (g.eps * n)
    fid = fidelity_energy(fidelity, v, n) if fidelity is not None else 0.0
    total = (interaction + potential) + fid
    return EnergyBreakdown(interaction, potential, fid, total, n, g.eps, float(p))


def gl_gradient(g: SparseGraph, u, p: float, V: Potential) -> np.ndarray:
    """Gradient of the GL energy; at p = 1 the zero subgradient is taken at ties."""
    _check_p(p)
    n = g.n
    v = _values(u, n)
    i, j, w = g.edges()
    diff = v[i] - v[j]
    if p == 1:
        t = w * np.sign(diff)
    elif p == 2:
        t = w * diff
    else:
        t = w * np.abs(diff) ** (p - 1) * np.sign(diff)
    inter = np.bincount(i, weights=t, minlength=n) - np.bincount(j, weights=t, minlength=n)
    return (2.0 * p / (g.eps * n * n)) * inter + eval_potential_deriv(V, v) / (g.eps * n)


# ---------------------------------------------------------------------------
# Segmentation
# ---------------------------------------------------------------------------


def segmentation_fidelity(n: int, indices, labels, lam: float) -> FidelitySpec:
    """(lam/2) sum_{i in I} |f_i - u_i|^2 expressed as a fidelity term (which carries 1/n)."""
    return FidelitySpec(np.asarray(indices), np.asarray(labels, float), weight=lam * n / 2.0, q=2.0)


def segmentation_objective(g: SparseGraph, u, p: float, V: Potential, indices, labels, lam: float) -> float:
    v = _values(u, g.n)
    idx = np.asarray(indices, dtype=np.int64)
    if idx.size and (idx.min() < 0 or idx.max() >= g.n):
        raise IndexError("labelled pixel index out of range")
    f = np.asarray(labels, dtype=float)
    fid = 0.5 * lam * math.fsum((np.abs(f - v[idx]) ** 2).tolist())
    return fid + gl_energy(g, v, p, V).total


def build_pixel_graph(image, tau_color: float = 5e-4, eps: Optional[float] = None) -> SparseGraph:
    """Pixel graph W_ij = eps^-2 exp(-|y_i - y_j|^2 / tau) for |x_i - x_j| <= eps.

    ``image`` is an (H, W, 3) RGB array in [0, 1] or an object with an ``rgb``
    attribute. Pixels sit on a regular grid of spacing 1/sqrt(n); ``eps``
    defaults to that spacing (four-neighbour connectivity).
    """
    rgb = np.asarray(getattr(image, "rgb", image), dtype=float)
    if rgb.ndim == 2:
        rgb = rgb[:, :, None]
    if rgb.ndim != 3 or rgb.shape[0] * rgb.shape[1] == 0:
        raise ValueError("image must be a nonempty (H, W, C) array")
    if not tau_color > 0:
        raise ValueError("tau_color must be positive")
    H, Wd, _ = rgb.shape
    n = H * Wd
    h = 1.0 / math.sqrt(n)
    eps = h if eps is None else float(eps)
    if not eps > 0:
        raise ValueError("eps must be positive")
    reach = eps / h * (1 + 1e-9)
    r = int(math.floor(reach))
    ys = rgb.reshape(n, -1)
    idx = np.arange(n).reshape(H, Wd)
    scale = eps ** -2
    I, J, Wt = [], [], []
    for dr in range(0, r + 1):
        for dc in range(-r, r + 1):
            if (dr == 0 and dc <= 0) or dr * dr + dc * dc > reach * reach:
                continue
            # pixel (r, c) paired with (r + dr, c + dc)
            a = idx[0:H - dr, max(0, -dc):Wd - max(0, dc)]
            b = idx[dr:H, max(0, dc):Wd + min(0, dc)]
            a, b = a.ravel(), b.ravel()
            d2 = np.sum((ys[a] - ys[b]) ** 2, axis=1)
            w = scale * np.exp(-d2 / tau_color)
            keep = w >= DROP_REL * scale
            i = np.minimum(a, b)[keep]
            j = np.maximum(a, b)[keep]
            I.append(i)
            J.append(j)
            Wt.append(w[keep])
    i = np.concatenate(I) if I else np.zeros(0, np.int64)
    j = np.concatenate(J) if J else np.zeros(0, np.int64)
    w = np.concatenate(Wt) if Wt else np.zeros(0)
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    data = np.concatenate([w, w, np.full(n, scale)])
    W = sp.csr_matrix((data, (rows, cols)), shape=(n, n))
    W.sum_duplicates()
    W.sort_indices()
    rr, cc = np.divmod(np.arange(n), Wd)
    pts = np.stack([cc * h, rr * h], axis=1)
    return SparseGraph(W, eps, 2, None, pts)


# ---------------------------------------------------------------------------
# p -> infinity
# ---------------------------------------------------------------------------


def _inf_terms(g: SparseGraph, v: np.ndarray, V: Potential):
    rows, cols, w = _offdiag(g)
    return w * np.abs(v[rows] - v[cols]), eval_potential(V, v) / g.eps


def gl_infinity_energy(g: SparseGraph, u, V: Potential) -> float:
    """max( max_ij W_ij |u_i - u_j|, max_i V(u_i) / eps )."""
    a, b = _inf_terms(g, _values(u, g.n), V)
    return float(max(a.max(initial=0.0), b.max(initial=0.0)))


def gl_tilde_energy(g: SparseGraph, u, p: float, V: Potential) -> float:
    """[(1/(eps n^2)) sum (W|du|)^p + (1/n) sum (V/eps)^p]^(1/p), evaluated with the max factored out."""
    _check_p(p)
    n = g.n
    a, b = _inf_terms(g, _values(u, n), V)
    m = float(max(a.max(initial=0.0), b.max(initial=0.0)))
    if m == 0.0:
        return 0.0
    s = math.fsum(((a / m) ** p).tolist()) / (g.eps * n * n) + math.fsum(((b / m) ** p).tolist()) / n
    return m * s ** (1.0 / p)
