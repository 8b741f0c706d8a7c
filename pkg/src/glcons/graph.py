"""Weighted epsilon-graphs W_ij = eps^-d eta((x_i - x_j)/eps) and connectivity."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .core import DimensionError, Kernel, PointCloud, eval_kernel

BRUTE_FORCE_MAX_N = 2000
DROP_REL = 1e-14


@dataclass(frozen=True, eq=False)
class SparseGraph:
    """Symmetric weighted graph stored as CSR (sorted column indices per row).

    The diagonal holds the self-loop weight eta(0)/eps^d. ``points`` keeps the
    vertex positions when the graph was built from a cloud or image.
    """

    W: sp.csr_matrix
    eps: float
    dim: int
    kernel: Optional[Kernel] = None
    points: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.W.shape[0]

    def neighbors(self, i: int):
        lo, hi = self.W.indptr[i], self.W.indptr[i + 1]
        return self.W.indices[lo:hi].copy(), self.W.data[lo:hi].copy()

    def edges(self):
        """Upper-triangular edges (i < j) as arrays (i, j, w), sorted by (i, j). Cached."""
        cached = self.__dict__.get("_edges")
        if cached is None:
            coo = sp.triu(self.W, k=1).tocoo()
            order = np.lexsort((coo.col, coo.row))
            cached = (coo.row[order].astype(np.int64), coo.col[order].astype(np.int64), coo.data[order].copy())
            for a in cached:
                a.setflags(write=False)
            self.__dict__["_edges"] = cached
        return cached

    @property
    def num_edges(self) -> int:
        return int(self.edges()[0].size)

    def is_symmetric(self) -> bool:
        diff = self.W - self.W.T
        return diff.nnz == 0 or not np.any(diff.data != 0)


def _assemble(n: int, i: np.ndarray, j: np.ndarray, w: np.ndarray, diag: float) -> sp.csr_matrix:
    rows = np.concatenate([i, j, np.arange(n)])
    cols = np.concatenate([j, i, np.arange(n)])
    data = np.concatenate([w, w, np.full(n, diag)])
    keep = data != 0
    W = sp.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(n, n))
    W.sum_duplicates()
    W.sort_indices()
    return W


def _pairs_brute(x: np.ndarray, reach: float):
    n = x.shape[0]
    out_i, out_j = [], []
    block = max(1, 4_000_000 // max(n, 1))
    for s in range(0, n, block):
        xs = x[s:s + block]
        d2 = np.sum((xs[:, None, :] - x[None, :, :]) ** 2, axis=-1)
        ii, jj = np.nonzero(d2 <= reach * reach)
        ii = ii + s
        m = ii < jj
        out_i.append(ii[m])
        out_j.append(jj[m])
    return np.concatenate(out_i), np.concatenate(out_j)


def _pairs_grid(x: np.ndarray, reach: float):
    """Candidate pairs i < j with |x_i - x_j| <= reach via uniform grid binning."""
    n, d = x.shape
    cells = np.floor((x - x.min(axis=0)) / reach).astype(np.int64)
    dims = cells.max(axis=0) + 3
    strides = np.cumprod(np.concatenate([[1], dims[:-1]]))
    key = (cells + 1) @ strides
    order = np.argsort(key, kind="stable")
    skey = key[order]
    uniq, start, count = np.unique(skey, return_index=True, return_counts=True)
    out_i, out_j = [], []
    for off in itertools.product((-1, 0, 1), repeat=d):
        off = np.asarray(off)
        # visit each unordered cell pair once
        nz = np.flatnonzero(off)
        if nz.size and off[nz[0]] < 0:
            continue
        nkey = uniq + off @ strides
        pos = np.searchsorted(uniq, nkey)
        pos = np.minimum(pos, uniq.size - 1)
        hit = uniq[pos] == nkey
        a_cells = np.flatnonzero(hit)
        b_cells = pos[hit]
        ca = count[a_cells]
        cb = count[b_cells]
        tot = ca * cb
        if tot.sum() == 0:
            continue
        # expand all point pairs between cell a and cell b
        rep = np.repeat(np.arange(a_cells.size), tot)
        local = np.arange(tot.sum()) - np.repeat(np.cumsum(tot) - tot, tot)
        ia = start[a_cells][rep] + local // cb[rep]
        ib = start[b_cells][rep] + local % cb[rep]
        pi = order[ia]
        pj = order[ib]
        if not nz.size:
            m = pi < pj
            pi, pj = pi[m], pj[m]
        d2 = np.sum((x[pi] - x[pj]) ** 2, axis=-1)
        m = d2 <= reach * reach
        pi, pj = pi[m], pj[m]
        lo = np.minimum(pi, pj)
        hi = np.maximum(pi, pj)
        out_i.append(lo)
        out_j.append(hi)
    if not out_i:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(out_i), np.concatenate(out_j)


def build_graph(cloud: PointCloud, k: Kernel, eps: float, method: str = "auto") -> SparseGraph:
    """W_ij = eps^-d eta((x_i - x_j)/eps) for every pair within eps * R_eta.

    ``method`` is ``"grid"``, ``"brute"`` or ``"auto"`` (brute force up to
    2000 points, grid binning above).
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    if k.dim != cloud.dim:
        raise DimensionError(f"kernel dimension {k.dim} != cloud dimension {cloud.dim}")
    x = cloud.points
    n, d = x.shape
    reach = eps * k.support_radius
    if method == "auto":
        method = "brute" if n <= BRUTE_FORCE_MAX_N else "grid"
    if method == "brute":
        i, j = _pairs_brute(x, reach)
    elif method == "grid":
        i, j = _pairs_grid(x, reach)
    else:
        raise ValueError(f"unknown method {method!r}")
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    scale = eps ** (-d)
    w = scale * eval_kernel(k, (x[i] - x[j]) / eps)
    keep = w >= DROP_REL * scale
    diag = scale * float(eval_kernel(k, np.zeros(d)))
    W = _assemble(n, i[keep], j[keep], w[keep], diag)
    return SparseGraph(W, float(eps), d, k, x)


def graph_from_weights(W, eps: float, dim: int, points=None) -> SparseGraph:
    """Wrap an explicit symmetric weight matrix (dense or sparse)."""
    W = sp.csr_matrix(W, dtype=float)
    if W.shape[0] != W.shape[1]:
        raise DimensionError("weight matrix must be square")
    W.eliminate_zeros()
    W.sort_indices()
    g = SparseGraph(W, float(eps), int(dim), None, None if points is None else np.asarray(points, float))
    if not g.is_symmetric():
        raise ValueError("weight matrix is not symmetric")
    return g


@dataclass
class ConnectivityReport:
    n_components: int
    sizes: list

    def to_dict(self) -> dict:
        return {"n_components": self.n_components, "sizes": self.sizes}


def connectivity_report(g: SparseGraph) -> ConnectivityReport:
    ncomp, lab = connected_components(g.W, directed=False)
    sizes = np.bincount(lab, minlength=ncomp)
    return ConnectivityReport(int(ncomp), sorted((int(s) for s in sizes), reverse=True))


def write_edge_list(path, g: SparseGraph, comment: Optional[str] = None) -> None:
    i, j, w = g.edges()
    with open(path, "w") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        loop = float(g.W.diagonal()[0]) if g.n else 0.0
        fh.write(f"# n={g.n} eps={g.eps!r} d={g.dim} self={loop!r}\n")
        fh.write("i,j,w\n")
        for a, b, c in zip(i.tolist(), j.tolist(), w.tolist()):
            fh.write(f"{a},{b},{c!r}\n")


def read_edge_list(path) -> SparseGraph:
    """Read an edge list written by :func:`write_edge_list`; the self-loop weight comes from the header."""
    meta = {}
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if "=" in tok:
                        key, val = tok.split("=", 1)
                        meta[key] = val
                continue
            if line.startswith("i,"):
                continue
            a, b, c = line.split(",")
            rows.append((int(a), int(b), float(c)))
    if not {"n", "eps", "d"} <= meta.keys():
        raise ValueError(f"{path}: missing '# n=.. eps=.. d=..' header")
    n = int(meta["n"])
    arr = np.array(rows, dtype=float).reshape(-1, 3)
    i = arr[:, 0].astype(np.int64)
    j = arr[:, 1].astype(np.int64)
    W = _assemble(n, i, j, arr[:, 2], float(meta.get("self", 0.0)))
    return SparseGraph(W, float(meta["eps"]), int(meta["d"]))
