"""Hand-built affine SNNs: min/max, ReLU ridges and their sums, FEM hat functions."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .codec import AffineMap, AffineSnn, add_all
from .errors import SingularSimplex
from .graph import build_graph
from .spike import SnnParams


def _min_core(n_inputs: int, weight: float) -> SnnParams:
    g = build_graph([(i, n_inputs) for i in range(n_inputs)], n_inputs + 1)
    return SnnParams(g, np.full(n_inputs, weight), np.zeros(n_inputs))


def build_min_net(d0: int, eps: float) -> AffineSnn:
    """One neuron fed by all inputs with weight 1/eps: output in (min x, min x + eps]."""
    if d0 < 2:
        raise ValueError("min network needs d0 >= 2")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return AffineSnn(AffineMap.identity(d0), _min_core(d0, 1.0 / eps), AffineMap.identity(1))


def build_max_net(d0: int, eps: float) -> AffineSnn:
    """max x = -min(-x): negated identity as encoder and decoder."""
    if d0 < 1:
        raise ValueError("max network needs d0 >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    return AffineSnn(AffineMap.identity(d0, -1.0), _min_core(d0, 1.0 / eps), AffineMap.identity(1, -1.0))


@dataclass(frozen=True)
class RidgeTerm:
    """x -> c * max(a.x + b, 0) + d."""

    a: np.ndarray
    b: float
    c: float
    d: float

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        if not (np.all(np.isfinite(a)) and np.isfinite([self.b, self.c, self.d]).all()):
            raise ValueError("ridge coefficients must be finite")
        object.__setattr__(self, "a", a)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        return self.c * np.maximum(x @ self.a + self.b, 0.0) + self.d


def ridge_sum(terms: Sequence[RidgeTerm], x) -> np.ndarray:
    """Exact value of a sum of ridge functions (reference for the emulators)."""
    return sum(t(x) for t in terms)


def build_ridge_net(term: RidgeTerm, eps: float) -> AffineSnn:
    """Emulate ``c*max(a.x+b, 0) + d`` within ``|c|*eps``.

    The encoder feeds ``-(a.x + b)`` and ``0`` to a two-input min neuron;
    the decoder is ``z -> -c*z + d``.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    d0 = term.a.shape[0]
    enc = AffineMap(np.vstack([-term.a, np.zeros(d0)]), [-term.b, 0.0])
    dec = AffineMap([[-term.c]], [term.d])
    return AffineSnn(enc, _min_core(2, 1.0 / eps), dec)


def build_ridge_sum(terms: Sequence[RidgeTerm], eps: float) -> AffineSnn:
    """Sum of ridge emulators; error at most ``eps * sum(|c_i|)``."""
    if not terms:
        raise ValueError("need at least one ridge term")
    return add_all([build_ridge_net(t, eps) for t in terms])


def build_barron_sum_net(
    terms: Sequence[RidgeTerm], eps: float | None = None, target_error: float | None = None
) -> AffineSnn:
    """Emulate an externally supplied ridge expansion (e.g. a Barron-type sum).

    Give either ``eps`` directly or a ``target_error``, in which case
    ``eps = target_error / sum(|c_i|)`` so the emulation error stays below it.
    """
    if (eps is None) == (target_error is None):
        raise ValueError("pass exactly one of eps and target_error")
    if eps is None:
        total = sum(abs(t.c) for t in terms)
        eps = target_error / total if total > 0 else 1.0
    return build_ridge_sum(terms, eps)


# -- triangulations ---------------------------------------------------------


@dataclass(frozen=True)
class Triangulation:
    vertices: np.ndarray  # (n_vertices, d0)
    simplices: np.ndarray  # (n_simplices, d0 + 1) vertex indices

    def __post_init__(self):
        v = np.array(self.vertices, dtype=np.float64)
        if v.ndim == 1:
            v = v[:, None]
        s = np.array(self.simplices, dtype=np.int64)
        d0 = v.shape[1]
        if s.ndim != 2 or s.shape[1] != d0 + 1:
            raise ValueError(f"simplices must list {d0 + 1} vertices each")
        if s.min() < 0 or s.max() >= len(v):
            raise ValueError("simplex refers to a missing vertex")
        for row in s:
            p = v[row]
            if np.linalg.matrix_rank(p[1:] - p[0]) < d0:
                raise SingularSimplex(f"simplex {row.tolist()} is degenerate")
        # Overlap spot check: a few interior points of each simplex (centroid
        # and points pulled toward each vertex) must not lie inside another.
        if len(s) <= 512:
            k = d0 + 1
            probes = np.vstack([np.full(k, 1.0 / k), 0.4 * np.eye(k) + 0.6 / k])
            for i, row in enumerate(s):
                for c in probes @ v[row]:
                    for j, other in enumerate(s):
                        if i != j and _barycentric(v[other], c).min() > 1e-9:
                            raise ValueError(f"simplices {i} and {j} overlap")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "simplices", s)

    @property
    def d0(self) -> int:
        return self.vertices.shape[1]

    def _edge_lengths(self):
        for row in self.simplices:
            p = self.vertices[row]
            yield [np.linalg.norm(p[i] - p[j]) for i, j in itertools.combinations(range(len(row)), 2)]

    @property
    def h_min(self) -> float:
        return float(min(min(e) for e in self._edge_lengths()))

    @property
    def h_max(self) -> float:
        return float(max(max(e) for e in self._edge_lengths()))

    def patch(self, eta: int) -> list[int]:
        """Indices of the simplices containing vertex ``eta``."""
        return [i for i, row in enumerate(self.simplices) if eta in row]


@dataclass(frozen=True)
class FemFunction:
    """Continuous piecewise-linear function given by its nodal values."""

    mesh: Triangulation
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64).reshape(-1)
        if vals.shape[0] != len(self.mesh.vertices):
            raise ValueError("need one nodal value per vertex")
        if not np.all(np.isfinite(vals)):
            raise ValueError("nodal values must be finite")
        object.__setattr__(self, "values", vals)

    def __call__(self, x) -> float:
        """Barycentric interpolation in the first simplex containing ``x``."""
        x = np.asarray(x, dtype=np.float64).reshape(-1)
        for row in self.mesh.simplices:
            lam = _barycentric(self.mesh.vertices[row], x)
            if lam.min() >= -1e-12:
                return float(lam @ self.values[row])
        raise ValueError(f"point {x} lies outside the mesh")


def _barycentric(p: np.ndarray, x: np.ndarray) -> np.ndarray:
    T = (p[1:] - p[0]).T
    mu = np.linalg.solve(T, x - p[0])
    return np.concatenate([[1.0 - mu.sum()], mu])


def regular_grid_triangulation(
    d0: int, n_per_axis: int, lo: float = 0.0, hi: float = 1.0, pattern: str = "diagonal"
) -> Triangulation:
    """Uniform mesh of ``[lo, hi]^d0``.

    In 2-D, ``pattern="diagonal"`` cuts every square along its lower-left to
    upper-right diagonal (2 triangles per square); ``"criss-cross"`` adds a
    centre vertex and cuts along both diagonals (4 per square). Centre
    vertices are numbered after the grid vertices.
    """
    if n_per_axis < 1:
        raise ValueError("n_per_axis must be >= 1")
    if pattern not in ("diagonal", "criss-cross"):
        raise ValueError(f"unknown pattern {pattern!r}")
    xs = np.linspace(lo, hi, n_per_axis + 1)
    n = n_per_axis
    if d0 == 1:
        return Triangulation(xs[:, None], [[i, i + 1] for i in range(n)])
    if d0 == 2:
        verts = [[x, y] for y in xs for x in xs]

        def vid(i, j):
            return j * (n + 1) + i

        tris = []
        for j in range(n):
            for i in range(n):
                ll, lr, ur, ul = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
                if pattern == "diagonal":
                    tris += [[ll, lr, ur], [ll, ur, ul]]
                else:
                    c = len(verts)
                    verts.append([(xs[i] + xs[i + 1]) / 2, (xs[j] + xs[j + 1]) / 2])
                    tris += [[ll, lr, c], [lr, ur, c], [ur, ul, c], [ul, ll, c]]
        return Triangulation(np.array(verts), tris)
    raise ValueError("only d0 in {1, 2} is supported")


def _solve_pivoted(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting; raises on a tiny pivot."""
    A = A.astype(np.float64).copy()
    b = rhs.astype(np.float64).copy()
    n = len(b)
    row_norm = np.abs(A).max(axis=1)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(A[col:, col])))
        if abs(A[piv, col]) < 1e-12 * row_norm[piv]:
            raise SingularSimplex("interpolation system is singular")
        if piv != col:
            A[[col, piv]] = A[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
            row_norm[[col, piv]] = row_norm[[piv, col]]
        for r in range(col + 1, n):
            f = A[r, col] / A[col, col]
            A[r, col:] -= f * A[col, col:]
            b[r] -= f * b[col]
    x = np.zeros(n)
    for r in range(n - 1, -1, -1):
        x[r] = (b[r] - A[r, r + 1 :] @ x[r + 1 :]) / A[r, r]
    return x


def hat_pieces(mesh: Triangulation, eta: int) -> tuple[np.ndarray, np.ndarray]:
    """Affine extensions ``g_tau(x) = a_tau.x + b_tau`` of the hat at ``eta``.

    Returns ``(A, b)`` with one row per simplex of the patch around ``eta``.
    """
    rows, biases = [], []
    for s in mesh.patch(eta):
        idx = mesh.simplices[s]
        system = np.hstack([mesh.vertices[idx], np.ones((len(idx), 1))])
        coef = _solve_pivoted(system, (idx == eta).astype(np.float64))
        rows.append(coef[:-1])
        biases.append(coef[-1])
    if not rows:
        raise ValueError(f"vertex {eta} belongs to no simplex")
    return np.array(rows), np.array(biases)


def build_hat_net(mesh: Triangulation, eta: int, eps: float, scale: float = 1.0) -> AffineSnn:
    """Emulate ``scale * phi_eta`` within ``|scale| * eps``.

    Uses ``phi = m - min(0, m)`` with ``m = min_tau g_tau``. Node layout: the
    patch inputs ``0..T-1``, the zero input ``T``, the min neuron ``T+1``, and
    the outputs ``T+2`` (min neuron shifted by 1) and ``T+3`` (min with zero).
    Each spiking stage uses tolerance ``eps/3``. The patch ``G(eta)`` must be
    convex; this is not checked.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    A, b = hat_pieces(mesh, eta)
    T = len(b)
    w_min = 3.0 / eps
    u0, w, v1, v2 = T, T + 1, T + 2, T + 3
    edges = [(i, w) for i in range(T)] + [(w, v1), (w, v2), (u0, v2)]
    weights = [w_min] * T + [1.0, w_min, w_min]
    g = build_graph(edges, T + 4)
    core = SnnParams(g, weights, np.zeros(len(edges)))
    enc = AffineMap(np.vstack([A, np.zeros(mesh.d0)]), np.concatenate([b, [0.0]]))
    dec = AffineMap([[scale, -scale]], [-scale])
    return AffineSnn(enc, core, dec)


def build_fem_net(f: FemFunction, eps: float) -> AffineSnn:
    """Sum of scaled hat emulators; error at most ``eps * sum_eta |f(eta)|``."""
    nets = [build_hat_net(f.mesh, eta, eps, scale=f.values[eta]) for eta in range(len(f.values))]
    return add_all(nets)


def load_triangulation(path: str | Path) -> tuple[Triangulation, np.ndarray | None]:
    """Read ``{"vertices": ..., "simplices": ..., "values": optional}``."""
    with open(path) as fh:
        data = json.load(fh)
    mesh = Triangulation(np.array(data["vertices"], dtype=np.float64), data["simplices"])
    values = data.get("values")
    return mesh, None if values is None else np.array(values, dtype=np.float64)


def save_triangulation(path: str | Path, mesh: Triangulation, values=None) -> None:
    data = {"vertices": mesh.vertices.tolist(), "simplices": mesh.simplices.tolist()}
    if values is not None:
        data["values"] = np.asarray(values, dtype=np.float64).tolist()
    with open(path, "w") as fh:
        json.dump(data, fh)
