"""Nominal task controllers: spectral ergodic exploration and Lloyd coverage."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .environment import InfoDensity, Workspace, grid_points


# -- ergodic exploration ------------------------------------------------------

def _basis_scale(K: int, ws: Workspace) -> np.ndarray:
    """Normalizers h_k making the cosine basis orthonormal on the workspace."""
    L = ws.lengths
    hx = np.where(np.arange(K) == 0, L[0], L[0] / 2.0)
    hy = np.where(np.arange(K) == 0, L[1], L[1] / 2.0)
    return np.sqrt(np.outer(hx, hy))


def _cos_tables(K: int, ws: Workspace, X: np.ndarray):
    L = ws.lengths
    wx = np.arange(K) * np.pi / L[0]
    wy = np.arange(K) * np.pi / L[1]
    ax = np.outer(X[:, 0] - ws.lower[0], wx)
    ay = np.outer(X[:, 1] - ws.lower[1], wy)
    return np.cos(ax), np.cos(ay), -wx * np.sin(ax), -wy * np.sin(ay)


def basis_values(K: int, ws: Workspace, X) -> np.ndarray:
    """All K x K basis functions at each row of X, shape (n, K, K)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cx, cy, _, _ = _cos_tables(K, ws, X)
    return cx[:, :, None] * cy[:, None, :] / _basis_scale(K, ws)


def basis_gradients(K: int, ws: Workspace, X) -> np.ndarray:
    """Spatial gradients of the basis, shape (n, K, K, 2)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cx, cy, sx, sy = _cos_tables(K, ws, X)
    hk = _basis_scale(K, ws)
    gx = sx[:, :, None] * cy[:, None, :] / hk
    gy = cx[:, :, None] * sy[:, None, :] / hk
    return np.stack([gx, gy], axis=-1)


def fourier_basis(k, x, ws: Workspace) -> float:
    k1, k2 = int(k[0]), int(k[1])
    K = max(k1, k2) + 1
    return float(basis_values(K, ws, np.asarray(x, float)[None, :])[0, k1, k2])


def spectral_weights(K: int) -> np.ndarray:
    kk = np.arange(K)
    xi2 = kk[:, None] ** 2 + kk[None, :] ** 2
    return (1.0 + xi2) ** -1.5


def density_coefficients(K: int, ws: Workspace, density: InfoDensity,
                         resolution: int = 200) -> np.ndarray:
    """Coefficients of the density normalized to unit mass on the workspace."""
    P, area = grid_points(ws, (resolution, resolution))
    phi = density.evaluate(P)
    phi = phi / (phi.sum() * area)
    cx, cy, _, _ = _cos_tables(K, ws, P)
    coef = np.einsum("g,gi,gj->ij", phi * area, cx, cy)
    return coef / _basis_scale(K, ws)


class ErgodicState:
    """Time-averaged trajectory coefficients of a robot team.

    ``c_k(t) = (1 / (N t)) sum_i int_0^t f_k(x_i) dtau`` with the integral
    accumulated by the trapezoidal rule.  Before any time has elapsed the
    coefficients are taken as their t -> 0 limit, the mean of f_k(x_i(0)).
    """

    def __init__(self, K: int, ws: Workspace, density: InfoDensity, X0,
                 resolution: int = 200):
        self.K = int(K)
        self.ws = ws
        self.weights = spectral_weights(self.K)
        self.phi_k = density_coefficients(self.K, ws, density, resolution)
        self._inv_h = 1.0 / _basis_scale(self.K, ws)
        L = ws.lengths
        self._wx = np.arange(self.K) * np.pi / L[0]
        self._wy = np.arange(self.K) * np.pi / L[1]
        self._lo = np.asarray(ws.lower, dtype=float)
        X0 = np.atleast_2d(np.asarray(X0, dtype=float))
        self.n = X0.shape[0]
        self._cache_key = None
        self._last = self.values(X0).sum(axis=0)
        self.integral = np.zeros((self.K, self.K))
        self.elapsed = 0.0

    def _tables(self, X):
        key = X.tobytes()
        if key != self._cache_key:
            ax = np.multiply.outer(X[:, 0] - self._lo[0], self._wx)
            ay = np.multiply.outer(X[:, 1] - self._lo[1], self._wy)
            self._tab = (np.cos(ax), np.cos(ay), np.sin(ax), np.sin(ay))
            self._cache_key = key
        return self._tab

    def values(self, X) -> np.ndarray:
        cx, cy, _, _ = self._tables(X)
        return cx[:, :, None] * cy[:, None, :] * self._inv_h

    def gradients(self, X) -> np.ndarray:
        cx, cy, sx, sy = self._tables(X)
        gx = -(self._wx * sx)[:, :, None] * cy[:, None, :] * self._inv_h
        gy = -cx[:, :, None] * (self._wy * sy)[:, None, :] * self._inv_h
        return np.stack([gx, gy], axis=-1)

    def advance(self, X, dt: float) -> None:
        now = self.values(np.atleast_2d(np.asarray(X, dtype=float))).sum(axis=0)
        self.integral += 0.5 * dt * (self._last + now)
        self._last = now
        self.elapsed += dt

    @property
    def coefficients(self) -> np.ndarray:
        if self.elapsed <= 0.0:
            return self._last / self.n
        return self.integral / (self.n * self.elapsed)

    def metric_value(self) -> float:
        d = self.coefficients - self.phi_k
        return float(np.sum(self.weights * d * d))


def ergodic_metric(s: ErgodicState) -> float:
    if s.elapsed <= 0.0:
        raise ValueError("ergodic metric is undefined before any time has elapsed")
    return s.metric_value()


def ergodic_nominal_input(s: ErgodicState, X, u_max: float) -> np.ndarray:
    """Normalized descent direction on the ergodic metric for each robot."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    grads = s.gradients(X)
    coeff = s.weights * (s.coefficients - s.phi_k)
    B = np.einsum("ij,nijd->nd", coeff, grads)
    norm = np.linalg.norm(B, axis=1)
    out = np.zeros_like(B)
    live = norm >= 1e-9
    out[live] = -u_max * B[live] / norm[live, None]
    return out


# -- coverage -----------------------------------------------------------------

class EmptyCellError(RuntimeError):
    pass


@dataclass
class CoverageCells:
    owner: np.ndarray  # (G,) robot index per grid cell
    mass: np.ndarray  # (N,)
    centroids: np.ndarray  # (N, 2)
    cost: float


@njit(cache=True)
def _partition_kernel(P, w, X):
    G = P.shape[0]
    n = X.shape[0]
    owner = np.empty(G, dtype=np.int64)
    mass = np.zeros(n)
    mx = np.zeros(n)
    my = np.zeros(n)
    cost = 0.0
    for g in range(G):
        px = P[g, 0]
        py = P[g, 1]
        best = np.inf
        k = 0
        for i in range(n):
            dx = px - X[i, 0]
            dy = py - X[i, 1]
            d = dx * dx + dy * dy
            if d < best:  # strict: ties stay with the lowest index
                best = d
                k = i
        owner[g] = k
        mass[k] += w[g]
        mx[k] += w[g] * px
        my[k] += w[g] * py
        cost += w[g] * best
    return owner, mass, mx, my, cost


class CoverageState:
    """Grid quadrature of the density used for Voronoi cells and centroids."""

    def __init__(self, ws: Workspace, density: InfoDensity, grid=(120, 90), kp: float = 1.0):
        self.ws = ws
        self.kp = float(kp)
        self.grid = (int(grid[0]), int(grid[1]))
        self.points, self.cell_area = grid_points(ws, self.grid)
        self.weights = density.evaluate(self.points) * self.cell_area
        self.cells: CoverageCells | None = None

    def partition(self, X, strict: bool = True) -> CoverageCells:
        """Voronoi cells on the grid.

        With ``strict=False`` a robot owning no mass (e.g. coincident with a
        lower-indexed robot) gets its own position as centroid.
        """
        X = np.ascontiguousarray(np.atleast_2d(np.asarray(X, dtype=float)))
        owner, mass, mx, my, cost = _partition_kernel(self.points, self.weights, X)
        empty = mass <= 0.0
        if empty.any():
            if strict:
                raise EmptyCellError(f"robot(s) {np.flatnonzero(empty).tolist()} own no mass")
            safe = np.where(empty, 1.0, mass)
            centroids = np.column_stack([mx / safe, my / safe])
            centroids[empty] = X[empty]
        else:
            centroids = np.column_stack([mx / mass, my / mass])
        cells = CoverageCells(owner=owner, mass=mass, centroids=centroids, cost=cost)
        self.cells = cells
        return cells


def coverage_nominal_input(cs: CoverageState, X, strict: bool = True) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cells = cs.partition(X, strict)
    return cs.kp * (cells.centroids - X)


def locational_cost(cs: CoverageState, X, d: InfoDensity | None = None) -> float:
    """Sum over robots of the density-weighted squared distance over its cell."""
    if d is None:
        return cs.partition(X).cost
    X = np.atleast_2d(np.asarray(X, dtype=float))
    P = cs.points
    D = ((P[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
    w = d.evaluate(P) * cs.cell_area
    return float(np.dot(D.min(axis=1), w))


def cumulative_deviation(t, u, u_hat) -> np.ndarray:
    """Trapezoidal C(t) = int_0^t |u - u_hat|^2 over all robots.

    ``u`` and ``u_hat`` have shape (steps, N, m) or (steps, m).
    """
    t = np.asarray(t, dtype=float)
    diff = np.asarray(u, dtype=float) - np.asarray(u_hat, dtype=float)
    sq = (diff * diff).reshape(len(t), -1).sum(axis=1)
    out = np.zeros(len(t))
    if len(t) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (sq[1:] + sq[:-1]))
    return out
