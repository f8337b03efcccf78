"""Workspace, charging field I(x, t) and information density phi(x).

Every field evaluates on a batch of positions at once: ``X`` has shape
``(n, 2)`` and the returned values have leading dimension ``n``.  The
single-point helpers ``eval_field``/``field_gradients``/``eval_density`` wrap
the batched versions for callers holding one robot.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

FIELD_KINDS = ("gaussian-mixture-time-varying", "bump-stations", "constant")
DENSITY_KINDS = ("gaussian", "constant")


@dataclass(frozen=True)
class Workspace:
    lower: tuple[float, float] = (-1.5, -1.0)
    upper: tuple[float, float] = (1.5, 1.0)

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=float)
        hi = np.asarray(self.upper, dtype=float)
        if lo.shape != (2,) or hi.shape != (2,):
            raise ValueError("workspace corners must be 2-vectors")
        if not np.all(hi > lo):
            raise ValueError(f"workspace upper {self.upper} must exceed lower {self.lower}")

    @property
    def lengths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower).astype(float)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower, float) + np.asarray(self.upper, float))

    def contains(self, x, margin: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.asarray(self.lower) - margin)
                    and np.all(x <= np.asarray(self.upper) + margin))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, 2))


@dataclass(frozen=True)
class Modulation:
    """Per-axis scalar ``offset + amplitude * sin(omega * t + phase)``."""

    offset: float = 1.0
    amplitude: float = 0.0
    omega: float = 0.0
    phase: float = 0.0

    def value(self, t: float) -> float:
        return self.offset + self.amplitude * np.sin(self.omega * t + self.phase)

    def rate(self, t: float) -> float:
        return self.amplitude * self.omega * np.cos(self.omega * t + self.phase)


@dataclass(frozen=True)
class GaussianComponent:
    """``weight * exp(-|x - M(t) x_c|^2 / width^2)`` with diagonal ``M(t)``."""

    center: tuple[float, float]
    width: float = 1.0
    weight: float = 1.0
    modulation: tuple[Modulation, Modulation] = (Modulation(), Modulation())

    def moving_center(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        c = np.asarray(self.center, dtype=float)
        m = np.array([self.modulation[0].value(t), self.modulation[1].value(t)])
        dm = np.array([self.modulation[0].rate(t), self.modulation[1].rate(t)])
        return m * c, dm * c


def two_lobe_components() -> tuple[GaussianComponent, ...]:
    """Two unit Gaussians whose centers are M1(t) x_c and M2(t) x_c, x_c = (1, 1),
    with M1 = diag(-1, sin 2t) and M2 = diag(sin 2t, 1)."""
    sin2t = Modulation(offset=0.0, amplitude=1.0, omega=2.0)
    return (
        GaussianComponent(center=(1.0, 1.0), modulation=(Modulation(offset=-1.0), sin2t)),
        GaussianComponent(center=(1.0, 1.0), modulation=(sin2t, Modulation(offset=1.0))),
    )


@dataclass(frozen=True)
class FieldSpec:
    """Charging field. Values are clamped into [0, 1].

    ``bump-stations`` fields combine per-station bumps as
    ``1 - prod_j (1 - plateau * beta_j)``: each ``beta_j`` is 1 inside
    ``station_radius`` and falls off as ``exp(-((r - station_radius)/falloff)^2)``
    outside, so the gradient never vanishes away from the plateaus.
    """

    kind: str = "constant"
    value: float = 0.5
    components: tuple[GaussianComponent, ...] = ()
    stations: tuple[tuple[float, float], ...] = ()
    station_radius: float = 0.1
    plateau: float = 1.0
    falloff: float = 1.0

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {self.kind!r}")
        if self.kind == "constant" and not 0.0 <= self.value <= 1.0:
            raise ValueError("constant field value must lie in [0, 1]")
        if self.kind == "gaussian-mixture-time-varying":
            if not self.components:
                raise ValueError("gaussian mixture needs at least one component")
            for c in self.components:
                if c.width <= 0 or c.weight < 0:
                    raise ValueError("gaussian components need width > 0 and weight >= 0")
        if self.kind == "bump-stations":
            if not self.stations:
                raise ValueError("bump-stations field needs at least one station")
            if self.station_radius < 0 or self.falloff <= 0 or not 0 < self.plateau <= 1:
                raise ValueError("bump stations need radius >= 0, falloff > 0, plateau in (0, 1]")

    @classmethod
    def two_lobe(cls) -> "FieldSpec":
        return cls(kind="gaussian-mixture-time-varying", components=two_lobe_components())

    @cached_property
    def _mixture_arrays(self):
        comps = self.components
        mod = [[(m.offset, m.amplitude, m.omega, m.phase) for m in c.modulation] for c in comps]
        mod = np.array(mod, dtype=float)  # (m, 2, 4)
        return (np.array([c.center for c in comps], dtype=float),
                np.array([1.0 / (c.width * c.width) for c in comps]),
                np.array([c.weight for c in comps], dtype=float),
                mod[..., 0], mod[..., 1], mod[..., 2], mod[..., 3])

    # -- batched evaluation -------------------------------------------------

    def evaluate(self, X, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return ``(I, dI/dx, dI/dt)`` for positions ``X`` of shape (n, 2)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n = X.shape[0]
        if self.kind == "constant":
            return np.full(n, float(self.value)), np.zeros((n, 2)), np.zeros(n)
        if self.kind == "gaussian-mixture-time-varying":
            raw, grad, dt = _gaussian_mixture(self._mixture_arrays, X, t)
        else:
            raw, grad, dt = self._stations(X)
        # clamping zeroes the derivatives where the raw sum saturates
        over = raw > 1.0
        under = raw < 0.0
        if over.any() or under.any():
            sat = over | under
            raw = np.clip(raw, 0.0, 1.0)
            grad[sat] = 0.0
            dt[sat] = 0.0
        return raw, grad, dt

    def _stations(self, X):
        S = np.asarray(self.stations, dtype=float).reshape(-1, 2)
        D = X[:, None, :] - S[None, :, :]
        r = np.sqrt(np.einsum("nsk,nsk->ns", D, D))
        s = np.maximum(r - self.station_radius, 0.0) / self.falloff
        beta = np.exp(-s * s)
        dbeta_dr = -2.0 * s * beta / self.falloff
        with np.errstate(invalid="ignore", divide="ignore"):
            unit = np.where(r[..., None] > 0, D / r[..., None], 0.0)
        p = self.plateau * beta
        one_minus = 1.0 - p
        total = np.prod(one_minus, axis=1)
        value = 1.0 - total
        # d(1 - prod(1 - p_j))/dx = sum_j p_j' prod_{m != j}(1 - p_m)
        others = _prod_except(one_minus)
        grad = np.einsum("ns,nsk->nk", self.plateau * dbeta_dr * others, unit)
        return value, grad, np.zeros(X.shape[0])


def _prod_except(a: np.ndarray) -> np.ndarray:
    """Row-wise product of all entries but one, without dividing by zero."""
    n, m = a.shape
    out = np.ones_like(a)
    left = np.ones(n)
    for j in range(m):
        out[:, j] = left
        left = left * a[:, j]
    right = np.ones(n)
    for j in range(m - 1, -1, -1):
        out[:, j] *= right
        right = right * a[:, j]
    return out


def _gaussian_mixture(arrays, X, t):
    xc, inv_w2, weight, off, amp, om, ph = arrays
    arg = om * t + ph
    c = (off + amp * np.sin(arg)) * xc  # (m, 2) moving centers
    cdot = amp * om * np.cos(arg) * xc
    D = X[:, None, :] - c[None, :, :]  # (n, m, 2)
    g = weight * np.exp(-(D[..., 0] ** 2 + D[..., 1] ** 2) * inv_w2)  # (n, m)
    k = 2.0 * inv_w2 * g
    grad = -np.einsum("nm,nmk->nk", k, D)
    dt = np.einsum("nm,nmk,mk->n", k, D, cdot)
    return g.sum(axis=1), grad, dt


def eval_field(spec: FieldSpec, x, t: float) -> float:
    return float(spec.evaluate(np.asarray(x, float)[None, :], t)[0][0])


def field_gradients(spec: FieldSpec, x, t: float) -> tuple[np.ndarray, float]:
    _, grad, dt = spec.evaluate(np.asarray(x, float)[None, :], t)
    return grad[0], float(dt[0])


@dataclass(frozen=True)
class InfoDensity:
    kind: str = "gaussian"
    center: tuple[float, float] = (0.0, 0.0)
    variance: float = 0.1
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in DENSITY_KINDS:
            raise ValueError(f"unknown density kind {self.kind!r}")
        if self.variance <= 0:
            raise ValueError("density variance must be positive")
        if self.kind == "constant" and self.value <= 0:
            raise ValueError("constant density must be positive")

    def evaluate(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "constant":
            return np.full(X.shape[0], float(self.value))
        D = X - np.asarray(self.center, dtype=float)
        return np.exp(-(D[:, 0] ** 2 + D[:, 1] ** 2) / self.variance)


def eval_density(d: InfoDensity, x) -> float:
    return float(d.evaluate(np.asarray(x, float)[None, :])[0])


def grid_points(ws: Workspace, shape: Sequence[int]) -> tuple[np.ndarray, float]:
    """Cell-center grid over the workspace and the area of one cell."""
    nx, ny = int(shape[0]), int(shape[1])
    L = ws.lengths
    hx, hy = L[0] / nx, L[1] / ny
    xs = ws.lower[0] + hx * (np.arange(nx) + 0.5)
    ys = ws.lower[1] + hy * (np.arange(ny) + 0.5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]), hx * hy
