"""Energy constraint rows for single-integrator robots.

The band barrier h1 = (E_chg - E)(E - E_min) has relative degree two, so the
row is built from h2 = dh1/dt + g1 h1 and asks for dh2/dt + g2 h2 >= 0.  The
recharge Lyapunov function V = (E_chg - E)^2 is treated the same way through
h = -L_f V.  Rows are stored in ``a . u <= b`` form.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import energy
from .energy import EnergyParams
from .environment import FieldSpec

CBF = "CBF-hard"
CLF = "CLF-relaxable"

DEGENERATE_NORM = 1e-10
VACUOUS_B = -1e-8


@dataclass(frozen=True)
class AugmentedState:
    x: np.ndarray
    E: float
    t: float = 0.0
    charging: bool = False


@dataclass(frozen=True)
class ConstraintRow:
    a: np.ndarray
    b: float
    kind: str
    robot: int = 0

    @property
    def degenerate(self) -> bool:
        return float(np.linalg.norm(self.a)) < DEGENERATE_NORM


@dataclass(frozen=True)
class CascadeGains:
    g1: float = 1.0
    g2: float = 1.0

    def __post_init__(self):
        if self.g1 <= 0 or self.g2 <= 0:
            raise ValueError("cascade gains must be positive")


def cbf_h1(E, params: EnergyParams):
    return (params.e_chg - E) * (E - params.e_min)


def clf_V(E, params: EnergyParams):
    return (params.e_chg - E) ** 2


@dataclass
class CbfTerms:
    """Ingredients of the band-barrier row, one entry per robot."""

    h1: np.ndarray
    Lf_h1: np.ndarray
    h2: np.ndarray
    dh2_dt: np.ndarray
    Lf2_h1: np.ndarray
    LgLf_h1: np.ndarray  # (n, 2)
    a: np.ndarray
    b: np.ndarray


@dataclass
class ClfTerms:
    V: np.ndarray
    Lf_V: np.ndarray
    h: np.ndarray  # -L_f V
    dh_dt: np.ndarray
    Lf2_V: np.ndarray
    LgLf_V: np.ndarray
    a: np.ndarray
    b: np.ndarray


def cbf_terms(params: EnergyParams, gains: CascadeGains, E, I, dI_dx, dI_dt,
              pieces=None) -> CbfTerms:
    """``pieces`` may carry a precomputed ``energy.terms(params, E, I)``."""
    E = np.asarray(E, dtype=float)
    F, dF_dE, dF_dI = energy.terms(params, E, I) if pieces is None else pieces
    s = params.e_chg + params.e_min - 2.0 * E
    h1 = cbf_h1(E, params)
    Lf_h1 = s * F
    h2 = Lf_h1 + gains.g1 * h1
    dh2_dt = s * dF_dI * np.asarray(dI_dt, dtype=float)
    Lf2_h1 = (-2.0 * F + s * dF_dE) * F
    LgLf_h1 = (s * dF_dI)[..., None] * np.asarray(dI_dx, dtype=float)
    a = -LgLf_h1
    b = dh2_dt + Lf2_h1 + gains.g1 * Lf_h1 + gains.g2 * h2
    return CbfTerms(h1, Lf_h1, h2, dh2_dt, Lf2_h1, LgLf_h1, a, b)


def clf_terms(params: EnergyParams, g2: float, E, I, dI_dx, dI_dt, pieces=None) -> ClfTerms:
    E = np.asarray(E, dtype=float)
    F, dF_dE, dF_dI = energy.terms(params, E, I) if pieces is None else pieces
    gap = params.e_chg - E
    V = gap * gap
    Lf_V = -2.0 * gap * F
    h = -Lf_V
    dh_dt = 2.0 * gap * dF_dI * np.asarray(dI_dt, dtype=float)
    Lf2_V = (2.0 * F - 2.0 * gap * dF_dE) * F
    LgLf_V = (-2.0 * gap * dF_dI)[..., None] * np.asarray(dI_dx, dtype=float)
    b = dh_dt - Lf2_V + g2 * h
    return ClfTerms(V, Lf_V, h, dh_dt, Lf2_V, LgLf_V, LgLf_V, b)


def build_cbf_row(z: AugmentedState, field: FieldSpec, params: EnergyParams,
                  gains: CascadeGains, t: float, robot: int = 0) -> ConstraintRow:
    I, dI_dx, dI_dt = field.evaluate(np.asarray(z.x, float)[None, :], t)
    T = cbf_terms(params, gains, np.array([z.E]), I, dI_dx, dI_dt)
    return ConstraintRow(a=T.a[0].copy(), b=float(T.b[0]), kind=CBF, robot=robot)


def build_clf_row(z: AugmentedState, field: FieldSpec, params: EnergyParams,
                  g2: float, t: float, robot: int = 0) -> ConstraintRow:
    I, dI_dx, dI_dt = field.evaluate(np.asarray(z.x, float)[None, :], t)
    T = clf_terms(params, g2, np.array([z.E]), I, dI_dx, dI_dt)
    return ConstraintRow(a=T.a[0].copy(), b=float(T.b[0]), kind=CLF, robot=robot)


def kappa(E, charging: bool, kappa_max: float):
    """Hysteretic relaxation weight: sqrt(1 - E^2) while charging,
    1 - sqrt(1 - (E - 1)^2) otherwise, both scaled by ``kappa_max``."""
    E = np.clip(np.asarray(E, dtype=float), 0.0, 1.0)
    if np.ndim(charging) == 0:
        shape = np.sqrt(1.0 - E * E) if charging else 1.0 - np.sqrt(1.0 - (E - 1.0) ** 2)
    else:
        shape = np.where(charging, np.sqrt(1.0 - E * E), 1.0 - np.sqrt(1.0 - (E - 1.0) ** 2))
    out = kappa_max * shape
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class ChargeLatch:
    """Per-robot charging branch selector with release hysteresis.

    Set after one step with dE/dt > 0; cleared once E reaches
    ``E_chg - release_margin`` or dE/dt < 0 for ``release_steps`` consecutive
    steps.
    """

    n: int
    release_steps: int = 50
    release_margin: float = 1e-3

    def __post_init__(self):
        self.charging = np.zeros(self.n, dtype=bool)
        self._falling = np.zeros(self.n, dtype=int)

    def update(self, Edot: np.ndarray, E: np.ndarray, e_chg: float) -> None:
        rising = Edot > 0
        self._falling = np.where(Edot < 0, self._falling + 1, 0)
        self.charging |= rising
        release = (E >= e_chg - self.release_margin) | (self._falling >= self.release_steps)
        self.charging &= ~release
