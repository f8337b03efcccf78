"""Battery dynamics  dE/dt = F = k (w - E)  with the sigmoid mixing term

    w = 1 / (1 + (1 - E)/E * exp(-lambda (I - I_c)))

All functions accept scalars or numpy arrays for ``E`` and ``I``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EnergyDomainError(ValueError):
    """Energy outside the open interval (0, 1) where ``w`` is defined."""


@dataclass(frozen=True)
class EnergyParams:
    k: float = 0.05
    lam: float = 3.0
    i_c: float = 0.85
    e_min: float = 0.2
    e_chg: float = 0.9

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError("k must be positive")
        if self.lam <= 0:
            raise ValueError("lambda must be positive")
        if not 0 < self.i_c < 1:
            raise ValueError("I_c must lie in (0, 1)")
        if not 0 < self.e_min < self.e_chg <= 1:
            raise ValueError("need 0 < E_min < E_chg <= 1")


@dataclass(frozen=True)
class EnergySample:
    E: float
    w: float
    Edot: float
    dF_dE: float
    dF_dI: float


def _check(E):
    E = np.asarray(E, dtype=float)
    if np.any(E <= 0.0) or np.any(E >= 1.0):
        raise EnergyDomainError(f"energy must lie in (0, 1), got {E}")
    return E


def _pieces(params: EnergyParams, E, I):
    E = _check(E)
    ratio = (1.0 - E) / E
    ex = np.exp(-params.lam * (np.asarray(I, dtype=float) - params.i_c))
    w = 1.0 / (1.0 + ratio * ex)
    return E, ratio, ex, w


def eval_w(params: EnergyParams, E, I):
    w = _pieces(params, E, I)[3]
    return float(w) if w.ndim == 0 else w


def eval_F(params: EnergyParams, E, I):
    E, _, _, w = _pieces(params, E, I)
    F = params.k * (w - E)
    return float(F) if F.ndim == 0 else F


def energy_partials(params: EnergyParams, E, I):
    """Return ``(dF/dE, dw/dI)``.

    dw/dI = w^2 (1-E)/E lambda exp(-lambda (I - I_c)),
    dw/dE = w^2 exp(-lambda (I - I_c)) / E^2.
    """
    E, ratio, ex, w = _pieces(params, E, I)
    dw_dI = w * w * ratio * params.lam * ex
    dw_dE = w * w * ex / (E * E)
    dF_dE = params.k * (dw_dE - 1.0)
    if dF_dE.ndim == 0:
        return float(dF_dE), float(dw_dI)
    return dF_dE, dw_dI


def sample(params: EnergyParams, E: float, I: float) -> EnergySample:
    E_, ratio, ex, w = _pieces(params, E, I)
    dw_dI = w * w * ratio * params.lam * ex
    dw_dE = w * w * ex / (E_ * E_)
    return EnergySample(
        E=float(E_), w=float(w), Edot=float(params.k * (w - E_)),
        dF_dE=float(params.k * (dw_dE - 1.0)), dF_dI=float(params.k * dw_dI),
    )


def terms(params: EnergyParams, E, I):
    """Batched ``(F, dF/dE, dF/dI)`` used by the constraint builders."""
    E, ratio, ex, w = _pieces(params, E, I)
    k = params.k
    F = k * (w - E)
    dF_dE = k * (w * w * ex / (E * E) - 1.0)
    dF_dI = k * (w * w * ratio * params.lam * ex)
    return F, dF_dE, dF_dI
