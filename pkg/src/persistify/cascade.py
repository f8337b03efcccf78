"""Affine input rows for high relative degree barrier and Lyapunov functions.

Given  dx/dt = f(x) + g(x) u  and a base function of relative degree rho, the
row is produced by the recursion

    h_{n+1} = L_f h_n + gamma_n h_n,       n = 1 .. rho-1,

and then imposing  dh_rho/dt + gamma_rho h_rho >= 0,  i.e.

    -L_g h_rho . u <= L_f h_rho + gamma_rho h_rho.

For a Lyapunov base V the recursion starts from h_1 = -L_f V, which has
relative degree rho - 1.  Time-varying systems are handled by appending t to
the state with dt/dt = 1.

Derivatives are taken either with nested forward-mode ``jax.jvp`` (callables
must be written with ``jax.numpy``) or with nested central differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .persistence import CBF, ConstraintRow


class RelativeDegreeError(ValueError):
    pass


@dataclass
class GenericCascadeSystem:
    f: Callable
    g: Callable
    base: Callable
    rho: int
    gains: Sequence[float]
    lyapunov: bool = False
    time_varying: bool = False

    def __post_init__(self):
        if self.rho < 1:
            raise ValueError("relative degree must be >= 1")
        need = self.rho - 1 if self.lyapunov else self.rho
        if len(self.gains) != need:
            raise ValueError(f"expected {need} gains, got {len(self.gains)}")
        if any(gm <= 0 for gm in self.gains):
            raise ValueError("cascade gains must be positive")


def _fd_step(depth: int) -> float:
    return 1e-4 if depth <= 2 else 1e-3


class _Calculus:
    """Lie derivatives on the (possibly time-augmented) state z."""

    def __init__(self, sys: GenericCascadeSystem, method: str):
        self.method = method
        if method == "jvp":
            import jax
            jax.config.update("jax_enable_x64", True)
            import jax.numpy as jnp
            self.jax, self.xp = jax, jnp
        elif method == "fd":
            self.xp = np
        else:
            raise ValueError(f"unknown differentiation method {method!r}")
        xp = self.xp
        if sys.time_varying:
            self.f = lambda z: xp.concatenate([xp.asarray(sys.f(z[:-1], z[-1])), xp.ones(1)])
            self.g = lambda z: xp.concatenate(
                [xp.atleast_2d(xp.asarray(sys.g(z[:-1], z[-1]))),
                 xp.zeros((1, _input_dim(sys, z, xp)))], axis=0)
            self.base = lambda z: sys.base(z[:-1], z[-1])
        else:
            self.f = lambda z: xp.asarray(sys.f(z))
            self.g = lambda z: xp.atleast_2d(xp.asarray(sys.g(z)))
            self.base = sys.base

    def directional(self, h, depth: int):
        """Return ``(z, v) -> dh(z)[v]`` for functions at nesting ``depth``."""
        if self.method == "jvp":
            jax = self.jax
            return lambda z, v: jax.jvp(h, (z,), (v,))[1]
        step = _fd_step(depth)

        def d(z, v):
            nv = float(np.linalg.norm(v))
            if nv == 0.0:
                return 0.0
            s = step / max(1.0, nv)
            return (h(z + s * v) - h(z - s * v)) / (2.0 * s)
        return d

    def lie_f(self, h, depth: int):
        d = self.directional(h, depth)
        return lambda z: d(z, self.f(z))

    def lie_g(self, h, depth: int, z):
        d = self.directional(h, depth)
        G = self.g(z)
        return np.array([float(d(z, G[:, j])) for j in range(G.shape[1])])


def _input_dim(sys, z, xp):
    return int(np.atleast_2d(np.asarray(sys.g(z[:-1], z[-1]))).shape[1])


def generic_cascade(sys: GenericCascadeSystem, x, t: float = 0.0, method: str = "jvp",
                    zero_tol: float | None = None) -> ConstraintRow:
    """Row ``a . u <= b`` for the cascade of ``sys`` at state ``x``.

    ``zero_tol`` decides when an input coefficient counts as zero in the
    relative degree check; it defaults to 1e-8 for ``jvp`` and 1e-3 for the
    noisier ``fd`` route.
    """
    if zero_tol is None:
        zero_tol = 1e-8 if method == "jvp" else 1e-3
    calc = _Calculus(sys, method)
    xp = calc.xp
    x = np.asarray(x, dtype=float)
    z = np.concatenate([x, [float(t)]]) if sys.time_varying else x
    z = xp.asarray(z)

    def scale_of(v):
        return 1.0 + float(np.max(np.abs(v)))

    if sys.lyapunov:
        V = calc.base
        LgV = calc.lie_g(V, 1, z)
        if sys.rho == 1:
            if np.linalg.norm(LgV) <= zero_tol:
                raise RelativeDegreeError("relative degree mismatch: L_g V vanishes")
            return ConstraintRow(a=LgV, b=-float(calc.lie_f(V, 1)(z)), kind=CBF)
        if np.linalg.norm(LgV) > zero_tol * scale_of(LgV):
            raise RelativeDegreeError("relative degree mismatch: L_g V does not vanish")
        LfV = calc.lie_f(V, 1)
        h = lambda zz: -LfV(zz)
        levels = sys.rho - 1
        depth = 2
    else:
        h = calc.base
        levels = sys.rho
        depth = 1

    gains = [float(gm) for gm in sys.gains]
    for n in range(levels - 1):
        Lg = calc.lie_g(h, depth, z)
        if np.linalg.norm(Lg) > zero_tol:
            raise RelativeDegreeError(
                f"relative degree mismatch: input appears after {n + 1} derivative(s)")
        h = _next_level(calc.lie_f(h, depth), h, gains[n])
        depth += 1

    Lg = calc.lie_g(h, depth, z)
    if np.linalg.norm(Lg) <= zero_tol:
        raise RelativeDegreeError("relative degree mismatch: input does not appear")
    Lf = float(calc.lie_f(h, depth)(z))
    hv = float(h(z))
    return ConstraintRow(a=-Lg, b=Lf + gains[-1] * hv, kind=CBF)


def _next_level(lie, h, gamma):
    return lambda z: lie(z) + gamma * h(z)
