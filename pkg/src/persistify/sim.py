"""Closed-loop simulation of the persistified multi-robot system.

Each step builds the nominal input, the energy rows and the per-robot QPs at
the current state, applies the optimal input over the step and integrates

    dx_i/dt = u_i,      dE_i/dt = F(E_i, I(x_i, t)).

Record k holds the state at t_k = k dt together with the input chosen there.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import energy
from .energy import EnergyParams
from .environment import FieldSpec, InfoDensity, Workspace
from .persistence import (CBF, CLF, DEGENERATE_NORM, VACUOUS_B, CascadeGains, ChargeLatch,
                          ConstraintRow, cbf_terms, clf_terms, kappa)
from .qp import DEGENERATE, INFEASIBLE, OPTIMAL, QpProblem, solve_pair_batch, solve_robot_qp
from .tasks import CoverageState, ErgodicState, coverage_nominal_input, ergodic_nominal_input

E_FLOOR = 1e-4
E_CEIL = 1.0 - 1e-4

STATUS_CODES = {OPTIMAL: 0, INFEASIBLE: 1, DEGENERATE: 2}
STATUS_NAMES = {v: k for k, v in STATUS_CODES.items()}


@dataclass
class PersistenceConfig:
    enabled: bool = True
    clf: bool = True
    cbf_gains: CascadeGains = dc_field(default_factory=CascadeGains)
    clf_gain: float = 1.0
    kappa_max: float = 100.0
    kappa_floor: float = 1e-6
    activation_fraction: float = 0.1
    release_steps: int = 50
    release_margin: float = 1e-3
    eps_row: float = DEGENERATE_NORM
    u_sat: Optional[float] = None

    def __post_init__(self):
        if self.clf_gain <= 0 or self.kappa_max <= 0 or self.kappa_floor <= 0:
            raise ValueError("clf_gain, kappa_max and kappa_floor must be positive")
        if not 0 <= self.activation_fraction <= 1:
            raise ValueError("activation_fraction must lie in [0, 1]")
        if self.release_steps < 1:
            raise ValueError("release_steps must be >= 1")
        if self.u_sat is not None and self.u_sat <= 0:
            raise ValueError("u_sat must be positive")


@dataclass
class TaskConfig:
    kind: str = "explore"
    K: int = 10
    kp: float = 1.0
    grid: tuple[int, int] = (120, 90)
    u_max: float = 0.3
    basis_resolution: int = 200

    def __post_init__(self):
        if self.kind not in ("explore", "coverage"):
            raise ValueError(f"unknown task kind {self.kind!r}")
        if self.K < 1 or self.kp <= 0 or self.u_max <= 0:
            raise ValueError("task needs K >= 1, kp > 0, u_max > 0")
        if min(self.grid) < 1:
            raise ValueError("grid needs at least one cell per axis")


@dataclass
class SimConfig:
    n_robots: int = 1
    dt: float = 0.02
    T: float = 100.0
    integrator: str = "euler"
    seed: int = 0
    initial_positions: Optional[list] = None
    initial_energies: Optional[list] = None
    workspace: Workspace = dc_field(default_factory=Workspace)
    field: FieldSpec = dc_field(default_factory=FieldSpec)
    density: InfoDensity = dc_field(default_factory=InfoDensity)
    energy: EnergyParams = dc_field(default_factory=EnergyParams)
    persistence: PersistenceConfig = dc_field(default_factory=PersistenceConfig)
    task: TaskConfig = dc_field(default_factory=TaskConfig)

    def __post_init__(self):
        if self.n_robots < 1:
            raise ValueError("need at least one robot")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.T < 0:
            raise ValueError("T must be non-negative")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")

    @property
    def n_records(self) -> int:
        return int(math.ceil(self.T / self.dt - 1e-9)) + 1

    def initial_state(self) -> tuple[np.ndarray, np.ndarray]:
        rng = np.random.default_rng(self.seed)
        e = self.energy
        if self.initial_positions is None:
            X = self.workspace.sample(rng, self.n_robots)
        else:
            X = np.array(self.initial_positions, dtype=float).reshape(self.n_robots, 2)
        if self.initial_energies is None:
            E = rng.uniform(e.e_min + 0.1, e.e_chg - 0.1, size=self.n_robots)
        else:
            E = np.array(self.initial_energies, dtype=float).reshape(self.n_robots)
        return X, E


class SimulationError(RuntimeError):
    pass


@dataclass
class SimTrace:
    t: np.ndarray
    x: np.ndarray  # (R, N, 2)
    E: np.ndarray  # (R, N)
    u: np.ndarray
    u_hat: np.ndarray
    delta: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    active: np.ndarray  # (R, N) bit 0: CBF row active, bit 1: CLF row active
    status: np.ndarray  # (R, N) codes of STATUS_CODES
    metric: np.ndarray
    C: np.ndarray
    metric_name: str
    events: list = dc_field(default_factory=list)
    counters: dict = dc_field(default_factory=dict)

    @property
    def n_robots(self) -> int:
        return self.E.shape[1]

    def summary(self, params: EnergyParams | None = None) -> dict:
        out = {
            "records": int(self.t.size),
            "T": float(self.t[-1]),
            "min_E": [float(v) for v in self.E.min(axis=0)],
            "max_E": [float(v) for v in self.E.max(axis=0)],
            "final_metric": float(self.metric[-1]),
            "metric": self.metric_name,
            "final_C": float(self.C[-1]),
            "events": _event_counts(self.events),
            "counters": dict(self.counters),
        }
        if params is not None:
            out["e_min"] = params.e_min
            out["e_chg"] = params.e_chg
            out["band_ok"] = bool(self.E.min() >= params.e_min - 0.02
                                  and self.E.max() <= params.e_chg + 0.02)
        return out


def _event_counts(events) -> dict:
    counts: dict[str, int] = {}
    for ev in events:
        counts[ev["kind"]] = counts.get(ev["kind"], 0) + 1
    return dict(sorted(counts.items()))


@dataclass
class StepRecord:
    u: np.ndarray
    u_hat: np.ndarray
    delta: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    active: np.ndarray
    status: np.ndarray
    metric: float
    Edot: np.ndarray


class Simulator:
    """Owns the mutable per-run state: task accumulators and charge latches."""

    def __init__(self, cfg: SimConfig, X0=None, E0=None):
        self.cfg = cfg
        if X0 is None or E0 is None:
            Xs, Es = cfg.initial_state()
            X0 = Xs if X0 is None else X0
            E0 = Es if E0 is None else E0
        self.X = np.array(X0, dtype=float).reshape(cfg.n_robots, 2)
        self.E = np.clip(np.array(E0, dtype=float).reshape(cfg.n_robots), E_FLOOR, E_CEIL)
        self.t = 0.0
        self.k = 0
        p = cfg.persistence
        self.latch = ChargeLatch(cfg.n_robots, p.release_steps, p.release_margin)
        self.events: list[dict] = []
        self.counters = {"qp_solves": 0, "vacuous_cbf_dropped": 0, "degenerate_clf_dropped": 0}
        tk = cfg.task
        if tk.kind == "explore":
            self.ergodic = ErgodicState(tk.K, cfg.workspace, cfg.density, self.X,
                                        tk.basis_resolution)
            self.coverage = None
        else:
            self.ergodic = None
            self.coverage = CoverageState(cfg.workspace, cfg.density, tk.grid, tk.kp)

    @property
    def metric_name(self) -> str:
        return "ergodic_eps" if self.ergodic is not None else "loc_cost"

    def _event(self, kind: str, robot: int, detail: str = "", step: int | None = None) -> None:
        k = self.k if step is None else step
        self.events.append({"step": k, "t": k * self.cfg.dt, "robot": robot,
                            "kind": kind, "detail": detail})

    def nominal(self) -> tuple[np.ndarray, float]:
        if self.ergodic is not None:
            u = ergodic_nominal_input(self.ergodic, self.X, self.cfg.task.u_max)
            return u, self.ergodic.metric_value()
        u = coverage_nominal_input(self.coverage, self.X, strict=False)
        for i in np.flatnonzero(self.coverage.cells.mass <= 0.0):
            self._event("empty-cell", int(i))
        return u, self.coverage.cells.cost

    def control(self) -> StepRecord:
        cfg, p, e = self.cfg, self.cfg.persistence, self.cfg.energy
        n = cfg.n_robots
        X, E = self.X, self.E
        u_hat, metric = self.nominal()
        I, dI_dx, dI_dt = cfg.field.evaluate(X, self.t)
        pieces = energy.terms(e, E, I)
        cb = cbf_terms(e, p.cbf_gains, E, I, dI_dx, dI_dt, pieces)
        u = u_hat.copy()
        delta = np.zeros(n)
        active = np.zeros(n, dtype=np.int8)
        status = np.zeros(n, dtype=np.int8)
        if p.enabled:
            cl = clf_terms(e, p.clf_gain, E, I, dI_dx, dI_dt, pieces) if p.clf else None
            e_act = e.e_min + p.activation_fraction * (e.e_chg - e.e_min)
            clf_on = ((E < e_act) | self.latch.charging) & (E < e.e_chg - p.release_margin)
            kap = np.maximum(kappa(E, self.latch.charging, p.kappa_max), p.kappa_floor)
            has_cbf = np.hypot(cb.a[:, 0], cb.a[:, 1]) >= p.eps_row
            if not has_cbf.all():
                for i in np.flatnonzero(~has_cbf):
                    if cb.b[i] >= VACUOUS_B:
                        self.counters["vacuous_cbf_dropped"] += 1
                    else:
                        self._event("cbf-infeasible", int(i), f"b={cb.b[i]!r}")
                        status[i] = STATUS_CODES[DEGENERATE]
            if cl is not None:
                has_clf = clf_on & (np.hypot(cl.a[:, 0], cl.a[:, 1]) >= p.eps_row)
                self.counters["degenerate_clf_dropped"] += int(np.count_nonzero(clf_on & ~has_clf))
                a_clf, b_clf = cl.a, cl.b
            else:
                has_clf = np.zeros(n, dtype=bool)
                a_clf, b_clf = np.zeros((n, 2)), np.zeros(n)
            sol = solve_pair_batch(u_hat, kap, cb.a, cb.b, has_cbf, a_clf, b_clf, has_clf)
            u, delta, active = sol.u, sol.delta, sol.active
            self.counters["qp_solves"] += int(np.count_nonzero(active))
            for i in np.flatnonzero(~sol.certified):
                rows = []
                if has_cbf[i]:
                    rows.append(ConstraintRow(cb.a[i], float(cb.b[i]), CBF, int(i)))
                if has_clf[i]:
                    rows.append(ConstraintRow(a_clf[i], float(b_clf[i]), CLF, int(i)))
                full = solve_robot_qp(QpProblem(u_hat[i], float(kap[i]), rows))
                u[i], delta[i] = full.u, full.delta
                active[i] = 0
                for j in full.active:
                    active[i] |= 1 if rows[j].kind == CBF else 2
                if full.status == INFEASIBLE:
                    self._event("qp-infeasible", int(i))
                    status[i] = STATUS_CODES[INFEASIBLE]
            if p.u_sat is not None:
                norm = np.hypot(u[:, 0], u[:, 1])
                over = norm > p.u_sat
                u[over] *= (p.u_sat / norm[over])[:, None]
        return StepRecord(u=u, u_hat=u_hat, delta=delta, h1=cb.h1, h2=cb.h2,
                          active=active, status=status, metric=metric, Edot=pieces[0])

    def _F(self, X, E, t):
        I = self.cfg.field.evaluate(X, t)[0]
        return energy.terms(self.cfg.energy, np.clip(E, E_FLOOR, E_CEIL), I)[0]

    def advance(self, rec: StepRecord) -> None:
        cfg = self.cfg
        dt, X, E, t = cfg.dt, self.X, self.E, self.t
        u = rec.u
        if cfg.integrator == "euler":
            E_new = E + dt * rec.Edot
        else:
            k1 = rec.Edot
            k2 = self._F(X + 0.5 * dt * u, E + 0.5 * dt * k1, t + 0.5 * dt)
            k3 = self._F(X + 0.5 * dt * u, E + 0.5 * dt * k2, t + 0.5 * dt)
            k4 = self._F(X + dt * u, E + dt * k3, t + dt)
            E_new = E + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        X_new = X + dt * u
        if not (np.all(np.isfinite(X_new)) and np.all(np.isfinite(E_new))):
            raise SimulationError(
                f"non-finite state at step {self.k} (t={t!r}): x={X.tolist()} E={E.tolist()} "
                f"u={u.tolist()} u_hat={rec.u_hat.tolist()}")
        clamped = (E_new < E_FLOOR) | (E_new > E_CEIL)
        if clamped.any():
            for i in np.flatnonzero(clamped):
                self._event("energy-clamp", int(i), f"E={E_new[i]!r}", step=self.k + 1)
            E_new = np.clip(E_new, E_FLOOR, E_CEIL)
        self.latch.update(rec.Edot, E_new, cfg.energy.e_chg)
        self.X, self.E = X_new, E_new
        self.k += 1
        self.t = self.k * dt
        if self.ergodic is not None:
            self.ergodic.advance(X_new, dt)


def step(sim: Simulator) -> StepRecord:
    """Choose the input at the current state, then integrate one step."""
    rec = sim.control()
    sim.advance(rec)
    return rec


def run(cfg: SimConfig, X0=None, E0=None) -> SimTrace:
    sim = Simulator(cfg, X0, E0)
    R = cfg.n_records
    n = cfg.n_robots
    tr = SimTrace(
        t=np.arange(R) * cfg.dt,
        x=np.zeros((R, n, 2)), E=np.zeros((R, n)),
        u=np.zeros((R, n, 2)), u_hat=np.zeros((R, n, 2)), delta=np.zeros((R, n)),
        h1=np.zeros((R, n)), h2=np.zeros((R, n)),
        active=np.zeros((R, n), dtype=np.int8), status=np.zeros((R, n), dtype=np.int8),
        metric=np.zeros(R), C=np.zeros(R), metric_name=sim.metric_name,
    )
    dev_prev = 0.0
    for k in range(R):
        tr.x[k], tr.E[k] = sim.X, sim.E
        rec = sim.control()
        tr.u[k], tr.u_hat[k], tr.delta[k] = rec.u, rec.u_hat, rec.delta
        tr.h1[k], tr.h2[k] = rec.h1, rec.h2
        tr.active[k], tr.status[k] = rec.active, rec.status
        tr.metric[k] = rec.metric
        d = rec.u - rec.u_hat
        dev = float(np.sum(d * d))
        if k > 0:
            tr.C[k] = tr.C[k - 1] + 0.5 * cfg.dt * (dev_prev + dev)
        dev_prev = dev
        if k < R - 1:
            sim.advance(rec)
    tr.events = sim.events
    tr.counters = sim.counters
    return tr
