"""Per-robot minimally invasive QP

    minimize    |u - u_hat|^2 + kappa * delta^2
    subject to  a . u          <= b     (hard rows)
                a . u - delta  <= b     (relaxable rows)
                |u_j| <= u_max          (optional box)

solved exactly with a dual active-set method.  The Hessian is diagonal, so
the problem is rescaled into a Euclidean projection onto a polyhedron before
the active-set iterations; the final active set is then re-solved through its
KKT system so the returned point is exact up to one linear solve.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from .persistence import CBF, CLF, ConstraintRow

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
DEGENERATE = "degenerate-row-dropped"
STATUSES = (OPTIMAL, INFEASIBLE, DEGENERATE)


@dataclass
class QpProblem:
    u_hat: np.ndarray
    kappa: float = 1.0
    rows: Sequence[ConstraintRow] = ()
    u_max: float | None = None

    def __post_init__(self):
        self.u_hat = np.asarray(self.u_hat, dtype=float)
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.u_max is not None and self.u_max <= 0:
            raise ValueError("u_max must be positive")

    @property
    def relaxed(self) -> bool:
        return any(r.kind == CLF for r in self.rows)

    def matrices(self):
        """Stacked ``(H, z_hat, A, b, hard)`` over z = (u, delta?).

        The objective is ``(z - z_hat)^T H (z - z_hat)`` with H diagonal
        (returned as its diagonal).
        """
        m = self.u_hat.size
        relaxed = self.relaxed
        n = m + int(relaxed)
        H = np.ones(n)
        z_hat = np.zeros(n)
        z_hat[:m] = self.u_hat
        if relaxed:
            H[m] = self.kappa
        A_rows, b, hard = [], [], []
        for r in self.rows:
            row = np.zeros(n)
            row[:m] = r.a
            if r.kind == CLF:
                row[m] = -1.0
            A_rows.append(row)
            b.append(r.b)
            hard.append(r.kind != CLF)
        if self.u_max is not None:
            for j in range(m):
                for sign in (1.0, -1.0):
                    row = np.zeros(n)
                    row[j] = sign
                    A_rows.append(row)
                    b.append(self.u_max)
                    hard.append(True)
        A = np.array(A_rows, dtype=float).reshape(len(A_rows), n)
        return H, z_hat, A, np.array(b, dtype=float), np.array(hard, dtype=bool)


@dataclass
class QpSolution:
    u: np.ndarray
    delta: float
    active: tuple[int, ...]
    objective: float
    kkt_residual: float
    status: str = OPTIMAL
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))


def objective(H, z_hat, z) -> float:
    d = z - z_hat
    return float(np.dot(H * d, d))


def kkt_residual(H, z_hat, A, b, z, mu) -> float:
    """Max of stationarity, primal, dual and complementarity violations."""
    if A.shape[0] == 0:
        return float(np.max(np.abs(2.0 * H * (z - z_hat)), initial=0.0))
    slack = A @ z - b
    stat = 2.0 * H * (z - z_hat) + A.T @ mu
    return float(max(
        np.max(np.abs(stat)),
        max(0.0, float(np.max(slack))),
        max(0.0, float(-np.min(mu))),
        float(np.max(np.abs(mu * slack))),
    ))


def _solve_eqp(H, z_hat, A, b, idx):
    """Minimize the objective on {A[idx] z = b[idx]}; returns (z, mu_idx) or None."""
    n = H.size
    q = len(idx)
    if q == 0:
        return z_hat.copy(), np.zeros(0)
    Aw = A[list(idx)]
    K = np.zeros((n + q, n + q))
    K[:n, :n] = np.diag(2.0 * H)
    K[:n, n:] = Aw.T
    K[n:, :n] = Aw
    rhs = np.concatenate([2.0 * H * z_hat, b[list(idx)]])
    try:
        sol = np.linalg.solve(K, rhs)
        # refinement with the residual in extended precision
        Kl, rl = K.astype(np.longdouble), rhs.astype(np.longdouble)
        for _ in range(2):
            r = (rl - Kl @ sol.astype(np.longdouble)).astype(float)
            sol = sol + np.linalg.solve(K, r)
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(sol)):
        return None
    return sol[:n], sol[n:]


def _finish(problem_m, H, z_hat, A, b, z, mu, active, status=OPTIMAL) -> QpSolution:
    m = problem_m
    delta = float(z[m]) if z.size > m else 0.0
    return QpSolution(
        u=z[:m].copy(), delta=delta, active=tuple(sorted(active)),
        objective=objective(H, z_hat, z),
        kkt_residual=kkt_residual(H, z_hat, A, b, z, mu),
        status=status, multipliers=mu,
    )


def _fallback(problem: QpProblem, H, z_hat, A, b, hard) -> QpSolution:
    """Project u_hat onto the single hard halfspace whose projection leaves
    the smallest worst-case violation of the other hard rows."""
    m = problem.u_hat.size
    Ah, bh = A[hard], b[hard]
    best, best_viol = None, np.inf
    for j in range(Ah.shape[0]):
        aj = Ah[j, :m]
        nn = float(aj @ aj)
        u = problem.u_hat.copy()
        if nn > 0:
            u = u - max(0.0, (aj @ u - bh[j]) / nn) * aj
        viol = float(np.max(Ah[:, :m] @ u - bh))
        if viol < best_viol - 1e-15:
            best, best_viol = u, viol
    if best is None:
        best = problem.u_hat.copy()
    z = np.zeros(H.size)
    z[:m] = best
    if z.size > m:
        soft = ~hard
        z[m] = max(0.0, float(np.max(A[soft, :m] @ best - b[soft], initial=0.0)))
    return _finish(m, H, z_hat, A, b, z, np.zeros(A.shape[0]), (), INFEASIBLE)


def _single_row(problem: QpProblem) -> QpSolution:
    """Closed form for one row: a scaled projection onto its halfspace."""
    r = problem.rows[0]
    a = np.asarray(r.a, dtype=float)
    uh = problem.u_hat
    viol = float(a @ uh) - r.b
    if viol <= 0.0:
        return QpSolution(u=uh.copy(), delta=0.0, active=(), objective=0.0,
                          kkt_residual=0.0, multipliers=np.zeros(1))
    soft = r.kind == CLF
    denom = float(a @ a) + (1.0 / problem.kappa if soft else 0.0)
    if denom <= 0.0:
        H, z_hat, A, b, hard = problem.matrices()
        return _fallback(problem, H, z_hat, A, b, hard)
    mu = 2.0 * viol / denom
    u = uh - 0.5 * mu * a
    delta = 0.5 * mu / problem.kappa if soft else 0.0
    obj = float(np.dot(u - uh, u - uh)) + (problem.kappa * delta * delta if soft else 0.0)
    slack = float(a @ u) - (delta if soft else 0.0) - r.b
    return QpSolution(u=u, delta=delta, active=(0,), objective=obj,
                      kkt_residual=abs(slack) * max(1.0, mu), multipliers=np.array([mu]))


def _two_rows(problem: QpProblem):
    """KKT enumeration for two rows; None if no active set certifies."""
    H, z_hat, A, b, _ = problem.matrices()
    Hinv = 1.0 / H
    r0 = float(A[0] @ z_hat - b[0])
    r1 = float(A[1] @ z_hat - b[1])
    if r0 <= 0.0 and r1 <= 0.0:
        return _finish(problem.u_hat.size, H, z_hat, A, b, z_hat.copy(), np.zeros(2), ())
    G = (A * Hinv) @ A.T  # A H^-1 A^T
    scale = 1e-12 * (1.0 + float(np.max(np.abs(b))) + float(np.max(np.abs(A)))
                     * (1.0 + float(np.max(np.abs(z_hat)))))
    for idx in ((0,), (1,), (0, 1)):
        if len(idx) == 1:
            j = idx[0]
            if G[j, j] <= 0.0:
                continue
            mu = np.zeros(2)
            mu[j] = 2.0 * (r0 if j == 0 else r1) / G[j, j]
        else:
            det = G[0, 0] * G[1, 1] - G[0, 1] * G[1, 0]
            if abs(det) <= 1e-14 * (G[0, 0] * G[1, 1] + 1e-300):
                continue
            mu = 2.0 * np.array([G[1, 1] * r0 - G[0, 1] * r1, G[0, 0] * r1 - G[1, 0] * r0]) / det
        if np.any(mu < -scale):
            continue
        z = z_hat - 0.5 * Hinv * (A.T @ mu)
        if np.max(A @ z - b) > scale:
            continue
        if len(idx) == 2:
            # nearly parallel rows: the explicit inverse loses digits in the slack
            polished = _solve_eqp(H, z_hat, A, b, idx)
            if polished is not None and (kkt_residual(H, z_hat, A, b, *polished)
                                         <= kkt_residual(H, z_hat, A, b, z, mu)):
                z, mu = polished
        return _finish(problem.u_hat.size, H, z_hat, A, b, z, mu, idx)
    return None


def solve_robot_qp(problem: QpProblem, tol: float = 1e-12) -> QpSolution:
    if problem.u_max is None:
        if len(problem.rows) == 1:
            return _single_row(problem)
        if len(problem.rows) == 2:
            sol = _two_rows(problem)
            if sol is not None:
                return sol
    H, z_hat, A, b, hard = problem.matrices()
    m = problem.u_hat.size
    nrows = A.shape[0]
    if nrows == 0:
        return QpSolution(u=problem.u_hat.copy(), delta=0.0, active=(), objective=0.0,
                          kkt_residual=0.0, multipliers=np.zeros(0))

    # y = sqrt(H) z turns the objective into |y - y_hat|^2; rows become N y >= d
    root = np.sqrt(H)
    N = -A / root
    d = -b
    y = root * z_hat
    scale = 1.0 + float(np.max(np.abs(d))) + float(np.max(np.abs(N)))
    eps = tol * scale

    active: list[int] = []
    lam: list[float] = []
    for _ in range(4 * nrows + 10):
        slack = N @ y - d
        p = int(np.argmin(slack))
        if slack[p] >= -eps:
            break
        lam_p = 0.0
        while True:
            n_p = N[p]
            if active:
                Na = N[active].T
                r = np.linalg.lstsq(Na, n_p, rcond=None)[0]
                z = n_p - Na @ r
            else:
                r = np.zeros(0)
                z = n_p
            t1, k = np.inf, -1
            for j, rj in enumerate(r):
                if rj > eps:
                    ratio = lam[j] / rj
                    if ratio < t1:
                        t1, k = ratio, j
            zz = float(z @ z)
            s_p = float(n_p @ y - d[p])
            t2 = np.inf if zz <= eps * eps else -s_p / zz
            t = min(t1, t2)
            if not np.isfinite(t):
                return _fallback(problem, H, z_hat, A, b, hard)
            lam = [lj - t * rj for lj, rj in zip(lam, r)]
            lam_p += t
            if np.isfinite(t2):
                y = y + t * z
            if np.isfinite(t2) and t2 <= t1:
                active.append(p)
                lam.append(lam_p)
                break
            del active[k]
            del lam[k]
    else:
        return _fallback(problem, H, z_hat, A, b, hard)

    z_sol = y / root
    mu = np.zeros(nrows)
    mu[active] = 2.0 * np.asarray(lam)
    polished = _solve_eqp(H, z_hat, A, b, active)
    if polished is not None:
        mu_p = np.zeros(nrows)
        mu_p[active] = polished[1]
        if (kkt_residual(H, z_hat, A, b, polished[0], mu_p)
                <= kkt_residual(H, z_hat, A, b, z_sol, mu)):
            z_sol, mu = polished[0], mu_p
    return _finish(m, H, z_hat, A, b, z_sol, mu, active)


def solve_joint_qp(problems: Sequence[QpProblem]) -> list[QpSolution]:
    """Block-diagonal joint program; rows never couple robots, so it splits."""
    return [solve_robot_qp(p) for p in problems]


def assemble_joint(problems: Sequence[QpProblem]):
    """Stack the per-robot programs into one block-diagonal ``(H, z_hat, A, b)``.

    Variables are ordered as all robot inputs followed by one relaxation
    variable per robot, mirroring the joint formulation.
    """
    m = problems[0].u_hat.size
    nr = len(problems)
    n = nr * m + nr
    H = np.ones(n)
    z_hat = np.zeros(n)
    A_rows, b = [], []
    for i, p in enumerate(problems):
        z_hat[i * m:(i + 1) * m] = p.u_hat
        H[nr * m + i] = p.kappa
        for r in p.rows:
            row = np.zeros(n)
            row[i * m:(i + 1) * m] = r.a
            if r.kind == CLF:
                row[nr * m + i] = -1.0
            A_rows.append(row)
            b.append(r.b)
    return H, z_hat, np.array(A_rows).reshape(len(A_rows), n), np.array(b, dtype=float)


def brute_force_qp(problem: QpProblem) -> QpSolution:
    """Enumerate every active-set hypothesis; exact on small instances.

    Subsets are visited by size then lexicographically, and a later candidate
    only wins on a strictly smaller objective.
    """
    H, z_hat, A, b, hard = problem.matrices()
    m = problem.u_hat.size
    nrows, n = A.shape
    if nrows > 10:
        raise ValueError("brute force is limited to small instances")
    best = None
    for size in range(0, min(nrows, n) + 1):
        for idx in combinations(range(nrows), size):
            sol = _solve_eqp(H, z_hat, A, b, idx)
            if sol is None:
                continue
            z, mu_a = sol
            if nrows and np.max(A @ z - b) > 1e-9 * (1.0 + np.max(np.abs(b))
                                                      + np.max(np.abs(A)) * np.max(np.abs(z))):
                continue
            f = objective(H, z_hat, z)
            if best is None or f < best[0] - 1e-12:
                mu = np.zeros(nrows)
                mu[list(idx)] = mu_a
                best = (f, z, mu, idx)
    if best is None:
        return _fallback(problem, H, z_hat, A, b, hard)
    _, z, mu, idx = best
    return _finish(m, H, z_hat, A, b, z, mu, idx)


@dataclass
class BatchSolution:
    u: np.ndarray  # (n, 2)
    delta: np.ndarray  # (n,)
    active: np.ndarray  # (n,) bit 0: hard row active, bit 1: relaxable row active
    certified: np.ndarray  # (n,) False where the caller must fall back


def solve_pair_batch(u_hat, kappa, a_hard, b_hard, has_hard, a_soft, b_soft, has_soft,
                     tol: float = 1e-12) -> BatchSolution:
    """Vectorized exact solve of many programs with at most one hard and one
    relaxable row each, by checking the KKT conditions of every active set.

    The objective is strictly convex, so exactly one active set certifies; the
    sets are tried in the order {}, {hard}, {soft}, {hard, soft}.
    """
    u_hat = np.asarray(u_hat, dtype=float)
    n = u_hat.shape[0]
    kappa = np.broadcast_to(np.asarray(kappa, dtype=float), (n,))
    inv_k = np.where(has_soft, 1.0 / kappa, 0.0)
    a0 = np.where(has_hard[:, None], a_hard, 0.0)
    a1 = np.where(has_soft[:, None], a_soft, 0.0)
    b0 = np.where(has_hard, b_hard, 0.0)
    b1 = np.where(has_soft, b_soft, 0.0)
    r0 = np.einsum("ij,ij->i", a0, u_hat) - b0
    r1 = np.einsum("ij,ij->i", a1, u_hat) - b1
    G00 = np.einsum("ij,ij->i", a0, a0)
    G11 = np.einsum("ij,ij->i", a1, a1) + inv_k
    G01 = np.einsum("ij,ij->i", a0, a1)
    scale = tol * (1.0 + np.abs(b0) + np.abs(b1) + (np.abs(a0).max(axis=1) + np.abs(a1).max(axis=1))
                   * (1.0 + np.abs(u_hat).max(axis=1)))

    u = u_hat.copy()
    delta = np.zeros(n)
    active = np.zeros(n, dtype=np.int8)
    done = ((r0 <= 0.0) | ~has_hard) & ((r1 <= 0.0) | ~has_soft)
    if done.all():
        return BatchSolution(u=u, delta=delta, active=active, certified=done)

    with np.errstate(divide="ignore", invalid="ignore"):
        # hard row alone
        mu0 = np.where(G00 > 0, 2.0 * r0 / G00, np.nan)
        u0 = u_hat - 0.5 * mu0[:, None] * a0
        ok0 = (~done & has_hard & (mu0 >= -scale)
               & (~has_soft | (np.einsum("ij,ij->i", a1, u0) - b1 <= scale)))
        u[ok0] = u0[ok0]
        active[ok0] = 1
        done |= ok0
        if done.all():
            return BatchSolution(u=u, delta=delta, active=active, certified=done)
        # relaxable row alone
        mu1 = np.where(G11 > 0, 2.0 * r1 / G11, np.nan)
        u1 = u_hat - 0.5 * mu1[:, None] * a1
        d1 = 0.5 * mu1 * inv_k
        ok1 = (~done & has_soft & (mu1 >= -scale)
               & (~has_hard | (np.einsum("ij,ij->i", a0, u1) - b0 <= scale)))
        u[ok1] = u1[ok1]
        delta[ok1] = d1[ok1]
        active[ok1] = 2
        done |= ok1
        if done.all():
            return BatchSolution(u=u, delta=delta, active=active, certified=done)
        # both rows
        det = G00 * G11 - G01 * G01
        m0 = 2.0 * (G11 * r0 - G01 * r1) / det
        m1 = 2.0 * (G00 * r1 - G01 * r0) / det
        ub = u_hat - 0.5 * (m0[:, None] * a0 + m1[:, None] * a1)
        db = 0.5 * m1 * inv_k
        okb = (~done & has_hard & has_soft & (np.abs(det) > 1e-14 * G00 * G11)
               & (m0 >= -scale) & (m1 >= -scale))
        u[okb] = ub[okb]
        delta[okb] = db[okb]
        active[okb] = 3
        done |= okb
    return BatchSolution(u=u, delta=delta, active=active, certified=done)
