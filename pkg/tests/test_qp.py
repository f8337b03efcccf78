import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistify.persistence import CBF, CLF, ConstraintRow
from persistify.qp import (INFEASIBLE, OPTIMAL, QpProblem, assemble_joint, brute_force_qp,
                           kkt_residual, objective, solve_joint_qp, solve_pair_batch,
                           solve_robot_qp)


def row(a, b, kind=CBF):
    return ConstraintRow(np.asarray(a, dtype=float), float(b), kind)


def test_no_rows():
    s = solve_robot_qp(QpProblem([1.0, 0.0], 1.0, []))
    assert s.u.tolist() == [1.0, 0.0] and s.delta == 0.0 and s.objective == 0.0


def test_halfspace_projection():
    s = solve_robot_qp(QpProblem([1.0, 1.0], 1.0, [row([1, 1], 0)]))
    assert s.u == pytest.approx([0.0, 0.0], abs=1e-15)
    assert s.delta == 0.0 and s.active == (0,)


def test_relaxed_row_hand_kkt():
    s = solve_robot_qp(QpProblem([0.0, 0.0], 1.0, [row([1, 0], -1, CLF)]))
    assert s.u == pytest.approx([-0.5, 0.0], abs=1e-15)
    assert s.delta == pytest.approx(0.5, abs=1e-15)
    assert s.objective == pytest.approx(0.5, abs=1e-15)


def test_brute_force_trivial_cases():
    assert brute_force_qp(QpProblem([0.3, -0.2], 2.0, [])).u.tolist() == [0.3, -0.2]
    s = brute_force_qp(QpProblem([0.3, -0.2], 2.0, [row([1, 1], 1e6)]))
    assert s.u.tolist() == [0.3, -0.2] and s.active == ()


def test_joint_examples():
    probs = [QpProblem([0.2, 0.1], 1.0, []) for _ in range(3)]
    assert all(np.array_equal(s.u, p.u_hat) for s, p in zip(solve_joint_qp(probs), probs))
    probs[1] = QpProblem([0.2, 0.1], 1.0, [row([1, 0], 0.0)])
    out = solve_joint_qp(probs)
    assert out[1].u == pytest.approx([0.0, 0.1])
    assert np.array_equal(out[0].u, probs[0].u_hat) and np.array_equal(out[2].u, probs[2].u_hat)


def test_joint_assembly_is_block_diagonal():
    probs = [QpProblem([0.2, 0.1], 3.0, [row([1, 2], 0.5), row([0, 1], -0.2, CLF)]),
             QpProblem([-0.5, 0.4], 0.5, [row([-1, 0], 0.1, CLF)])]
    H, z_hat, A, b = assemble_joint(probs)
    assert H.tolist() == [1, 1, 1, 1, 3.0, 0.5]
    assert A.shape == (3, 6)
    assert A[0, 2:4].tolist() == [0, 0] and A[2, :2].tolist() == [0, 0]
    assert A[1, 4] == -1.0 and A[2, 5] == -1.0


def test_box_infeasible_status():
    # a . u <= -10 cannot hold with |u_j| <= 1
    s = solve_robot_qp(QpProblem([0.0, 0.0], 1.0, [row([1, 1], -10.0)], u_max=1.0))
    assert s.status == INFEASIBLE
    assert np.all(np.isfinite(s.u))


def _random_problem(rng, max_rows=4, box=False):
    n = int(rng.integers(0, max_rows + 1))
    rows = [row(rng.normal(size=2), rng.normal(), CBF if rng.random() < 0.5 else CLF)
            for _ in range(n)]
    return QpProblem(rng.normal(size=2), float(rng.uniform(0.1, 10.0)), rows,
                     u_max=float(rng.uniform(0.5, 3.0)) if box else None)


def compare_with_brute_force(p, tol=1e-8):
    a, o = solve_robot_qp(p), brute_force_qp(p)
    assert a.status == o.status
    if a.status != OPTIMAL:
        return a
    assert np.max(np.abs(a.u - o.u)) <= tol
    assert abs(a.delta - o.delta) <= tol
    assert abs(a.objective - o.objective) <= tol * max(1.0, abs(o.objective))
    # complementarity cannot beat rounding of A z when multipliers are huge
    H, z_hat, A, b, _ = p.matrices()
    z = np.concatenate([a.u, [a.delta]])[: z_hat.size]
    floor = 8 * np.finfo(float).eps * max(1.0, np.max(a.multipliers, initial=0.0)) * (
        1.0 + np.max(np.abs(A), initial=0.0) * np.max(np.abs(z)))
    assert a.kkt_residual <= tol + floor
    return a


@settings(max_examples=300)
@given(st.integers(0, 2 ** 32 - 1))
def test_matches_brute_force(seed):
    compare_with_brute_force(_random_problem(np.random.default_rng(seed)))


@settings(max_examples=100)
@given(st.integers(0, 2 ** 32 - 1))
def test_matches_brute_force_with_box(seed):
    p = _random_problem(np.random.default_rng(seed), max_rows=2, box=True)
    compare_with_brute_force(p)


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1))
def test_minimal_invasiveness_against_sampled_points(seed):
    rng = np.random.default_rng(seed)
    p = _random_problem(rng)
    s = solve_robot_qp(p)
    if s.status != OPTIMAL:
        return
    H, z_hat, A, b, _ = p.matrices()
    Z = z_hat + rng.normal(scale=3.0, size=(1000, z_hat.size))
    if A.shape[0]:
        Z = Z[np.all(Z @ A.T <= b, axis=1)]
    zs = np.concatenate([s.u, [s.delta]])[: z_hat.size]
    f_star = objective(H, z_hat, zs)
    for z in Z:
        assert f_star <= objective(H, z_hat, z) + 1e-12


@settings(max_examples=60)
@given(st.integers(0, 2 ** 32 - 1))
def test_continuity(seed):
    rng = np.random.default_rng(seed)
    p = _random_problem(rng)
    s = solve_robot_qp(p)
    if s.status != OPTIMAL:
        return
    # only non-degenerate instances: active multipliers bounded away from zero
    mu = s.multipliers[list(s.active)]
    if np.any(mu < 1e-3):
        return
    q = QpProblem(p.u_hat + 1e-6 * rng.normal(size=2), p.kappa, p.rows)
    t = solve_robot_qp(q)
    if t.active != s.active:
        return
    assert np.max(np.abs(t.u - s.u)) <= 1e-4


def test_kkt_certificate_on_optimal():
    rng = np.random.default_rng(11)
    for _ in range(500):
        p = _random_problem(rng)
        s = solve_robot_qp(p)
        if s.status != OPTIMAL:
            continue
        H, z_hat, A, b, _ = p.matrices()
        z = np.concatenate([s.u, [s.delta]])[: z_hat.size]
        assert kkt_residual(H, z_hat, A, b, z, s.multipliers) <= 1e-8
        if A.shape[0]:
            assert np.max(A @ z - b) <= 1e-9 * (1 + np.max(np.abs(b)))
            assert np.min(s.multipliers) >= -1e-10


def test_pair_batch_matches_single_solves():
    rng = np.random.default_rng(5)
    n = 400
    u_hat = rng.normal(size=(n, 2))
    kap = rng.uniform(0.01, 100.0, n)
    ah, bh = rng.normal(size=(n, 2)), rng.normal(size=n)
    as_, bs = rng.normal(size=(n, 2)), rng.normal(size=n)
    has_h, has_s = rng.random(n) < 0.7, rng.random(n) < 0.7
    sol = solve_pair_batch(u_hat, kap, ah, bh, has_h, as_, bs, has_s)
    for i in range(n):
        rows = ([row(ah[i], bh[i])] if has_h[i] else []) + (
            [row(as_[i], bs[i], CLF)] if has_s[i] else [])
        ref = brute_force_qp(QpProblem(u_hat[i], kap[i], rows))
        if not sol.certified[i]:
            continue
        assert np.max(np.abs(sol.u[i] - ref.u)) <= 1e-9
        assert abs(sol.delta[i] - ref.delta) <= 1e-9
    assert sol.certified.mean() > 0.99


@pytest.mark.parametrize("kappa", [0.0, -1.0])
def test_kappa_must_be_positive(kappa):
    with pytest.raises(ValueError):
        QpProblem([0.0, 0.0], kappa)
