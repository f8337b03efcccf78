import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from persistify.environment import InfoDensity, Workspace, grid_points
from persistify.tasks import (CoverageState, EmptyCellError, ErgodicState, basis_gradients,
                              basis_values, coverage_nominal_input, cumulative_deviation,
                              density_coefficients, ergodic_metric, ergodic_nominal_input,
                              fourier_basis, locational_cost, spectral_weights)

WS = Workspace()
GAUSS = InfoDensity(center=(0.0, 0.0), variance=0.1)
FLAT = InfoDensity(kind="constant", value=1.0)


def test_spectral_weights_closed_form():
    K = 10
    w = spectral_weights(K)
    for k1 in range(K):
        for k2 in range(K):
            assert w[k1, k2] == pytest.approx((1.0 + k1 * k1 + k2 * k2) ** -1.5, rel=1e-15)
    assert w[0, 0] == 1.0


def test_basis_is_orthonormal():
    K = 5
    P, area = grid_points(WS, (600, 400))
    F = basis_values(K, WS, P).reshape(P.shape[0], -1)
    gram = F.T @ F * area
    assert np.allclose(gram, np.eye(K * K), atol=1e-3)


def test_fourier_basis_scalar():
    x = np.array([0.3, -0.2])
    assert fourier_basis((0, 0), x, WS) == pytest.approx(1.0 / np.sqrt(6.0))
    assert fourier_basis((2, 1), x, WS) == pytest.approx(basis_values(3, WS, x[None])[0, 2, 1])


@given(st.floats(-1.4, 1.4), st.floats(-0.9, 0.9))
def test_basis_gradients_match_finite_differences(x, y):
    K, h = 4, 1e-6
    p = np.array([[x, y]])
    G = basis_gradients(K, WS, p)[0]
    for j in range(2):
        e = np.zeros((1, 2))
        e[0, j] = h
        fd = (basis_values(K, WS, p + e) - basis_values(K, WS, p - e))[0] / (2 * h)
        assert np.allclose(G[..., j], fd, atol=1e-6)


def test_density_coefficients_dc_term():
    phi = density_coefficients(6, WS, GAUSS)
    # a unit-mass density has phi_00 = 1 / h_00 = 1 / sqrt(area)
    assert phi[0, 0] == pytest.approx(1.0 / np.sqrt(6.0), rel=1e-9)


def test_metric_undefined_before_time_passes():
    s = ErgodicState(5, WS, GAUSS, np.zeros((1, 2)))
    with pytest.raises(ValueError):
        ergodic_metric(s)
    assert np.allclose(s.coefficients, basis_values(5, WS, np.zeros((1, 2)))[0])


def test_coefficient_bookkeeping_matches_quadrature():
    rng = np.random.default_rng(0)
    K, dt, n = 6, 0.02, 3
    X = rng.uniform([-1.5, -1], [1.5, 1], size=(n, 2))
    s = ErgodicState(K, WS, GAUSS, X)
    path = [X.copy()]
    for _ in range(400):
        X = np.clip(X + dt * ergodic_nominal_input(s, X, 0.3), WS.lower, WS.upper)
        s.advance(X, dt)
        path.append(X.copy())
    vals = np.array([basis_values(K, WS, p).sum(axis=0) for p in path])
    ref = np.trapezoid(vals, dx=dt, axis=0) / (n * dt * 400)
    assert np.max(np.abs(ref - s.coefficients)) < 1e-6


def test_nominal_input_has_speed_u_max():
    s = ErgodicState(8, WS, GAUSS, np.array([[0.5, 0.5], [-1.0, 0.2]]))
    s.advance(np.array([[0.5, 0.5], [-1.0, 0.2]]), 0.1)
    u = ergodic_nominal_input(s, np.array([[0.5, 0.5], [-1.0, 0.2]]), 0.3)
    assert np.linalg.norm(u, axis=1) == pytest.approx([0.3, 0.3])


def _ergodic_run(seed, steps, dt=0.02):
    rng = np.random.default_rng(seed)
    X = rng.uniform([-1.5, -1], [1.5, 1], size=(1, 2))
    s = ErgodicState(10, WS, GAUSS, X)
    eps = []
    for _ in range(steps):
        X = X + dt * ergodic_nominal_input(s, X, 0.3)
        s.advance(X, dt)
        eps.append(s.metric_value())
    return np.array(eps)


@pytest.mark.xfail(strict=False, reason="greedy feedback shapes the second derivative of the "
                   "metric, so 10-35% of 50-step windows rise")
def test_ergodic_metric_decreases_in_windows():
    """Non-increasing over 50-step windows after a 100-step burn-in, allowing 5% exceptions."""
    for seed in range(3):
        eps = _ergodic_run(seed, 2000)[100:]
        windows = eps[50::50] - eps[:-50:50]
        assert np.mean(windows > 0) <= 0.05


@pytest.mark.parametrize("seed", range(3))
def test_ergodic_metric_decays(seed):
    eps = _ergodic_run(seed, 4000)
    assert eps[-1] < 0.05 * eps[100]
    assert np.all(np.isfinite(eps))


# -- coverage -------------------------------------------------------------------

UNIT = Workspace((0.0, 0.0), (1.0, 1.0))


def test_one_robot_unit_square_centroid():
    cs = CoverageState(UNIT, FLAT, grid=(100, 100))
    cells = cs.partition(np.array([[0.2, 0.7]]))
    assert cells.centroids[0] == pytest.approx([0.5, 0.5], abs=1e-12)
    assert locational_cost(cs, np.array([[0.5, 0.5]])) == pytest.approx(1.0 / 6.0, abs=1e-4)


def test_empty_cell_strict_and_lenient():
    cs = CoverageState(WS, FLAT, grid=(30, 20))
    X = np.array([[0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(EmptyCellError):
        cs.partition(X)
    cells = cs.partition(X, strict=False)
    assert cells.mass[1] == 0.0 and cells.centroids[1].tolist() == [0.0, 0.0]


def test_ties_go_to_lowest_index():
    cs = CoverageState(UNIT, FLAT, grid=(2, 1))
    # both grid points are equidistant from the two robots
    X = np.array([[0.5, 0.0], [0.5, 1.0]])
    with pytest.raises(EmptyCellError, match=r"\[1\]"):
        cs.partition(X)
    assert cs.partition(X, strict=False).owner.tolist() == [0, 0]


@settings(max_examples=30)
@given(st.integers(0, 2 ** 31))
def test_partition_cost_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform([-1.5, -1], [1.5, 1], size=(int(rng.integers(1, 8)), 2))
    cs = CoverageState(WS, GAUSS, grid=(40, 30))
    assert locational_cost(cs, X) == pytest.approx(locational_cost(cs, X, GAUSS), rel=1e-12)


def test_lloyd_descent():
    rng = np.random.default_rng(4)
    X = rng.uniform([-1.5, -1], [1.5, 1], size=(7, 2))
    cs = CoverageState(WS, GAUSS, grid=(60, 40))
    H_prev = np.inf
    for _ in range(1500):
        u = coverage_nominal_input(cs, X)
        H = cs.cells.cost
        assert H <= H_prev + 1e-6
        H_prev = H
        X = X + 0.05 * u
    assert np.max(np.linalg.norm(cs.partition(X).centroids - X, axis=1)) < 1e-3


def test_grid_refinement_is_stable():
    X = np.array([[-0.7, 0.3], [0.2, -0.4], [0.9, 0.5], [0.0, 0.6]])
    coarse = CoverageState(WS, GAUSS, grid=(120, 90)).partition(X)
    fine = CoverageState(WS, GAUSS, grid=(240, 180)).partition(X)
    assert abs(fine.cost - coarse.cost) / fine.cost < 1e-3
    # centroid shifts measured against the workspace diameter
    diam = float(np.linalg.norm(WS.lengths))
    assert np.max(np.linalg.norm(fine.centroids - coarse.centroids, axis=1)) < 1e-3 * diam


def test_cumulative_deviation_trapezoid():
    t = np.linspace(0.0, 1.0, 11)
    u = np.zeros((11, 2, 2))
    u[:, 0, 0] = t  # |u - u_hat|^2 = t^2
    C = cumulative_deviation(t, u, np.zeros_like(u))
    assert C[0] == 0.0
    assert C[-1] == pytest.approx(1.0 / 3.0, abs=2e-3)
    assert np.all(np.diff(C) >= 0)
