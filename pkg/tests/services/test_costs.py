# tests/services/test_costs.py
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import DomainError
from app.schemas.gaussian import GaussianState
from app.schemas.trajectory import CostWeights, GaussianTrajectory
from app.services.costs import (
    build_gp_model,
    collision_cost,
    cost_gradient,
    cvar_collision,
    cvar_multiplier,
    cvar_values,
    gp_cost,
    normal_quantile,
    total_cost,
    transport_cost,
)


def line(h: int = 11, step: float = 1.0, y: float = 1.0, sigma: float = 0.3) -> np.ndarray:
    states = np.zeros((h, 5))
    states[:, 0] = 0.5 + step * np.arange(h) * 0.5
    states[:, 1] = y
    states[:, 2:4] = sigma
    return states


def test_normal_quantile_matches_reference_values():
    assert normal_quantile(0.5) == pytest.approx(0.0, abs=1e-12)
    assert normal_quantile(0.975) == pytest.approx(1.959963984540054, abs=1e-10)
    assert normal_quantile(0.01) == pytest.approx(-2.3263478740408408, abs=1e-10)
    with pytest.raises(DomainError):
        normal_quantile(1.0)


def test_cvar_reference_values(box_grid):
    # (7, 5): one meter right of the obstacle, normal (1, 0)
    state = GaussianState(x=7.0, y=5.0, sigma_x=1.0, sigma_y=0.3, rho=0.0)
    assert cvar_collision(state, box_grid, 0.5) == pytest.approx(-0.20212, abs=1e-5)
    assert cvar_collision(state, box_grid, 0.05) == pytest.approx(1.06271, abs=1e-5)


def test_cvar_shrinks_as_alpha_grows(box_grid):
    state = GaussianState(x=7.0, y=5.3, sigma_x=0.8, sigma_y=0.4, rho=0.2)
    values = [cvar_collision(state, box_grid, a) for a in np.linspace(0.01, 0.99, 50)]
    assert np.all(np.diff(values) < 0)
    # one meter from the obstacle; the variance term stays positive
    assert values[-1] > -1.0


def test_cvar_vanishing_variance_is_negative_distance(box_grid):
    state = GaussianState(x=5.0, y=2.0, sigma_x=1e-4, sigma_y=1e-4, rho=0.0)
    assert cvar_collision(state, box_grid, 0.1) == pytest.approx(-2.0, abs=1e-6)


def test_cvar_outside_grid_raises(box_grid):
    with pytest.raises(DomainError):
        cvar_collision(GaussianState(x=12.0, y=5.0, sigma_x=0.1, sigma_y=0.1, rho=0.0), box_grid, 0.1)


def test_collision_cost_hinge(box_grid):
    alpha = 0.5
    sigma_y = math.sqrt(2.5 / cvar_multiplier(alpha))
    states = np.array([
        [1.0, 1.0, 1e-3, 1e-3, 0.0],
        [5.0, 2.0, 0.1, sigma_y, 0.0],
        [9.0, 1.0, 1e-3, 1e-3, 0.0],
    ])
    cvar, _, _ = cvar_values(states, box_grid, alpha)
    assert cvar[1] == pytest.approx(0.5, abs=1e-9)
    assert collision_cost(states, box_grid, alpha, 0.2) == pytest.approx(0.3, abs=1e-9)


def test_collision_cost_is_zero_in_free_space(box_grid):
    assert collision_cost(line(sigma=0.01), box_grid, 0.1, 0.0) == 0.0


def test_transport_cost_of_line_and_constant():
    states = np.zeros((11, 5))
    states[:, 0] = np.arange(11)
    states[:, 2:4] = 0.5
    assert transport_cost(states) == pytest.approx(10.0, abs=1e-12)
    assert transport_cost(np.tile(states[:1], (5, 1))) == 0.0


def test_gp_cost_vanishes_on_constant_velocity():
    model = build_gp_model(1.0, 1.0, 0.1)
    states = line(h=9, sigma=0.4)
    states[:, 1] = 1.0 + 0.25 * np.arange(9)
    states[:, 2] = 0.4 + 0.05 * np.arange(9)
    assert gp_cost(states, model) == pytest.approx(0.0, abs=1e-12)


def test_gp_cost_grows_with_displacement():
    model = build_gp_model(1.0, 1.0, 0.1)
    costs = []
    for delta in (0.1, 0.2, 0.4):
        states = line(h=9)
        states[4, 1] += delta
        costs.append(gp_cost(states, model))
    assert 0 < costs[0] < costs[1] < costs[2]


def test_gp_cost_scales_inversely_with_noise():
    states = line(h=9)
    states[3, 0] += 0.3
    base = gp_cost(states, build_gp_model(1.0, 1.0, 0.1))
    assert gp_cost(states, build_gp_model(1.0, 4.0, 0.4)) == pytest.approx(base / 4.0, rel=1e-10)


def test_gp_cost_needs_three_states():
    with pytest.raises(DomainError):
        gp_cost(line(h=2), build_gp_model(1.0, 1.0, 0.1))


def test_total_cost_weights(box_grid):
    model = build_gp_model(1.0, 1.0, 0.1)
    states = line()
    states[:, 1] = 3.7
    states[:, 2:4] = 0.6
    zero = CostWeights(lambda_obs=0, lambda_dis=0, lambda_gp=0)
    assert total_cost(states, box_grid, zero, model) == 0.0
    obs_only = CostWeights(lambda_obs=1, lambda_dis=0, lambda_gp=0, alpha=0.1)
    assert total_cost(states, box_grid, obs_only, model) == pytest.approx(collision_cost(states, box_grid, 0.1, 0.0))
    traj = GaussianTrajectory(states=states)
    assert total_cost(traj, box_grid, obs_only, model) == total_cost(states, box_grid, obs_only, model)


def test_cost_gradient_matches_finite_differences(box_grid):
    model = build_gp_model(1.0, 1.0, 0.1)
    weights = CostWeights(lambda_obs=1.0, lambda_dis=0.5, lambda_gp=0.2, alpha=0.1, epsilon=0.05)
    h = 8
    states = np.column_stack([
        np.linspace(2.03, 7.97, h),
        3.63 + 0.07 * np.sin(np.arange(h)),
        np.linspace(0.55, 0.65, h),
        np.linspace(0.62, 0.5, h),
        np.linspace(-0.2, 0.3, h),
    ])
    _, normals, _ = cvar_values(states, box_grid, weights.alpha)
    analytic = -cost_gradient(states, box_grid, weights, model, normals)

    step = 1e-6
    numeric = np.zeros_like(states)
    for i in range(h):
        for j in range(5):
            up, down = states.copy(), states.copy()
            up[i, j] += step
            down[i, j] -= step
            numeric[i, j] = (
                total_cost(up, box_grid, weights, model, normals) - total_cost(down, box_grid, weights, model, normals)
            ) / (2 * step)
    assert_allclose(analytic, numeric, rtol=1e-5, atol=1e-6)


def test_gradient_is_zero_for_constant_trajectory_in_free_space(box_grid):
    model = build_gp_model(1.0, 1.0, 0.1)
    states = np.tile([[1.0, 1.0, 0.2, 0.2, 0.0]], (6, 1))
    weights = CostWeights(lambda_obs=0, lambda_dis=0, lambda_gp=1.0)
    assert_allclose(cost_gradient(states, box_grid, weights, model), 0.0, atol=1e-12)
