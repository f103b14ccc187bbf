# tests/services/test_orca.py
import numpy as np
import pytest

from app.services.orca import orca_half_plane

TAU = 5.0


def project(v, plane):
    n, c = plane
    return v + (c - n @ v) * n


def min_distance(rel_pos, rel_vel, horizon):
    t = np.linspace(0.0, horizon, 4001)[:, None]
    return float(np.min(np.linalg.norm(rel_pos[None] - t * rel_vel[None], axis=1)))


def test_head_on_velocity_is_excluded():
    n, c = orca_half_plane([0.0, 0.0], [1.0, 0.0], [5.0, 0.0], [-1.0, 0.0], 1.0, TAU, 0.1)
    assert np.linalg.norm(n) == pytest.approx(1.0)
    assert n @ np.array([1.0, 0.0]) < c
    # both robots turn to their own right
    n_b, c_b = orca_half_plane([5.0, 0.0], [-1.0, 0.0], [0.0, 0.0], [1.0, 0.0], 1.0, TAU, 0.1)
    assert project(np.array([1.0, 0.0]), (n, c))[1] < 0
    assert project(np.array([-1.0, 0.0]), (n_b, c_b))[1] > 0


def test_reciprocal_projections_avoid_collision_within_the_horizon():
    gen = np.random.default_rng(0)
    r = 1.0
    checked = 0
    for _ in range(200):
        p_a, p_b = gen.uniform(-5, 5, 2), gen.uniform(-5, 5, 2)
        if np.linalg.norm(p_b - p_a) <= r + 0.05:
            continue
        v_a, v_b = gen.uniform(-2, 2, 2), gen.uniform(-2, 2, 2)
        plane_a = orca_half_plane(p_a, v_a, p_b, v_b, r, TAU, 0.1)
        plane_b = orca_half_plane(p_b, v_b, p_a, v_a, r, TAU, 0.1)
        new_a, new_b = project(v_a, plane_a), project(v_b, plane_b)
        assert min_distance(p_b - p_a, new_a - new_b, TAU) >= r - 1e-6
        checked += 1
    assert checked > 100


def test_separating_robots_are_unconstrained():
    n, c = orca_half_plane([0.0, 0.0], [-1.0, 0.0], [3.0, 0.0], [1.0, 0.0], 1.0, TAU, 0.1)
    assert n @ np.array([-1.0, 0.0]) >= c


def test_overlapping_robots_separate_within_one_step():
    dt = 0.1
    p_a, p_b = np.array([0.0, 0.0]), np.array([0.5, 0.0])
    v = np.zeros(2)
    plane_a = orca_half_plane(p_a, v, p_b, v, 1.0, TAU, dt)
    plane_b = orca_half_plane(p_b, v, p_a, v, 1.0, TAU, dt)
    new_a, new_b = project(v, plane_a), project(v, plane_b)
    after = (p_b + dt * new_b) - (p_a + dt * new_a)
    assert np.linalg.norm(after) == pytest.approx(1.0)
    assert np.all(np.isfinite(plane_a[0]))
