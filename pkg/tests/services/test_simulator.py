# tests/services/test_simulator.py
import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import DomainError
from app.schemas.gaussian import GaussianState, Gmm
from app.schemas.geometry import Scenario
from app.schemas.robot import MpcConfig, RobotState
from app.schemas.trajectory import GaussianTrajectory, GmmTrajectory
from app.services.esdf import build_esdf
from app.services.simulator import (
    control_step,
    interpolated_reference,
    simulate,
    step_budget,
    surface_distances,
)

START = np.array([[4.0, 14.0], [4.0, 16.0], [6.0, 14.0], [6.0, 16.0]])


@pytest.fixture
def scenario():
    return Scenario(width=40.0, height=30.0)


@pytest.fixture
def open_grid(scenario):
    return build_esdf(scenario.to_workspace(), 0.5)


@pytest.fixture
def shift_plan():
    """One Gaussian moving its mean from (5, 15) to (15, 15) over five seconds."""
    a = np.array([5.0, 15.0, 1.0, 1.0, 0.0])
    b = np.array([15.0, 15.0, 1.0, 1.0, 0.0])
    traj = GaussianTrajectory(states=np.linspace(a, b, 6))
    gmm_a = Gmm(weights=[1.0], components=[GaussianState.from_array(a)])
    gmm_b = Gmm(weights=[1.0], components=[GaussianState.from_array(b)])
    return GmmTrajectory(trajectories=[traj], alphas=[1.0], plan=np.array([[1.0]]),
                         start_gmm=gmm_a, goal_gmm=gmm_b, pairs=[(0, 0)])


def robots(points=START):
    return [RobotState(id=k, position=tuple(p), radius=0.2) for k, p in enumerate(points)]


def test_interpolated_reference():
    ref = interpolated_reference(np.zeros((1, 2)), np.array([[10.0, 0.0]]), sub=10, substep=7, horizon=5)
    assert ref.shape == (1, 5, 2)
    assert_allclose(ref[0, :, 0], [8.0, 9.0, 10.0, 10.0, 10.0])


def test_step_budget(shift_plan):
    assert step_budget(shift_plan, MpcConfig(settle_time=2.0)) == 5 * 10 + 20
    assert step_budget(shift_plan, MpcConfig(max_steps=7)) == 7


def test_surface_distances(box_grid):
    d_rob, d_obs = surface_distances(np.array([[1.0, 1.0], [1.0, 2.0]]), 0.2, box_grid)
    assert d_rob == pytest.approx(0.6)
    assert d_obs == pytest.approx(np.hypot(3.0, 2.0) - 0.2, abs=0.1)
    single, _ = surface_distances(np.array([[1.0, 1.0]]), 0.2, box_grid)
    assert single is None


def test_swarm_follows_a_shifting_gaussian(shift_plan, open_grid, scenario):
    cfg = MpcConfig(settle_time=10.0)
    log, stats = simulate(robots(), shift_plan, open_grid, cfg, seed=0, scenario=scenario)
    assert log.success
    assert log.header.task_time is not None
    assert len(log.frames) == stats.steps + 1
    assert log.frames[0].positions == [tuple(p) for p in START]
    final = np.array(log.frames[-1].positions)
    assert np.all(np.linalg.norm(final - np.array(log.header.targets), axis=1) <= cfg.capture_radius)
    assert_allclose(sorted(log.header.targets), START + [10.0, 0.0], atol=1e-6)
    assert all(f.min_robot_distance >= 0 for f in log.frames)
    assert stats.mpc_time_mean > 0


def test_simulation_is_seeded(shift_plan, open_grid, scenario):
    cfg = MpcConfig(max_steps=15, process_noise=0.01)
    a, _ = simulate(robots(), shift_plan, open_grid, cfg, seed=3, scenario=scenario)
    b, _ = simulate(robots(), shift_plan, open_grid, cfg, seed=3, scenario=scenario)
    assert [f.positions for f in a.frames] == [f.positions for f in b.frames]


def test_exhausted_budget_is_not_a_success(shift_plan, open_grid, scenario):
    log, stats = simulate(robots(), shift_plan, open_grid, MpcConfig(max_steps=3), seed=0, scenario=scenario)
    assert stats.steps == 3
    assert not log.success
    assert log.header.task_time is None


def test_threads_match_serial(shift_plan, open_grid, scenario):
    cfg = MpcConfig(max_steps=12)
    serial, _ = simulate(robots(), shift_plan, open_grid, cfg, seed=1, scenario=scenario)
    pooled, _ = simulate(robots(), shift_plan, open_grid, cfg, seed=1, scenario=scenario, workers=3)
    assert [f.positions for f in serial.frames] == [f.positions for f in pooled.frames]


def test_needs_robots(shift_plan, open_grid, scenario):
    with pytest.raises(DomainError):
        simulate([], shift_plan, open_grid, MpcConfig(), seed=0, scenario=scenario)


def test_targets_do_not_drift_when_robots_lag(shift_plan, open_grid, scenario):
    cfg = MpcConfig(v_max=0.5, settle_time=0.0)
    log, _ = simulate(robots(), shift_plan, open_grid, cfg, seed=0, scenario=scenario)
    final = np.array(log.frames[-1].positions)
    assert final[:, 0].max() < 10.0
    assert_allclose(sorted(log.header.targets), START + [10.0, 0.0], atol=1e-6)
    assert not log.success


def test_capture_before_the_last_interval_is_not_a_success(open_grid, scenario):
    a = np.array([5.0, 15.0, 1.0, 1.0, 0.0])
    b = np.array([15.0, 15.0, 1.0, 1.0, 0.0])
    traj = GaussianTrajectory(states=np.array([a, a, a, a, a, b]))
    plan = GmmTrajectory(
        trajectories=[traj], alphas=[1.0], plan=np.array([[1.0]]),
        start_gmm=Gmm(weights=[1.0], components=[GaussianState.from_array(a)]),
        goal_gmm=Gmm(weights=[1.0], components=[GaussianState.from_array(b)]),
        pairs=[(0, 0)],
    )
    log, stats = simulate(robots(), plan, open_grid, MpcConfig(max_steps=20), seed=0, scenario=scenario)
    assert stats.steps == 20
    assert_allclose(log.frames[-1].positions, START, atol=1e-4)
    assert not log.success
    assert log.header.task_time is None


def test_logged_velocities_obey_the_limits(shift_plan, open_grid, scenario):
    cfg = MpcConfig(settle_time=10.0)
    log, _ = simulate(robots(), shift_plan, open_grid, cfg, seed=0, scenario=scenario)
    v = np.array([f.velocities for f in log.frames])
    assert np.linalg.norm(v, axis=-1).max() <= cfg.v_max + 1e-9
    assert np.linalg.norm(np.diff(v, axis=0), axis=-1).max() <= cfg.a_max * cfg.dt + 1e-9
    # the swarm does accelerate to the limit on the way
    assert np.linalg.norm(np.diff(v, axis=0), axis=-1).max() > 0.5 * cfg.a_max * cfg.dt


@pytest.mark.slow
def test_antipodal_circle_exchange_keeps_robots_apart():
    grid = build_esdf(Scenario(width=20.0, height=20.0).to_workspace(), 0.5)
    cfg = MpcConfig()
    angles = 2 * np.pi * np.arange(10) / 10
    positions = 10.0 + 4.0 * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    goals = 20.0 - positions
    velocities = np.zeros_like(positions)
    hold = np.repeat(goals[:, None, :], cfg.horizon, axis=1)
    closest = np.inf
    for _ in range(2000):
        results = control_step(positions, velocities, 0.2, hold, grid, cfg)
        new = np.array([res.velocity for res in results])
        assert np.linalg.norm(new, axis=1).max() <= cfg.v_max + 1e-9
        assert np.linalg.norm(new - velocities, axis=1).max() <= cfg.a_max * cfg.dt + 1e-9
        velocities = new
        positions = positions + velocities * cfg.dt
        closest = min(closest, surface_distances(positions, 0.2, grid)[0])
    assert closest >= 0.0
