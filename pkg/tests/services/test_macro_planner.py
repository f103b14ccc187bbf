# tests/services/test_macro_planner.py
import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.errors import DomainError, InfeasibleEndpointError, PlanningError
from app.schemas.gaussian import GaussianState, Gmm
from app.schemas.geometry import Workspace
from app.schemas.trajectory import GaussianTrajectory, GmmTrajectory
from app.services.costs import build_gp_model, total_cost
from app.services.esdf import build_esdf
from app.services.macro_planner import (
    evaluate_gmm_at,
    gmm_transition,
    pairwise_trajectory_costs,
    plan_macro,
    risk_audit,
)
from tests.conftest import square

GP = build_gp_model(1.0, 1.0, 0.1)


def g(x, y, s=0.8) -> GaussianState:
    return GaussianState(x=x, y=y, sigma_x=s, sigma_y=s, rho=0.0)


def one(state: GaussianState) -> Gmm:
    return Gmm(weights=[1.0], components=[state])


def straight(a: GaussianState, b: GaussianState, h: int = 8) -> GaussianTrajectory:
    u = np.linspace(0, 1, h)[:, None]
    return GaussianTrajectory(states=a.to_array() + u * (b.to_array() - a.to_array()))


def mixture(*trajs, alphas) -> GmmTrajectory:
    k = len(trajs)
    start = Gmm(weights=list(alphas), components=[t.state(0) for t in trajs])
    goal = Gmm(weights=list(alphas), components=[t.state(-1) for t in trajs])
    return GmmTrajectory(trajectories=list(trajs), alphas=list(alphas), plan=np.diag(alphas),
                         start_gmm=start, goal_gmm=goal, pairs=[(i, i) for i in range(k)])


OPEN = Workspace(width=40.0, height=30.0)


@pytest.fixture
def open_grid():
    return build_esdf(OPEN, 0.5)


def test_single_pair_plan(open_grid, tiny_prior, small_config):
    start, goal = g(4.0, 15.0), g(36.0, 15.0)
    plan, stats = plan_macro(OPEN, open_grid, one(start), one(goal), tiny_prior, small_config.costs, GP,
                             small_config.planner, seed=1)
    assert len(plan.trajectories) == 1
    assert plan.alphas == [1.0]
    assert np.array_equal(plan.trajectories[0].states[0], start.to_array())
    assert np.array_equal(plan.trajectories[0].states[-1], goal.to_array())
    assert stats.cost_matrix.shape == (1, 1)
    assert stats.cost_matrix[0, 0] == pytest.approx(total_cost(plan.trajectories[0], open_grid, small_config.costs, GP))


def test_two_by_two_plan_respects_marginals(open_grid, tiny_prior, small_config):
    start = Gmm(weights=[0.5, 0.5], components=[g(4.0, 8.0), g(4.0, 22.0)])
    goal = Gmm(weights=[0.5, 0.5], components=[g(36.0, 8.0), g(36.0, 22.0)])
    plan, stats = plan_macro(OPEN, open_grid, start, goal, tiny_prior, small_config.costs, GP,
                             small_config.planner, seed=2)
    assert_allclose(plan.plan.sum(axis=1), [0.5, 0.5], atol=1e-8)
    assert_allclose(plan.plan.sum(axis=0), [0.5, 0.5], atol=1e-8)
    assert 2 <= len(plan.trajectories) <= 3
    assert sum(plan.alphas) == pytest.approx(1.0, abs=1e-9)
    for (i, j), traj in zip(plan.pairs, plan.trajectories):
        assert np.array_equal(traj.states[0], start.components[i].to_array())
        assert np.array_equal(traj.states[-1], goal.components[j].to_array())


def test_planning_is_seeded(open_grid, tiny_prior, small_config):
    args = (
        OPEN, open_grid, one(g(4.0, 15.0)), one(g(36.0, 15.0)), tiny_prior, small_config.costs, GP,
        small_config.planner,
    )
    a, _ = plan_macro(*args, seed=5)
    b, _ = plan_macro(*args, seed=5)
    assert np.array_equal(a.trajectories[0].states, b.trajectories[0].states)


def test_infeasible_endpoint_is_named(world_workspace, world_grid, tiny_prior, small_config):
    with pytest.raises(InfeasibleEndpointError, match="goal component 0 mean .* lies inside an obstacle"):
        plan_macro(world_workspace, world_grid, one(g(4.0, 15.0)), one(g(20.0, 15.0)), tiny_prior,
                   small_config.costs, GP, small_config.planner, seed=0)
    with pytest.raises(InfeasibleEndpointError, match="start component 0 has CVaR"):
        plan_macro(world_workspace, world_grid, one(g(17.5, 15.0)), one(g(36.0, 15.0)), tiny_prior,
                   small_config.costs, GP, small_config.planner, seed=0)
    with pytest.raises(InfeasibleEndpointError, match="outside the workspace"):
        plan_macro(world_workspace, world_grid, one(g(4.0, 15.0)), one(g(45.0, 15.0)), tiny_prior,
                   small_config.costs, GP, small_config.planner, seed=0)


def test_grid_must_belong_to_the_workspace(open_grid, tiny_prior, small_config):
    other = Workspace(width=20.0, height=30.0)
    with pytest.raises(DomainError, match="does not match workspace"):
        plan_macro(other, open_grid, one(g(4.0, 15.0)), one(g(16.0, 15.0)), tiny_prior, small_config.costs, GP,
                   small_config.planner, seed=0)


def test_collision_cap_names_the_pair(tiny_prior, small_config):
    wall = Workspace(width=40.0, height=30.0, obstacles=[square(8.0, 0.0, 32.0, 30.0)])
    blocked = build_esdf(wall, 0.5)
    section = small_config.planner.model_copy(update={"hard_cap": 1.0, "guidance_weight": 0.0})
    with pytest.raises(PlanningError, match=r"component pair \(0, 0\)"):
        plan_macro(wall, blocked, one(g(4.0, 15.0)), one(g(36.0, 15.0)), tiny_prior, small_config.costs, GP,
                   section, seed=0)


def test_pairwise_costs(open_grid, small_config):
    traj = straight(g(4.0, 15.0), g(36.0, 15.0))
    cost = pairwise_trajectory_costs({(0, 0): traj}, open_grid, small_config.costs, GP, 1, 1)
    assert cost[0, 0] == total_cost(traj, open_grid, small_config.costs, GP)
    with pytest.raises(PlanningError, match=r"\(0, 1\)"):
        pairwise_trajectory_costs({(0, 0): traj}, open_grid, small_config.costs, GP, 1, 2)


def test_evaluate_single_trajectory():
    traj = straight(g(1.0, 1.0, 0.5), g(5.0, 3.0, 0.3))
    plan = mixture(traj, alphas=[1.0])
    gmm = evaluate_gmm_at(plan, 3)
    assert gmm.weights == [1.0]
    assert_allclose(gmm.components[0].to_array(), traj.states[3])
    with pytest.raises(DomainError):
        evaluate_gmm_at(plan, traj.horizon)


def test_identical_trajectories_merge():
    traj = straight(g(1.0, 1.0, 0.5), g(5.0, 3.0, 0.3))
    plan = mixture(traj, traj, alphas=[0.5, 0.5])
    gmm = evaluate_gmm_at(plan, 2)
    assert len(gmm) == 1 and gmm.weights == [1.0]
    assert len(evaluate_gmm_at(plan, 2, merge_threshold=0.0)) == 2


def test_transition_plan_marginals():
    a = straight(g(1.0, 1.0, 0.5), g(5.0, 3.0, 0.3))
    b = straight(g(1.0, 9.0, 0.5), g(5.0, 3.0, 0.3))
    plan = mixture(a, b, alphas=[0.25, 0.75])
    now, nxt, moves = gmm_transition(plan, 0)
    assert_allclose(moves.sum(axis=1), now.weights)
    assert_allclose(moves.sum(axis=0), nxt.weights)
    # both trajectories end on the same state
    last, same, stay = gmm_transition(plan, a.horizon - 1)
    assert len(last) == 1 and len(same) == 1
    assert_allclose(stay, [[1.0]])


def test_risk_audit(box_grid):
    traj = straight(g(1.0, 1.0, 0.1), g(9.0, 1.0, 0.1))
    plan = mixture(traj, alphas=[1.0])
    assert risk_audit(plan, box_grid, 0.1) < 0
    through = mixture(straight(g(1.0, 5.0, 0.1), g(9.0, 5.0, 0.1), h=9), alphas=[1.0])
    assert risk_audit(through, box_grid, 0.1) == pytest.approx(1.0, abs=0.05)
