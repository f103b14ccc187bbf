# tests/services/test_roadmap.py
import numpy as np
import pytest
from numpy.testing import assert_allclose

from app.config import SigmaBounds
from app.errors import InfeasibleEndpointError, NoPathError, SamplingError
from app.schemas.gaussian import GaussianState
from app.schemas.geometry import Workspace
from app.services.costs import cvar_values
from app.services.esdf import build_esdf, query_sdf_batch
from app.services.gaussian import wasserstein2, wasserstein2_batch
from app.services.roadmap import (
    build_roadmap,
    connect_edge,
    edges_feasible,
    path_length,
    plan_roadmap_path,
    resample_path,
    sample_gaussian_node,
    sample_nodes,
    shortest_path,
)
from tests.conftest import square

BOUNDS = SigmaBounds(sigma_min=0.05, sigma_max=0.3, rho_max=0.5)
ALPHA = 0.1


def state(x, y, s=0.1, rho=0.0) -> GaussianState:
    return GaussianState(x=x, y=y, sigma_x=s, sigma_y=s, rho=rho)


def plan_with_retries(ws, grid, start, goal, **kwargs):
    """The caller contract: resample on NoPathError."""
    for seed in range(10):
        try:
            return plan_roadmap_path(ws, grid, start, goal, 150, 10, seed, bounds=BOUNDS, alpha=ALPHA,
                                     epsilon=0.0, **kwargs)
        except NoPathError:
            continue
    pytest.fail("no feasible path in 10 seeds")


def test_node_sampling_is_seeded(box_workspace, box_grid):
    a = sample_gaussian_node(box_workspace, box_grid, BOUNDS, seed=4)
    b = sample_gaussian_node(box_workspace, box_grid, BOUNDS, seed=4)
    assert a == b


def test_sampled_nodes_pass_the_recheck(box_workspace, box_grid):
    nodes = sample_nodes(box_workspace, box_grid, BOUNDS, 1000, seed=1, alpha=ALPHA, epsilon=0.0)
    assert nodes.shape == (1000, 5)
    assert np.all(cvar_values(nodes, box_grid, ALPHA)[0] <= 0.0)
    assert np.all(query_sdf_batch(box_grid, nodes[:, :2])[0] > 0)
    assert np.all((nodes[:, 2:4] >= BOUNDS.sigma_min) & (nodes[:, 2:4] <= BOUNDS.sigma_max))
    assert np.all(np.abs(nodes[:, 4]) <= BOUNDS.rho_max)


def test_first_node_does_not_depend_on_count(box_workspace, box_grid):
    one = sample_nodes(box_workspace, box_grid, BOUNDS, 1, seed=2, alpha=ALPHA, epsilon=0.0)
    many = sample_nodes(box_workspace, box_grid, BOUNDS, 50, seed=2, alpha=ALPHA, epsilon=0.0)
    assert np.array_equal(one[0], many[0])


def test_sampling_budget_names_the_scene(box_workspace, box_grid):
    with pytest.raises(SamplingError, match="scene-7"):
        sample_nodes(box_workspace, box_grid, BOUNDS, 5, seed=0, alpha=ALPHA, epsilon=0.0,
                     region=(4.2, 4.2, 5.8, 5.8), max_retries=600, scene="scene-7")


def test_connect_edge_cases(box_grid):
    a = state(2.0, 2.0)
    assert connect_edge(a, a, box_grid, ALPHA, 0.0, 10)
    assert connect_edge(state(1.0, 1.0), state(9.0, 1.0), box_grid, ALPHA, 0.0, 10)
    assert not connect_edge(state(1.0, 5.0), state(9.0, 5.0), box_grid, ALPHA, 0.0, 10)
    with pytest.raises(ValueError):
        connect_edge(a, a, box_grid, ALPHA, 0.0, 1)


def test_doubling_resolution_never_admits_more(box_workspace, box_grid):
    nodes = sample_nodes(box_workspace, box_grid, BOUNDS, 400, seed=3, alpha=ALPHA, epsilon=0.0)
    a, b = nodes[:200], nodes[200:]
    coarse = edges_feasible(a, b, box_grid, ALPHA, 0.0, 3)
    fine = edges_feasible(a, b, box_grid, ALPHA, 0.0, 6)
    assert not np.any(fine & ~coarse)
    assert np.any(~coarse)


def test_roadmap_edges_carry_w2_costs_and_are_feasible(box_workspace, box_grid):
    nodes = sample_nodes(box_workspace, box_grid, BOUNDS, 80, seed=5, alpha=ALPHA, epsilon=0.0)
    roadmap = build_roadmap(nodes, state(1, 1).to_array(), state(9, 9).to_array(), box_grid, 6,
                            alpha=ALPHA, epsilon=0.0, edge_resolution=10)
    assert roadmap.start_index == 80 and roadmap.goal_index == 81
    i, j, w = (np.array(col) for col in zip(*roadmap.edges))
    nodes_all = roadmap.nodes
    assert_allclose(w, wasserstein2_batch(nodes_all[i.astype(int)], nodes_all[j.astype(int)]), atol=1e-9)
    assert np.all(edges_feasible(nodes_all[i.astype(int)], nodes_all[j.astype(int)], box_grid, ALPHA, 0.0, 10))


def test_shortest_path():
    edges = [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 3.0), (2, 3, 0.5)]
    assert shortest_path(5, edges, 0, 3) == ([0, 1, 2, 3], 2.5)
    assert shortest_path(5, edges, 2, 2) == ([2], 0.0)
    with pytest.raises(NoPathError):
        shortest_path(5, edges, 0, 4)


def _brute_force_distance(n, edges, source, target):
    adj = {i: [] for i in range(n)}
    for i, j, w in edges:
        adj[i].append((j, w))
        adj[j].append((i, w))
    best = np.inf
    stack = [(source, 0.0, {source})]
    while stack:
        node, cost, seen = stack.pop()
        if node == target:
            best = min(best, cost)
            continue
        for nxt, w in adj[node]:
            if nxt not in seen:
                stack.append((nxt, cost + w, seen | {nxt}))
    return best


def test_shortest_path_matches_brute_force_on_small_graphs():
    rng = np.random.default_rng(5)
    for _ in range(40):
        n = int(rng.integers(2, 13))
        edges = [
            (i, j, float(rng.uniform(0.1, 5.0)))
            for i in range(n) for j in range(i + 1, n) if rng.uniform() < 0.3
        ]
        expected = _brute_force_distance(n, edges, 0, n - 1)
        if not np.isfinite(expected):
            with pytest.raises(NoPathError):
                shortest_path(n, edges, 0, n - 1)
            continue
        path, cost = shortest_path(n, edges, 0, n - 1)
        assert cost == pytest.approx(expected, abs=1e-9)
        weight = {(min(i, j), max(i, j)): w for i, j, w in edges}
        assert path[0] == 0 and path[-1] == n - 1
        assert sum(weight[(min(a, b), max(a, b))] for a, b in zip(path, path[1:])) == pytest.approx(cost, abs=1e-9)


def test_resample_path_keeps_endpoints_and_count():
    poly = np.array([[0, 0, 0.1, 0.1, 0], [3, 0, 0.1, 0.1, 0], [3, 1, 0.1, 0.1, 0]], dtype=float)
    out = resample_path(poly, 9)
    assert out.shape == (9, 5)
    assert np.array_equal(out[0], poly[0]) and np.array_equal(out[-1], poly[-1])
    assert path_length(out) == pytest.approx(4.0, abs=1e-9)
    # three quarters of the intervals go to the longer segment
    assert np.sum(out[:, 1] == 0) == 7
    assert_allclose(resample_path(poly[:1], 4), np.repeat(poly[:1], 4, axis=0))


def test_empty_workspace_path_is_straight(empty_grid):
    ws = Workspace(width=10.0, height=10.0)
    start, goal = state(1.0, 1.0, 0.2), state(9.0, 7.0, 0.2)
    traj = plan_roadmap_path(ws, empty_grid, start, goal, 50, 8, 0, bounds=BOUNDS, alpha=ALPHA, epsilon=0.0)
    assert traj.horizon == 256
    assert path_length(traj.states) <= 1.05 * wasserstein2(start, goal)


def test_path_around_obstacle(box_workspace, box_grid):
    start, goal = state(1.0, 5.0), state(9.0, 5.0, 0.15)
    traj = plan_with_retries(box_workspace, box_grid, start, goal, edge_resolution=20)
    assert traj.horizon == 256
    assert np.array_equal(traj.states[0], start.to_array())
    assert np.array_equal(traj.states[-1], goal.to_array())
    assert np.all(edges_feasible(traj.states[:-1], traj.states[1:], box_grid, ALPHA, 0.0, 20))
    assert path_length(traj.states) > wasserstein2(start, goal)


def test_infeasible_endpoint(box_workspace, box_grid):
    with pytest.raises(InfeasibleEndpointError):
        plan_roadmap_path(box_workspace, box_grid, state(5.0, 5.0), state(9.0, 9.0), 50, 8, 0,
                          bounds=BOUNDS, alpha=ALPHA, epsilon=0.0)


def test_wall_disconnects_the_roadmap():
    ws = Workspace(width=10.0, height=10.0, obstacles=[square(4.5, 0.0, 5.5, 10.0)])
    grid = build_esdf(ws, 0.1)
    with pytest.raises(NoPathError):
        plan_roadmap_path(ws, grid, state(1.0, 5.0), state(9.0, 5.0), 60, 8, 0, bounds=BOUNDS, alpha=ALPHA,
                          epsilon=0.0)
