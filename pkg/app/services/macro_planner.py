# app/services/macro_planner.py
"""
Macroscopic planning: one guided Gaussian trajectory per (start, goal)
component pair, weighted by an exact transport plan.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from app.config import PlannerSection
from app.errors import DomainError, InfeasibleEndpointError, PlanningError
from app.models.prior import DiffusionPrior
from app.schemas.esdf import EsdfGrid
from app.schemas.gaussian import Gmm
from app.schemas.geometry import Workspace
from app.schemas.trajectory import CostWeights, GaussianTrajectory, GmmTrajectory, GpModel
from app.services.context import build_context
from app.services.costs import batch_total_cost, collision_cost, cvar_values, total_cost
from app.services.diffusion import guided_sample_batch
from app.services.gaussian import gmm_from_arrays, merge_components, merge_groups
from app.services.geometry import occupied
from app.services.seeding import derive_seed
from app.services.transport import solve_transport_lp

logger = logging.getLogger(__name__)


@dataclass
class MacroStats:
    cost_matrix: np.ndarray
    objective: float
    projected: int = 0
    elapsed: float = 0.0
    sample_costs: dict = field(default_factory=dict)


def check_endpoint_geometry(gmm: Gmm, ws: Workspace, label: str) -> None:
    """
    Raises:
        InfeasibleEndpointError: naming the first component whose mean is off
            the workspace or inside an obstacle
    """
    means = np.array([[c.x, c.y] for c in gmm.components])
    for i, (x, y) in enumerate(means):
        if not ws.contains(x, y):
            raise InfeasibleEndpointError(f"{label} component {i} mean ({x:g}, {y:g}) lies outside the workspace")
    hit = np.flatnonzero(occupied(ws, means))
    if len(hit):
        i = int(hit[0])
        raise InfeasibleEndpointError(
            f"{label} component {i} mean ({means[i, 0]:g}, {means[i, 1]:g}) lies inside an obstacle"
        )


def check_endpoint_feasibility(gmm: Gmm, grid: EsdfGrid, alpha: float, epsilon: float, label: str) -> None:
    """
    Raises:
        InfeasibleEndpointError: naming the first component whose CVaR exceeds epsilon
    """
    states = gmm.states()
    try:
        cvar = cvar_values(states, grid, alpha)[0]
    except DomainError as exc:
        raise InfeasibleEndpointError(f"{label} mixture has a component outside the workspace: {exc.detail}") from exc
    bad = np.flatnonzero(cvar > epsilon)
    if len(bad):
        i = int(bad[0])
        raise InfeasibleEndpointError(
            f"{label} component {i} has CVaR {cvar[i]:.3f} above epsilon {epsilon}"
        )


def pairwise_trajectory_costs(
    trajs: Mapping[tuple[int, int], GaussianTrajectory],
    grid: EsdfGrid,
    weights: CostWeights,
    model: GpModel,
    n_start: int,
    n_goal: int,
) -> np.ndarray:
    """
    N1 x N2 matrix of total_cost of each pair's trajectory.

    Raises:
        PlanningError: if a pair has no trajectory or a cost is not finite
    """
    cost = np.empty((n_start, n_goal))
    for i in range(n_start):
        for j in range(n_goal):
            if (i, j) not in trajs:
                raise PlanningError(f"no trajectory for component pair ({i}, {j})")
            cost[i, j] = total_cost(trajs[(i, j)], grid, weights, model)
    if not np.all(np.isfinite(cost)):
        raise PlanningError("pairwise trajectory costs are not finite")
    return cost


def plan_macro(
    ws: Workspace,
    grid: EsdfGrid,
    start_gmm: Gmm,
    goal_gmm: Gmm,
    prior: DiffusionPrior,
    weights: CostWeights,
    gp_model: GpModel,
    params: PlannerSection,
    seed: int,
) -> tuple[GmmTrajectory, MacroStats]:
    """
    Build the GMM trajectory between two endpoint mixtures.

    For each component pair `samples_per_pair` guided trajectories are drawn
    (all pairs in one network batch) and the cheapest one kept. The pair
    costs feed the transport LP; each positive plan entry contributes one
    trajectory weighted by that entry.

    The workspace gives the exact endpoint checks and must match the grid
    extent to within one resolution cell.

    Raises:
        DomainError: if the grid was not built for the workspace
        InfeasibleEndpointError: if a mixture component sits off the free
            space or violates the risk bound
        PlanningError: if a pair's best trajectory exceeds the collision cap
    """
    began = time.perf_counter()
    if abs(grid.width - ws.width) > grid.resolution or abs(grid.height - ws.height) > grid.resolution:
        raise DomainError(
            f"grid extent {grid.width:g} x {grid.height:g} does not match workspace {ws.width:g} x {ws.height:g}"
        )
    check_endpoint_geometry(start_gmm, ws, "start")
    check_endpoint_geometry(goal_gmm, ws, "goal")
    check_endpoint_feasibility(start_gmm, grid, weights.alpha, weights.epsilon, "start")
    check_endpoint_feasibility(goal_gmm, grid, weights.alpha, weights.epsilon, "goal")
    n1, n2 = len(start_gmm), len(goal_gmm)
    pairs = [(i, j) for i in range(n1) for j in range(n2)]
    contexts = [
        build_context(start_gmm.components[i], goal_gmm.components[j], grid, prior.context) for i, j in pairs
    ]
    samples, sampling = guided_sample_batch(
        contexts, grid, weights, gp_model, prior, params.samples_per_pair, derive_seed(seed, "macro"),
        guidance_weight=params.guidance_weight, guidance_clip=params.guidance_clip,
        dt=params.macro_dt, workers=params.workers,
    )

    best: dict[tuple[int, int], GaussianTrajectory] = {}
    sample_costs = {}
    for pair, candidates in zip(pairs, samples):
        costs = batch_total_cost(candidates, grid, weights, gp_model, workers=params.workers)
        k = int(np.argmin(costs))
        chosen = candidates[k]
        collision = collision_cost(chosen, grid, weights.alpha, weights.epsilon)
        if collision > params.hard_cap:
            raise PlanningError(
                f"component pair {pair}: best of {len(candidates)} samples has collision cost "
                f"{collision:.3f} above the cap {params.hard_cap}"
            )
        best[pair] = chosen
        sample_costs[pair] = costs
        logger.debug("pair=%s best_sample=%d cost=%.4f collision=%.4f", pair, k, costs[k], collision)

    cost = pairwise_trajectory_costs(best, grid, weights, gp_model, n1, n2)
    solution = solve_transport_lp(cost, start_gmm.weights, goal_gmm.weights)
    kept = [(i, j) for i, j in pairs if solution.plan[i, j] > 0]
    alphas = np.array([solution.plan[i, j] for i, j in kept])
    alphas = alphas / alphas.sum()

    gmm_traj = GmmTrajectory(
        trajectories=[best[p] for p in kept],
        alphas=[float(a) for a in alphas],
        plan=solution.plan,
        start_gmm=start_gmm,
        goal_gmm=goal_gmm,
        pairs=kept,
    )
    elapsed = time.perf_counter() - began
    logger.info("macro plan n_start=%d n_goal=%d K=%d objective=%.4f projected=%d T_macro=%.3f",
                n1, n2, len(kept), solution.objective, sampling.projected, elapsed)
    stats = MacroStats(
        cost_matrix=cost, objective=solution.objective, projected=sampling.projected,
        elapsed=elapsed, sample_costs=sample_costs,
    )
    return gmm_traj, stats


def _check_index(gmm_traj: GmmTrajectory, t_index: int) -> None:
    if not 0 <= t_index < gmm_traj.horizon:
        raise DomainError(f"time index {t_index} outside 0..{gmm_traj.horizon - 1}")


def evaluate_gmm_at(gmm_traj: GmmTrajectory, t_index: int, merge_threshold: float = 0.05) -> Gmm:
    """Mixture of the K trajectories' states at t_index with weights alpha, near-duplicates merged."""
    _check_index(gmm_traj, t_index)
    states = np.stack([traj.states[t_index] for traj in gmm_traj.trajectories])
    weights, merged = merge_components(gmm_traj.alphas, states, merge_threshold)
    return gmm_from_arrays(weights, merged)


def _merged(alphas: np.ndarray, states: np.ndarray, threshold: float) -> tuple[Gmm, np.ndarray]:
    """Merged mixture plus the component label of every trajectory."""
    groups = merge_groups(states, threshold)
    labels = np.empty(len(states), dtype=int)
    for g, members in enumerate(groups):
        labels[members] = g
    weights, merged = merge_components(alphas, states, threshold)
    return gmm_from_arrays(weights, merged), labels


def gmm_transition(
    gmm_traj: GmmTrajectory, t_index: int, merge_threshold: float = 0.05
) -> tuple[Gmm, Gmm, np.ndarray]:
    """
    Mixtures at t and t + 1 and the component-level plan between them.

    Trajectory k carries weight alpha_k from its component at t to its
    component at t + 1; the plan's row and column sums are the two mixtures'
    weights. At the last index the mixture maps onto itself.
    """
    _check_index(gmm_traj, t_index)
    alphas = np.asarray(gmm_traj.alphas, dtype=float)
    alphas = alphas / alphas.sum()
    nxt = min(t_index + 1, gmm_traj.horizon - 1)
    now_states = np.stack([traj.states[t_index] for traj in gmm_traj.trajectories])
    next_states = np.stack([traj.states[nxt] for traj in gmm_traj.trajectories])
    gmm_now, a = _merged(alphas, now_states, merge_threshold)
    gmm_next, b = _merged(alphas, next_states, merge_threshold)
    plan = np.zeros((len(gmm_now), len(gmm_next)))
    np.add.at(plan, (a, b), alphas)
    return gmm_now, gmm_next, plan


def risk_audit(gmm_traj: GmmTrajectory, grid: EsdfGrid, alpha: float) -> float:
    """Largest per-state CVaR over every trajectory of the plan."""
    states = np.concatenate([traj.states for traj in gmm_traj.trajectories])
    return float(np.max(cvar_values(states, grid, alpha)[0]))
