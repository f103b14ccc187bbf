# app/services/pipeline.py
"""End-to-end runs: mission setup, macroscopic planning and swarm simulation."""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.config import PlannerConfig, config_hash
from app.models.prior import DiffusionPrior
from app.schemas.esdf import EsdfGrid
from app.schemas.geometry import Scenario
from app.schemas.metrics import MetricsReport
from app.schemas.robot import RobotState, SwarmLog
from app.schemas.trajectory import PlanDocument
from app.services.costs import build_gp_model
from app.services.datagen import scenario_params
from app.services.esdf import build_esdf
from app.services.macro_planner import MacroStats, plan_macro
from app.services.metrics import build_report
from app.services.mission import setup_mission
from app.services.scenarios import generate_scenario
from app.services.seeding import derive_seed
from app.services.simulator import SimulationStats, simulate

logger = logging.getLogger(__name__)


@dataclass
class PlanOutcome:
    document: PlanDocument
    macro: MacroStats
    T_fit: float


@dataclass
class RunOutcome:
    plan: PlanOutcome
    log: SwarmLog
    simulation: SimulationStats
    report: MetricsReport


def scenario_for(cfg: PlannerConfig, seed: int) -> Scenario:
    """Generate the configured scenario family for one seed."""
    params = cfg.scenario
    ws = generate_scenario(params.kind, seed, params, boundary_obstacles=params.boundary_obstacles)
    return Scenario.from_workspace(
        ws, kind=params.kind, seed=seed, params=scenario_params(cfg), config_hash=config_hash(cfg),
    )


def grid_for(scenario: Scenario, cfg: PlannerConfig) -> EsdfGrid:
    return build_esdf(scenario.to_workspace(), cfg.esdf.resolution)


def plan_mission(
    scenario: Scenario,
    cfg: PlannerConfig,
    prior: DiffusionPrior,
    seed: int,
    grid: Optional[EsdfGrid] = None,
) -> PlanOutcome:
    """
    Spawn the swarm, fit the endpoint mixtures and plan the GMM trajectory.

    Args:
        scenario: Scene with its start and goal regions
        cfg: Planner config
        prior: Trained diffusion prior
        seed: Root seed of the run
        grid: Prebuilt ESDF of the scene

    Returns:
        The plan document together with the macro statistics and the EM fit time

    Raises:
        PlanningError: when spawning, endpoint checks or sampling fail
    """
    grid = grid if grid is not None else grid_for(scenario, cfg)
    mission = setup_mission(scenario.params, cfg.mission, seed, sigma_floor=cfg.sigma_bounds.sigma_min)
    gp_model = build_gp_model(cfg.gp.dt, cfg.gp.q_position, cfg.gp.q_shape)
    gmm_traj, macro = plan_macro(
        scenario.to_workspace(), grid, mission.start_gmm, mission.goal_gmm, prior, cfg.costs, gp_model,
        cfg.planner, seed,
    )
    document = PlanDocument(
        plan=gmm_traj,
        scenario=scenario,
        robots=[r.position for r in mission.robots],
        goal_points=[(float(x), float(y)) for x, y in mission.goal_points],
        robot_radius=cfg.mission.robot_radius,
        seed=seed,
        config_hash=config_hash(cfg),
    )
    return PlanOutcome(document=document, macro=macro, T_fit=mission.fit_time)


def robots_of(document: PlanDocument) -> list[RobotState]:
    return [
        RobotState(id=k, position=tuple(p), radius=document.robot_radius)
        for k, p in enumerate(document.robots)
    ]


def simulate_plan(
    document: PlanDocument,
    cfg: PlannerConfig,
    seed: int,
    grid: Optional[EsdfGrid] = None,
    workers: int = 1,
) -> tuple[SwarmLog, SimulationStats]:
    """Track a stored plan with the robots it was planned for."""
    grid = grid if grid is not None else grid_for(document.scenario, cfg)
    return simulate(
        robots_of(document),
        document.plan,
        grid,
        cfg.mpc,
        derive_seed(seed, "simulate"),
        scenario=document.scenario,
        merge_threshold=cfg.planner.merge_threshold,
        workers=workers,
        config_hash=config_hash(cfg),
    )


def run_mission(
    scenario: Scenario,
    cfg: PlannerConfig,
    prior: DiffusionPrior,
    seed: int,
    T_load: float = 0.0,
    workers: int = 1,
) -> RunOutcome:
    """Plan and simulate one mission and reduce it to a metrics report."""
    grid = grid_for(scenario, cfg)
    plan = plan_mission(scenario, cfg, prior, seed, grid)
    log, sim = simulate_plan(plan.document, cfg, seed, grid, workers)
    report = build_report(
        log,
        seed=seed,
        config_hash=config_hash(cfg),
        T_macro=plan.macro.elapsed,
        T_micro=sim.elapsed,
        T_fit=plan.T_fit,
        T_load=T_load,
        T_mpc=sim.mpc_time_mean,
    )
    logger.info("run seed=%d success=%s T_sol=%.3f D_bar=%s", seed, report.success, report.T_sol,
                "n/a" if report.D_bar is None else f"{report.D_bar:.2f}")
    return RunOutcome(plan=plan, log=log, simulation=sim, report=report)


def straight_line_bound(document: PlanDocument) -> float:
    """Mean distance from each robot to its nearest goal point."""
    starts = np.asarray(document.robots, dtype=float)
    goals = np.asarray(document.goal_points, dtype=float)
    dist = np.linalg.norm(starts[:, None, :] - goals[None, :, :], axis=2)
    return float(dist.min(axis=1).mean())
