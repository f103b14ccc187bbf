# app/services/mission.py
"""Mission setup: robot spawn, goal points and the endpoint mixtures fitted to them."""
import logging
import math
import time
from dataclasses import dataclass

import numpy as np

from app.config import MissionConfig
from app.errors import SamplingError
from app.schemas.gaussian import GaussianState, Gmm
from app.schemas.geometry import Box, ScenarioParams
from app.schemas.robot import RobotState
from app.services.gaussian import fit_gmm_em
from app.services.seeding import derive_seed, rng

logger = logging.getLogger(__name__)

# Largest packing fraction attempted by random sequential placement
_PACKING = 0.3


@dataclass
class Mission:
    robots: list[RobotState]
    goal_points: np.ndarray
    start_gmm: Gmm
    goal_gmm: Gmm
    fit_time: float


def spawn_radius(count: int, cfg: MissionConfig, region: Box) -> float:
    """Disc radius that keeps the spawn packing below _PACKING and inside the region."""
    needed = cfg.min_spacing * math.sqrt(count / (4 * _PACKING))
    half = 0.5 * min(region[2] - region[0], region[3] - region[1])
    return min(max(cfg.spawn_radius, needed), half)


def spawn_points(region: Box, count: int, cfg: MissionConfig, seed: int, label: str = "spawn") -> np.ndarray:
    """
    `count` points uniform in a disc centered on the region with pairwise
    spacing at least min_spacing.

    Raises:
        SamplingError: if the points do not fit after 1000 draws per point
    """
    center = np.array([(region[0] + region[2]) / 2, (region[1] + region[3]) / 2])
    radius = spawn_radius(count, cfg, region)
    gen = rng(seed, label)
    points: list[np.ndarray] = []
    for _ in range(1000 * count):
        if len(points) == count:
            break
        r = radius * math.sqrt(gen.uniform())
        theta = gen.uniform(0.0, 2 * math.pi)
        p = center + r * np.array([math.cos(theta), math.sin(theta)])
        if all(np.hypot(*(p - q)) >= cfg.min_spacing for q in points):
            points.append(p)
    if len(points) < count:
        raise SamplingError(
            f"placed {len(points)} of {count} points with spacing {cfg.min_spacing} in a disc of radius {radius:.2f}"
        )
    return np.array(points)


def fit_endpoint_gmm(points: np.ndarray, k: int, cfg: MissionConfig, seed: int, sigma_floor: float) -> Gmm:
    """EM fit; with fewer than 2k points the component count drops, down to one component per point."""
    pts = np.asarray(points, dtype=float)
    k = max(1, min(k, len(pts) // 2))
    if len(pts) < 2:
        state = GaussianState(x=pts[0, 0], y=pts[0, 1], sigma_x=sigma_floor, sigma_y=sigma_floor, rho=0.0)
        return Gmm(weights=[1.0], components=[state])
    return fit_gmm_em(pts, k, seed, max_iter=cfg.em_iters, tol=cfg.em_tol)


def setup_mission(params: ScenarioParams, cfg: MissionConfig, seed: int, sigma_floor: float = 0.2) -> Mission:
    """Place the swarm in the start region, draw goal points in the goal region, fit both mixtures."""
    n = cfg.robot_count
    starts = spawn_points(params.start_region, n, cfg, derive_seed(seed, "mission"), "spawn")
    goals = spawn_points(params.goal_region, n, cfg, derive_seed(seed, "mission"), "goals")
    robots = [RobotState(id=k, position=tuple(p), radius=cfg.robot_radius) for k, p in enumerate(starts)]
    n_start, n_goal = cfg.components()
    began = time.perf_counter()
    start_gmm = fit_endpoint_gmm(starts, n_start, cfg, derive_seed(seed, "fit", "start"), sigma_floor)
    goal_gmm = fit_endpoint_gmm(goals, n_goal, cfg, derive_seed(seed, "fit", "goal"), sigma_floor)
    fit_time = time.perf_counter() - began
    logger.info("mission robots=%d n_start=%d n_goal=%d T_fit=%.3f", n, len(start_gmm), len(goal_gmm), fit_time)
    return Mission(robots=robots, goal_points=goals, start_gmm=start_gmm, goal_gmm=goal_gmm, fit_time=fit_time)
