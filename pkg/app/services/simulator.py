# app/services/simulator.py
"""Synchronous kinematic simulation of the swarm tracking a GMM trajectory."""
import logging
import math
import sys
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree
from tqdm import tqdm

from app.errors import DomainError
from app.schemas.esdf import EsdfGrid
from app.schemas.geometry import Scenario
from app.schemas.robot import MpcConfig, RobotState, SwarmFrame, SwarmLog, SwarmLogHeader
from app.schemas.trajectory import GmmTrajectory
from app.services.density_control import assign_targets, density_targets
from app.services.esdf import query_sdf_batch
from app.services.macro_planner import gmm_transition
from app.services.mpc import MpcResult, mpc_step
from app.services.seeding import derive_seed, rng

logger = logging.getLogger(__name__)


@dataclass
class SimulationStats:
    elapsed: float
    mpc_time_mean: float
    steps: int


def substeps(macro_dt: float, cfg: MpcConfig) -> int:
    return max(1, int(round(macro_dt / cfg.dt)))


def step_budget(gmm_traj: GmmTrajectory, cfg: MpcConfig) -> int:
    if cfg.max_steps is not None:
        return cfg.max_steps
    return (gmm_traj.horizon - 1) * substeps(gmm_traj.dt, cfg) + int(math.ceil(cfg.settle_time / cfg.dt))


def interpolated_reference(start: np.ndarray, target: np.ndarray, sub: int, substep: int, horizon: int) -> np.ndarray:
    """
    Waypoints for the next `horizon` control steps on the straight line from
    the interval's start position to its target, reaching it at the interval end.

    Returns:
        (N, horizon, 2)
    """
    frac = np.minimum((substep + 1 + np.arange(horizon)) / sub, 1.0)
    return start[:, None, :] + frac[None, :, None] * (target - start)[:, None, :]


def surface_distances(positions: np.ndarray, radius: float, grid: EsdfGrid) -> tuple[Optional[float], float]:
    """(min robot-robot, min robot-obstacle) surface distance of one frame."""
    d_rob = None
    if len(positions) > 1:
        nearest, _ = cKDTree(positions).query(positions, k=2)
        d_rob = float(nearest[:, 1].min() - 2 * radius)
    lo = np.array(grid.origin)
    hi = lo + np.array([grid.width, grid.height])
    dist, _, _ = query_sdf_batch(grid, np.clip(positions, lo, hi))
    return d_rob, float(dist.min() - radius)


def _frame(t: float, positions: np.ndarray, velocities: np.ndarray, radius: float, grid: EsdfGrid) -> SwarmFrame:
    d_rob, d_obs = surface_distances(positions, radius, grid)
    return SwarmFrame(
        t=round(t, 9),
        positions=[(float(x), float(y)) for x, y in positions],
        velocities=[(float(x), float(y)) for x, y in velocities],
        min_robot_distance=d_rob,
        min_obstacle_distance=d_obs,
    )


def control_step(
    positions: np.ndarray,
    velocities: np.ndarray,
    radius: float,
    references: np.ndarray,
    grid: EsdfGrid,
    cfg: MpcConfig,
    workers: int = 1,
) -> list[MpcResult]:
    """All robots solve against the same snapshot; results in robot order."""
    snapshot = [
        RobotState(id=i, position=(float(p[0]), float(p[1])), velocity=(float(v[0]), float(v[1])), radius=radius)
        for i, (p, v) in enumerate(zip(positions, velocities))
    ]
    neighbor_sets = cKDTree(positions).query_ball_point(positions, r=cfg.neighbor_radius)

    def solve(i: int) -> MpcResult:
        neighbors = [snapshot[j] for j in sorted(neighbor_sets[i]) if j != i]
        return mpc_step(snapshot[i], references[i], neighbors, grid, cfg)

    if workers <= 1:
        return [solve(i) for i in range(len(snapshot))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(solve, range(len(snapshot))))


def simulate(
    robots: Sequence[RobotState],
    gmm_traj: GmmTrajectory,
    grid: EsdfGrid,
    cfg: MpcConfig,
    seed: int,
    *,
    scenario: Scenario,
    merge_threshold: float = 0.05,
    workers: int = 1,
    config_hash: Optional[str] = None,
) -> tuple[SwarmLog, SimulationStats]:
    """
    Track the GMM trajectory with the whole swarm.

    At every macroscopic index the previous interval's targets (the spawn
    positions at the first index) are mapped through density control into the
    next mixture, so the final targets are a transport of the spawn positions
    onto the goal mixture however far the robots lag. An optimal assignment
    hands those targets to the robots and waypoints run linearly from each
    robot's position to its target over the interval. After the last index
    the robots hold their final targets until all are within the capture
    radius or the step budget runs out. A run succeeds when every interval
    was dispatched, every robot is captured at its goal-mixture target and no
    frame shows a negative surface distance.
    """
    began = time.perf_counter()
    if not robots:
        raise DomainError("simulation needs at least one robot")
    radius = robots[0].radius
    positions = np.array([r.position for r in robots], dtype=float)
    velocities = np.array([r.velocity for r in robots], dtype=float)
    sub = substeps(gmm_traj.dt, cfg)
    budget = step_budget(gmm_traj, cfg)
    noise = rng(seed, "process_noise")
    warnings: Counter = Counter()
    solve_times: list[float] = []
    frames = [_frame(0.0, positions, velocities, radius, grid)]
    step = 0
    targets = positions.copy()
    dispatched = 0

    def advance(references: np.ndarray) -> None:
        nonlocal positions, velocities, step
        results = control_step(positions, velocities, radius, references, grid, cfg, workers)
        for res in results:
            solve_times.append(res.solve_time)
            if res.status != "tracking":
                warnings[f"mpc_{res.status}"] += 1
        velocities = np.array([res.velocity for res in results])
        positions = positions + velocities * cfg.dt
        if cfg.process_noise > 0:
            positions = positions + noise.normal(0.0, cfg.process_noise, positions.shape)
        step += 1
        frames.append(_frame(step * cfg.dt, positions, velocities, radius, grid))

    bar = tqdm(total=budget, desc="simulate", disable=not sys.stderr.isatty(), leave=False)
    try:
        for k in range(gmm_traj.horizon - 1):
            if step >= budget:
                break
            gmm_now, gmm_next, plan = gmm_transition(gmm_traj, k, merge_threshold)
            raw, fallbacks = density_targets(
                targets, gmm_now, gmm_next, plan, derive_seed(seed, "density", k), cfg.selection
            )
            warnings["mahalanobis_fallback"] += fallbacks
            assignment = assign_targets(positions, raw)
            targets = raw[assignment.mapping]
            dispatched += 1
            start = positions.copy()
            for s in range(sub):
                if step >= budget:
                    break
                advance(interpolated_reference(start, targets, sub, s, cfg.horizon))
                bar.update(1)

        def captured() -> bool:
            return bool(np.all(np.linalg.norm(positions - targets, axis=1) <= cfg.capture_radius))

        hold = np.repeat(targets[:, None, :], cfg.horizon, axis=1)
        while not captured() and step < budget:
            advance(hold)
            bar.update(1)
        done = dispatched == gmm_traj.horizon - 1 and captured()
    finally:
        bar.close()

    d_rob = [f.min_robot_distance for f in frames if f.min_robot_distance is not None]
    d_obs = [f.min_obstacle_distance for f in frames]
    collision_free = (not d_rob or min(d_rob) >= 0.0) and min(d_obs) >= 0.0
    success = done and collision_free
    if warnings.get("mpc_stop"):
        logger.warning("simulation hit %d deadlock hard stops", warnings["mpc_stop"])
    counts = {k: int(v) for k, v in sorted(warnings.items()) if v}

    header = SwarmLogHeader(
        scenario=scenario,
        robot_radius=radius,
        robot_count=len(robots),
        dt=cfg.dt,
        capture_radius=cfg.capture_radius,
        targets=[(float(x), float(y)) for x, y in targets],
        seed=seed,
        config_hash=config_hash,
        merge_threshold=merge_threshold,
        selection=cfg.selection,
        success=success,
        task_time=round(step * cfg.dt, 9) if done else None,
        warnings=counts,
    )
    elapsed = time.perf_counter() - began
    stats = SimulationStats(
        elapsed=elapsed,
        mpc_time_mean=float(np.mean(solve_times)) if solve_times else 0.0,
        steps=step,
    )
    logger.info("simulation robots=%d steps=%d success=%s captured=%s T_micro=%.3f",
                len(robots), step, success, done, elapsed)
    return SwarmLog(header=header, frames=frames), stats
