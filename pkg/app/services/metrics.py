# app/services/metrics.py
from typing import Optional

import numpy as np

from app.schemas.metrics import MetricsReport
from app.schemas.robot import SwarmLog


def log_metrics(log: SwarmLog) -> dict:
    """
    Reduce a swarm log to its distance metrics.

    D_bar is the mean over robots of the summed per-step displacement;
    d_obs and d_rob are minima of the per-frame surface distances.
    """
    positions = np.array([frame.positions for frame in log.frames], dtype=float)
    steps = np.linalg.norm(np.diff(positions, axis=0), axis=2) if len(positions) > 1 else np.zeros((0, 0))
    d_bar = float(steps.sum(axis=0).mean()) if steps.size else 0.0
    rob = [f.min_robot_distance for f in log.frames if f.min_robot_distance is not None]
    obs = [f.min_obstacle_distance for f in log.frames if f.min_obstacle_distance is not None]
    return {
        "D_bar": d_bar,
        "d_obs": min(obs) if obs else None,
        "d_rob": min(rob) if rob else None,
        "success": log.header.success,
        "T_task": log.header.task_time or 0.0,
    }


def build_report(
    log: SwarmLog,
    *,
    seed: int,
    config_hash: Optional[str] = None,
    T_macro: float = 0.0,
    T_micro: float = 0.0,
    T_fit: float = 0.0,
    T_load: float = 0.0,
    T_mpc: float = 0.0,
) -> MetricsReport:
    return MetricsReport.build(
        T_macro=T_macro, T_micro=T_micro, T_fit=T_fit, T_load=T_load, T_mpc=T_mpc,
        seed=seed, config_hash=config_hash, **log_metrics(log),
    )
