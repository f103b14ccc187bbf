# app/services/mpc.py
"""
Per-robot predictive velocity control.

The decision variable is the stacked velocity sequence v_0..v_{N-1} of a
single integrator; positions are p + dt * cumsum(v). Neighbor avoidance
uses ORCA half-planes and obstacle avoidance a half-plane from the ESDF
normal at the current position.
"""
import logging
import time
from dataclasses import dataclass
from typing import Literal, Optional, Sequence

import numpy as np
import osqp
from scipy import sparse

from app.schemas.esdf import EsdfGrid
from app.schemas.robot import MpcConfig, RobotState
from app.services.esdf import in_bounds, query_sdf
from app.services.orca import orca_half_plane

logger = logging.getLogger(__name__)

_SOLVED = ("solved",)
_OSQP_SETTINGS = dict(verbose=False, eps_abs=1e-9, eps_rel=1e-9, polish=True, max_iter=20000)
# Velocity-units slack allowed on a half-plane after the final clamp
_PLANE_TOL = 1e-3


@dataclass
class MpcResult:
    velocity: np.ndarray
    status: Literal["tracking", "fallback", "stop"]
    solve_time: float


def clamp_velocity(v, v_prev, cfg: MpcConfig) -> np.ndarray:
    """Limit the change to a_max * dt, then the speed to v_max."""
    v = np.asarray(v, dtype=float)
    v_prev = np.asarray(v_prev, dtype=float)
    dv = v - v_prev
    step = cfg.a_max * cfg.dt
    norm = float(np.linalg.norm(dv))
    if norm > step:
        v = v_prev + dv * (step / norm)
    speed = float(np.linalg.norm(v))
    if speed > cfg.v_max:
        v = v * (cfg.v_max / speed)
    return v


def plane_violation(v, normals, offsets, cumulative, dt: float) -> float:
    """
    Largest shortfall of a one-step velocity against the half-planes, in
    velocity units; obstacle planes act on the displacement dt * v.
    """
    worst = 0.0
    for n, c, is_obstacle in zip(normals, offsets, cumulative):
        slack = float(n @ v) - (c / dt if is_obstacle else c)
        worst = max(worst, -slack)
    return worst


def linear_constraints(
    robot: RobotState, neighbors: Sequence[RobotState], grid: Optional[EsdfGrid], cfg: MpcConfig
) -> tuple[list[np.ndarray], list[float], list[bool]]:
    """
    Half-planes n . v >= c. The third list marks obstacle planes, which
    act on cumulative displacement instead of a single velocity.
    """
    normals, offsets, cumulative = [], [], []
    p = np.asarray(robot.position, dtype=float)
    v = np.asarray(robot.velocity, dtype=float)
    for other in neighbors:
        n, c = orca_half_plane(
            p, v, other.position, other.velocity, robot.radius + other.radius + cfg.safety_margin,
            cfg.orca_time_horizon, cfg.dt,
        )
        normals.append(n)
        offsets.append(c)
        cumulative.append(False)
    if grid is not None and bool(in_bounds(grid, p)):
        dist, n = query_sdf(grid, p)
        reach = cfg.v_max * cfg.dt * cfg.horizon
        if dist < robot.radius + cfg.safety_margin + reach:
            normals.append(n)
            offsets.append(robot.radius + cfg.safety_margin - dist)
            cumulative.append(True)
    return normals, offsets, cumulative


def _solve(P, q, A, lo, hi) -> Optional[np.ndarray]:
    prob = osqp.OSQP()
    prob.setup(sparse.triu(P, format="csc"), q, A, lo, hi, **_OSQP_SETTINGS)
    res = prob.solve()
    if res.info.status not in _SOLVED:
        return None
    return np.asarray(res.x, dtype=float)


def _tracking_problem(robot: RobotState, reference: np.ndarray, cfg: MpcConfig):
    n = cfg.horizon
    dt = cfg.dt
    p = np.asarray(robot.position, dtype=float)
    v_prev = np.asarray(robot.velocity, dtype=float)
    ref = np.asarray(reference, dtype=float).reshape(-1, 2)
    if len(ref) < n:
        ref = np.vstack([ref, np.repeat(ref[-1:], n - len(ref), axis=0)])
    ref = ref[:n]
    eye2 = sparse.identity(2, format="csc")
    # Positions after each step: p + dt * (L kron I) v
    cum = sparse.kron(sparse.tril(np.ones((n, n))), eye2, format="csc")
    diff = sparse.kron(sparse.identity(n) - sparse.eye(n, k=-1), eye2, format="csc")
    target = (ref - p).reshape(-1)
    first = np.zeros(2 * n)
    first[:2] = v_prev
    P = 2.0 * (cfg.w_track * dt * dt * (cum.T @ cum) + cfg.w_effort * (diff.T @ diff))
    q = -2.0 * (cfg.w_track * dt * (cum.T @ target) + cfg.w_effort * (diff.T @ first))
    return sparse.csc_matrix(P), np.asarray(q).reshape(-1), cum, diff, first


def _box_rows(n: int, cfg: MpcConfig, diff, first):
    speed = sparse.identity(2 * n, format="csc")
    step = cfg.a_max * cfg.dt
    rows = [speed, diff]
    lo = [np.full(2 * n, -cfg.v_max), first - step]
    hi = [np.full(2 * n, cfg.v_max), first + step]
    return rows, lo, hi


def _plane_rows(n: int, cfg: MpcConfig, cum, normals, offsets, cumulative):
    rows, lo, hi = [], [], []
    for normal, c, is_obstacle in zip(normals, offsets, cumulative):
        block = sparse.kron(sparse.identity(n), sparse.csc_matrix(normal[None, :]), format="csc")
        if is_obstacle:
            rows.append(cfg.dt * block @ cum)
        else:
            rows.append(block)
        lo.append(np.full(n, c))
        hi.append(np.full(n, np.inf))
    return rows, lo, hi


def _cuts(x: np.ndarray, n: int, cfg: MpcConfig, v_prev: np.ndarray):
    """Tangent cuts for steps whose speed or change exceeds the disc limits."""
    rows, hi = [], []
    v = x.reshape(n, 2)
    prev = np.vstack([v_prev[None], v[:-1]])
    for k in range(n):
        speed = np.linalg.norm(v[k])
        if speed > cfg.v_max + 1e-9:
            row = np.zeros(2 * n)
            row[2 * k:2 * k + 2] = v[k] / speed
            rows.append(row)
            hi.append(cfg.v_max)
        dv = v[k] - prev[k]
        change = np.linalg.norm(dv)
        if change > cfg.a_max * cfg.dt + 1e-9:
            row = np.zeros(2 * n)
            u = dv / change
            row[2 * k:2 * k + 2] = u
            if k > 0:
                row[2 * k - 2:2 * k] = -u
            rows.append(row)
            hi.append(cfg.a_max * cfg.dt + (u @ v_prev if k == 0 else 0.0))
    return rows, hi


def _solve_with_cuts(P, q, rows, lo, hi, n, cfg, v_prev) -> Optional[np.ndarray]:
    x = None
    for _ in range(cfg.cutting_planes + 1):
        A = sparse.vstack(rows, format="csc")
        x = _solve(P, q, A, np.concatenate(lo), np.concatenate(hi))
        if x is None:
            return None
        cut_rows, cut_hi = _cuts(x, n, cfg, v_prev)
        if not cut_rows:
            break
        rows = rows + [sparse.csc_matrix(np.array(cut_rows))]
        lo = lo + [np.full(len(cut_hi), -np.inf)]
        hi = hi + [np.array(cut_hi)]
    return x


def mpc_step(
    robot: RobotState,
    reference,
    neighbors: Sequence[RobotState],
    grid: Optional[EsdfGrid],
    cfg: MpcConfig,
) -> MpcResult:
    """
    Commanded velocity for one control step.

    Solves the tracking QP over the horizon; if it is infeasible, or the
    speed and acceleration clamp pushes its first velocity off a half-plane,
    the single-step velocity closest to the tracking velocity that satisfies
    the same half-planes; if that fails too, a hard stop decelerating at a_max.
    """
    began = time.perf_counter()
    ref = np.asarray(reference, dtype=float).reshape(-1, 2)
    if len(ref) == 0:
        raise ValueError("mpc_step needs at least one reference waypoint")
    n = cfg.horizon
    v_prev = np.asarray(robot.velocity, dtype=float)
    normals, offsets, cumulative = linear_constraints(robot, neighbors, grid, cfg)

    P, q, cum, diff, first = _tracking_problem(robot, ref, cfg)
    rows, lo, hi = _box_rows(n, cfg, diff, first)
    p_rows, p_lo, p_hi = _plane_rows(n, cfg, cum, normals, offsets, cumulative)
    x = _solve_with_cuts(P, q, rows + p_rows, lo + p_lo, hi + p_hi, n, cfg, v_prev)
    if x is not None:
        v = clamp_velocity(x[:2], v_prev, cfg)
        if plane_violation(v, normals, offsets, cumulative, cfg.dt) <= _PLANE_TOL:
            return MpcResult(velocity=v, status="tracking", solve_time=time.perf_counter() - began)
        logger.debug("mpc clamp broke a half-plane robot=%d", robot.id)

    # Minimum deviation from the tracking velocity under the one-step constraints
    one = MpcConfig(**{**cfg.model_dump(), "horizon": 1})
    wanted = (ref[0] - np.asarray(robot.position, dtype=float)) / cfg.dt
    P1 = sparse.identity(2, format="csc") * 2.0
    q1 = -2.0 * wanted
    diff1 = sparse.identity(2, format="csc")
    cum1 = sparse.identity(2, format="csc")
    rows1, lo1, hi1 = _box_rows(1, one, diff1, v_prev.copy())
    p_rows1, p_lo1, p_hi1 = _plane_rows(1, one, cum1, normals, offsets, cumulative)
    x = _solve_with_cuts(P1, q1, rows1 + p_rows1, lo1 + p_lo1, hi1 + p_hi1, 1, one, v_prev)
    if x is not None:
        v = clamp_velocity(x, v_prev, cfg)
        if plane_violation(v, normals, offsets, cumulative, cfg.dt) <= _PLANE_TOL:
            return MpcResult(velocity=v, status="fallback", solve_time=time.perf_counter() - began)

    logger.debug("mpc hard stop robot=%d neighbors=%d", robot.id, len(neighbors))
    v = clamp_velocity(np.zeros(2), v_prev, cfg)
    return MpcResult(velocity=v, status="stop", solve_time=time.perf_counter() - began)
