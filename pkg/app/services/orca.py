# app/services/orca.py
"""Reciprocal velocity-obstacle half-planes in the RVO2 construction."""
import math

import numpy as np


def _det(a: np.ndarray, b: np.ndarray) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def orca_half_plane(
    p_a, v_a, p_b, v_b, combined_radius: float, time_horizon: float, dt: float
) -> tuple[np.ndarray, float]:
    """
    Half-plane of velocities for robot a that avoid robot b for time_horizon,
    with a taking half of the avoidance responsibility.

    Returns:
        (n, c) such that the permitted velocities satisfy n . v >= c
    """
    p_a, v_a, p_b, v_b = (np.asarray(x, dtype=float) for x in (p_a, v_a, p_b, v_b))
    rel_pos = p_b - p_a
    rel_vel = v_a - v_b
    dist_sq = float(rel_pos @ rel_pos)
    r = combined_radius
    r_sq = r * r

    if dist_sq > r_sq:
        inv_tau = 1.0 / time_horizon
        w = rel_vel - inv_tau * rel_pos
        w_len_sq = float(w @ w)
        dot1 = float(w @ rel_pos)
        if dot1 < 0.0 and dot1 * dot1 > r_sq * w_len_sq:
            # Project on the cut-off circle
            w_len = math.sqrt(w_len_sq)
            unit_w = w / w_len
            direction = np.array([unit_w[1], -unit_w[0]])
            u = (r * inv_tau - w_len) * unit_w
        else:
            # Project on the nearer leg
            leg = math.sqrt(dist_sq - r_sq)
            if _det(rel_pos, w) > 0.0:
                direction = np.array([
                    rel_pos[0] * leg - rel_pos[1] * r,
                    rel_pos[0] * r + rel_pos[1] * leg,
                ]) / dist_sq
            else:
                direction = -np.array([
                    rel_pos[0] * leg + rel_pos[1] * r,
                    -rel_pos[0] * r + rel_pos[1] * leg,
                ]) / dist_sq
            u = float(rel_vel @ direction) * direction - rel_vel
    else:
        # Already overlapping: resolve within one step
        inv_dt = 1.0 / dt
        w = rel_vel - inv_dt * rel_pos
        w_len = math.sqrt(float(w @ w))
        unit_w = w / w_len if w_len > 1e-12 else np.array([1.0, 0.0])
        direction = np.array([unit_w[1], -unit_w[0]])
        u = (r * inv_dt - w_len) * unit_w

    point = v_a + 0.5 * u
    normal = np.array([-direction[1], direction[0]])
    return normal, float(normal @ point)
