# app/services/costs.py
"""
Macroscopic trajectory costs: CVaR collision, Wasserstein transport and the
constant-velocity GP prior, plus their analytic gradients.

Trajectories are handled as (H, 5) arrays internally.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence

import numpy as np

from app.errors import DomainError
from app.schemas.esdf import EsdfGrid
from app.schemas.gaussian import GaussianState
from app.schemas.trajectory import CostWeights, GaussianTrajectory, GpModel
from app.services.esdf import query_sdf_batch
from app.services.gaussian import covariance, wasserstein2_sq_batch

logger = logging.getLogger(__name__)

# Extended state layout: (value index, derivative index) for x, y, sigma_x, sigma_y, rho
EXTENDED_INDEX = ((0, 2), (1, 3), (4, 7), (5, 8), (6, 9))
_W2_EPS = 1e-12

# Acklam's rational approximation of the standard-normal quantile
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00, 3.754408661907416e00)
_P_LOW = 0.02425


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / math.sqrt(2 * math.pi)


def normal_quantile(p: float) -> float:
    """
    Inverse standard-normal CDF.

    Acklam's rational approximation (relative error 1.15e-9) refined by one
    Halley step against erfc, which brings the error below 1e-12 on (0, 1).
    """
    if not 0.0 < p < 1.0:
        raise DomainError(f"quantile probability must lie in (0, 1), got {p}")
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    elif p <= 1 - _P_LOW:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
            (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
            ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1 + 0.5 * x * u)


def cvar_multiplier(alpha: float) -> float:
    """phi(Phi^-1(1 - alpha)) / alpha"""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    return normal_pdf(normal_quantile(1.0 - alpha)) / alpha


def _as_states(traj) -> np.ndarray:
    if isinstance(traj, GaussianTrajectory):
        return np.asarray(traj.states)
    return np.asarray(traj, dtype=float)


def _variance_along(states: np.ndarray, normals: np.ndarray) -> np.ndarray:
    cov = covariance(states)
    return np.einsum("ni,nij,nj->n", normals, cov, normals)


def cvar_values(
    states, grid: EsdfGrid, alpha: float, normals: Optional[np.ndarray] = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Per-state CVaR of the negative signed distance.

    Returns:
        (cvar (N,), normals (N, 2), sdf gradient (N, 2))
    """
    s = np.atleast_2d(np.asarray(states, dtype=float))
    dist, n, dgrad = query_sdf_batch(grid, s[:, :2])
    if normals is not None:
        n = np.asarray(normals, dtype=float)
    return -dist + cvar_multiplier(alpha) * _variance_along(s, n), n, dgrad


def cvar_collision(state: GaussianState, grid: EsdfGrid, alpha: float) -> float:
    """-s(mu) + phi(Phi^-1(1 - alpha)) / alpha * n^T Sigma n, with n the ESDF normal at mu."""
    return float(cvar_values(state.to_array()[None], grid, alpha)[0][0])


def collision_cost(traj, grid: EsdfGrid, alpha: float, epsilon: float, normals: Optional[np.ndarray] = None) -> float:
    """Sum over states of max(0, CVaR - epsilon)."""
    cvar, _, _ = cvar_values(_as_states(traj), grid, alpha, normals)
    return float(np.sum(np.maximum(cvar - epsilon, 0.0)))


def collision_gradient(states, grid: EsdfGrid, alpha: float, epsilon: float, normals=None) -> np.ndarray:
    """Gradient of collision_cost with the normal held fixed, (H, 5)."""
    s = _as_states(states)
    cvar, n, dgrad = cvar_values(s, grid, alpha, normals)
    active = (cvar - epsilon > 0.0).astype(float)
    m = cvar_multiplier(alpha)
    sx, sy, rho = s[:, 2], s[:, 3], s[:, 4]
    nx, ny = n[:, 0], n[:, 1]
    g = np.zeros_like(s)
    g[:, 0] = -dgrad[:, 0]
    g[:, 1] = -dgrad[:, 1]
    g[:, 2] = m * (2 * nx * nx * sx + 2 * nx * ny * rho * sy)
    g[:, 3] = m * (2 * ny * ny * sy + 2 * nx * ny * rho * sx)
    g[:, 4] = m * (2 * nx * ny * sx * sy)
    return g * active[:, None]


def transport_cost(traj) -> float:
    """Cumulative W2 between consecutive states."""
    s = _as_states(traj)
    return float(np.sum(np.sqrt(wasserstein2_sq_batch(s[:-1], s[1:]))))


def _dw2_sq_dstate(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """d W2^2 / d s1 for (N, 5) pairs."""
    c1, c2 = covariance(s1), covariance(s2)
    det1 = c1[:, 0, 0] * c1[:, 1, 1] - c1[:, 0, 1] ** 2
    det2 = c2[:, 0, 0] * c2[:, 1, 1] - c2[:, 0, 1] ** 2
    root = np.sqrt(np.maximum(det1 * det2, 0.0))
    r = np.sqrt(np.einsum("nij,nji->n", c1, c2) + 2 * root)
    g_cov = np.eye(2)[None] - (c2 + root[:, None, None] * np.linalg.inv(c1)) / r[:, None, None]

    sx, sy, rho = s1[:, 2], s1[:, 3], s1[:, 4]
    zero = np.zeros_like(sx)
    d_sx = np.stack([np.stack([2 * sx, rho * sy], -1), np.stack([rho * sy, zero], -1)], -2)
    d_sy = np.stack([np.stack([zero, rho * sx], -1), np.stack([rho * sx, 2 * sy], -1)], -2)
    d_rho = np.stack([np.stack([zero, sx * sy], -1), np.stack([sx * sy, zero], -1)], -2)

    out = np.zeros_like(s1)
    out[:, :2] = 2 * (s1[:, :2] - s2[:, :2])
    out[:, 2] = np.einsum("nij,nij->n", g_cov, d_sx)
    out[:, 3] = np.einsum("nij,nij->n", g_cov, d_sy)
    out[:, 4] = np.einsum("nij,nij->n", g_cov, d_rho)
    return out


def transport_gradient(states) -> np.ndarray:
    """Gradient of transport_cost, (H, 5); zero contribution from coincident pairs."""
    s = _as_states(states)
    a, b = s[:-1], s[1:]
    w = np.sqrt(wasserstein2_sq_batch(a, b))
    scale = np.where(w > _W2_EPS, 0.5 / np.maximum(w, _W2_EPS), 0.0)[:, None]
    g = np.zeros_like(s)
    g[:-1] += scale * _dw2_sq_dstate(a, b)
    g[1:] += scale * _dw2_sq_dstate(b, a)
    return g


def build_gp_model(dt: float, q_position: float, q_shape: float) -> GpModel:
    """
    Constant-velocity transition with white-noise-on-acceleration blocks
    q * [[dt^3/3, dt^2/2], [dt^2/2, dt]] per (value, derivative) pair.
    """
    phi = np.eye(10)
    q = np.zeros((10, 10))
    block = np.array([[dt ** 3 / 3, dt ** 2 / 2], [dt ** 2 / 2, dt]])
    for channel, (v, d) in enumerate(EXTENDED_INDEX):
        phi[v, d] = dt
        density = q_position if channel < 2 else q_shape
        q[np.ix_([v, d], [v, d])] = density * block
    return GpModel(transition=phi, process_noise=q, dt=dt)


def _difference_matrix(h: int, dt: float) -> np.ndarray:
    # Row t of D @ v is np.gradient(v, dt)[t]
    return np.gradient(np.eye(h), dt, axis=0)


def extended_states(traj, dt: float) -> np.ndarray:
    """
    Lift (H, 5) states to (H, 10) extended states.

    Derivatives are central differences, one-sided at the ends.
    """
    s = _as_states(traj)
    deriv = np.gradient(s, dt, axis=0)
    ext = np.zeros((len(s), 10))
    for c, (v, d) in enumerate(EXTENDED_INDEX):
        ext[:, v] = s[:, c]
        ext[:, d] = deriv[:, c]
    return ext


def _gp_residuals(s: np.ndarray, model: GpModel) -> tuple[np.ndarray, np.ndarray]:
    if len(s) < 3:
        raise DomainError(f"the GP cost needs at least 3 states, got {len(s)}")
    ext = extended_states(s, model.dt)
    resid = ext[:-1] @ model.transition.T - ext[1:]
    return resid, np.linalg.inv(model.process_noise)


def gp_cost(traj, model: GpModel) -> float:
    """1/2 sum_t ||Phi s_t - s_{t+1}||^2 in the Q^-1 norm."""
    resid, q_inv = _gp_residuals(_as_states(traj), model)
    return float(0.5 * np.einsum("ti,ij,tj->", resid, q_inv, resid))


def gp_gradient(states, model: GpModel) -> np.ndarray:
    s = _as_states(states)
    resid, q_inv = _gp_residuals(s, model)
    a = resid @ q_inv
    g_ext = np.zeros((len(s), 10))
    g_ext[:-1] += a @ model.transition
    g_ext[1:] -= a
    diff_t = _difference_matrix(len(s), model.dt).T
    g = np.zeros_like(s)
    for c, (v, d) in enumerate(EXTENDED_INDEX):
        g[:, c] = g_ext[:, v] + diff_t @ g_ext[:, d]
    return g


def total_cost(traj, grid: EsdfGrid, weights: CostWeights, model: GpModel, normals=None) -> float:
    """Weighted sum lambda_obs * collision + lambda_dis * transport + lambda_gp * gp."""
    s = _as_states(traj)
    total = 0.0
    if weights.lambda_obs:
        total += weights.lambda_obs * collision_cost(s, grid, weights.alpha, weights.epsilon, normals)
    if weights.lambda_dis:
        total += weights.lambda_dis * transport_cost(s)
    if weights.lambda_gp:
        total += weights.lambda_gp * gp_cost(s, model)
    return total


def cost_gradient(traj, grid: EsdfGrid, weights: CostWeights, model: GpModel, normals=None) -> np.ndarray:
    """
    Descent direction -sum_i lambda_i grad c_i, one 5-vector per node.

    The collision term holds the ESDF normal fixed.
    """
    s = _as_states(traj)
    g = np.zeros_like(s)
    if weights.lambda_obs:
        g += weights.lambda_obs * collision_gradient(s, grid, weights.alpha, weights.epsilon, normals)
    if weights.lambda_dis:
        g += weights.lambda_dis * transport_gradient(s)
    if weights.lambda_gp:
        g += weights.lambda_gp * gp_gradient(s, model)
    return -g


def _map(fn, items: Sequence, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def batch_total_cost(trajs: Sequence, grid: EsdfGrid, weights: CostWeights, model: GpModel, workers: int = 1) -> np.ndarray:
    """total_cost over many trajectories, results in input order."""
    return np.array(_map(lambda t: total_cost(t, grid, weights, model), list(trajs), workers))


def batch_cost_gradient(trajs: Sequence, grid: EsdfGrid, weights: CostWeights, model: GpModel, workers: int = 1) -> np.ndarray:
    """cost_gradient over many trajectories, (B, H, 5) in input order."""
    return np.stack(_map(lambda t: cost_gradient(t, grid, weights, model), list(trajs), workers))
