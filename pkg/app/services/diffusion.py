# app/services/diffusion.py
"""
DDPM machinery over normalized (H, 5) trajectories: schedules, forward
corruption, the posterior mean and cost-guided reverse sampling.
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import torch

from app.config import ScheduleConfig
from app.errors import DomainError
from app.models.base import DenoiserBase
from app.models.prior import DiffusionPrior
from app.schemas.diffusion import Context, NoiseSchedule, Normalizer
from app.schemas.esdf import EsdfGrid
from app.schemas.trajectory import CostWeights, GaussianTrajectory, GpModel
from app.services.costs import batch_cost_gradient
from app.services.seeding import rng

logger = logging.getLogger(__name__)


@dataclass
class SamplingStats:
    projected: int = 0
    gradient_evaluations: int = 0


def cosine_betas(steps: int, s: float = 0.008, max_beta: float = 0.999) -> np.ndarray:
    """Betas of the squared-cosine alpha_bar schedule, made nondecreasing."""
    def alpha_bar(u: float) -> float:
        return math.cos((u + s) / (1 + s) * math.pi / 2) ** 2

    betas = np.array([min(1 - alpha_bar((t + 1) / steps) / alpha_bar(t / steps), max_beta) for t in range(steps)])
    betas = np.maximum(betas, 1e-8)
    return np.maximum.accumulate(betas)


def linear_betas(steps: int, beta_start: float, beta_end: float) -> np.ndarray:
    return np.linspace(beta_start, beta_end, steps)


def build_schedule(cfg: ScheduleConfig) -> NoiseSchedule:
    if cfg.kind == "cosine":
        betas = cosine_betas(cfg.steps, cfg.cosine_s, cfg.max_beta)
    else:
        betas = linear_betas(cfg.steps, cfg.beta_start, cfg.beta_end)
    return NoiseSchedule(kind=cfg.kind, betas=betas)


def _check_step(t: int, schedule: NoiseSchedule) -> None:
    if not 1 <= t <= schedule.steps:
        raise DomainError(f"diffusion step {t} outside 1..{schedule.steps}")


def forward_diffuse(traj0, t: int, schedule: NoiseSchedule, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Corrupt normalized trajectories to step t.

    Returns:
        (noisy, eps) with noisy = sqrt(ab_t) traj0 + sqrt(1 - ab_t) eps
    """
    _check_step(t, schedule)
    x0 = np.asarray(traj0, dtype=float)
    eps = rng(seed, "forward", t).standard_normal(x0.shape)
    ab = schedule.alpha_bars[t - 1]
    return math.sqrt(ab) * x0 + math.sqrt(1.0 - ab) * eps, eps


def _device(model: DenoiserBase) -> torch.device:
    return next(model.parameters()).device


def predict_eps(model: DenoiserBase, noisy, t, contexts) -> np.ndarray:
    """Network noise prediction for a batch, (B, H, 5)."""
    x = np.asarray(noisy, dtype=float)
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    ctx = np.atleast_2d(np.asarray(contexts, dtype=float))
    if len(ctx) == 1 and len(x) > 1:
        ctx = np.repeat(ctx, len(x), axis=0)
    steps = np.array(np.broadcast_to(np.asarray(t), (len(x),)))
    dtype = next(model.parameters()).dtype
    device = _device(model)
    with torch.no_grad():
        out = model(
            torch.as_tensor(x, dtype=dtype, device=device),
            torch.as_tensor(steps, dtype=torch.long, device=device),
            torch.as_tensor(ctx, dtype=dtype, device=device),
        )
    out = out.detach().cpu().double().numpy()
    return out[0] if squeeze else out


def posterior_mean(noisy, eps, t: int, schedule: NoiseSchedule) -> np.ndarray:
    """(x_t - beta_t / sqrt(1 - ab_t) * eps) / sqrt(alpha_t)"""
    _check_step(t, schedule)
    beta = schedule.betas[t - 1]
    ab = schedule.alpha_bars[t - 1]
    return (np.asarray(noisy) - beta / math.sqrt(1.0 - ab) * np.asarray(eps)) / math.sqrt(1.0 - beta)


def denoise_mean(noisy, t: int, context, model: DenoiserBase, schedule: NoiseSchedule) -> np.ndarray:
    """Posterior mean mu_theta(x_t, t, c) from the network's noise prediction."""
    _check_step(t, schedule)
    return posterior_mean(noisy, predict_eps(model, noisy, t, context), t, schedule)


def project_into_bounds(states: np.ndarray, grid: EsdfGrid) -> tuple[np.ndarray, int]:
    """Clip means into the grid extent; returns the projected states and how many moved."""
    lo = np.array(grid.origin)
    hi = lo + np.array([grid.width, grid.height])
    clipped = states.copy()
    clipped[..., :2] = np.clip(states[..., :2], lo, hi)
    moved = int(np.count_nonzero(np.any(clipped[..., :2] != states[..., :2], axis=-1)))
    return clipped, moved


def guidance_perturbation(
    mean_z: np.ndarray,
    t: int,
    grid: EsdfGrid,
    weights: CostWeights,
    gp_model: GpModel,
    normalizer: Normalizer,
    schedule: NoiseSchedule,
    weight: float,
    clip: Optional[float] = None,
    workers: int = 1,
) -> tuple[np.ndarray, int]:
    """
    Mean shift weight * Sigma_t * g for a batch of normalized means.

    g is the descent direction of the weighted cost at the denormalized
    mean, chained into normalized coordinates; Sigma_t is the clipped
    posterior variance. The gradient is norm-clipped per trajectory before
    scaling, so the shift is linear in `weight`.

    Returns:
        (shift (B, H, 5), count of projected out-of-bounds means)
    """
    phys = normalizer.denormalize(mean_z)
    phys, moved = project_into_bounds(phys, grid)
    g_phys = batch_cost_gradient(list(phys), grid, weights, gp_model, workers=workers)
    if clip is not None:
        norms = np.linalg.norm(g_phys.reshape(len(g_phys), -1), axis=1)
        factor = np.where(norms > clip, clip / np.maximum(norms, 1e-300), 1.0)
        g_phys = g_phys * factor[:, None, None]
    g_z = g_phys * normalizer.jacobian(phys)
    var = schedule.posterior_variance_clipped[t - 1]
    return weight * var * g_z, moved


def guided_sample_batch(
    contexts: Sequence[Context],
    grid: EsdfGrid,
    weights: CostWeights,
    gp_model: GpModel,
    prior: DiffusionPrior,
    k: int,
    seed: int,
    guidance_weight: float = 1.0,
    guidance_clip: Optional[float] = None,
    dt: float = 1.0,
    workers: int = 1,
) -> tuple[list[list[GaussianTrajectory]], SamplingStats]:
    """
    Cost-guided reverse diffusion for several contexts in one network batch.

    Args:
        contexts: Endpoint/ESDF contexts
        k: Trajectories per context
        seed: Sampling seed
        guidance_weight: 0 disables guidance

    Returns:
        (k trajectories per context with exact endpoints, sampling statistics)
    """
    if k < 1:
        raise DomainError(f"trajectory count must be >= 1, got {k}")
    if not contexts:
        return [], SamplingStats()
    schedule, normalizer, horizon = prior.schedule, prior.normalizer, prior.horizon
    stats = SamplingStats()
    n_ctx = len(contexts)
    batch = n_ctx * k

    ctx_vec = np.repeat(np.stack([c.vector(normalizer) for c in contexts]), k, axis=0)
    starts = np.repeat(np.stack([c.start.to_array() for c in contexts]), k, axis=0)
    goals = np.repeat(np.stack([c.goal.to_array() for c in contexts]), k, axis=0)
    z_start = normalizer.normalize(starts)
    z_goal = normalizer.normalize(goals)

    gen = rng(seed, "guided_sample")
    x = gen.standard_normal((batch, horizon, 5))
    x[:, 0], x[:, -1] = z_start, z_goal
    var = schedule.posterior_variance_clipped

    for t in range(schedule.steps, 0, -1):
        eps = predict_eps(prior.model, x, t, ctx_vec)
        mean = posterior_mean(x, eps, t, schedule)
        mean[:, 0], mean[:, -1] = z_start, z_goal
        if guidance_weight != 0.0:
            shift, moved = guidance_perturbation(
                mean, t, grid, weights, gp_model, normalizer, schedule, guidance_weight, guidance_clip, workers
            )
            stats.projected += moved
            stats.gradient_evaluations += batch
            mean = mean + shift
        noise = gen.standard_normal(x.shape)
        x = mean + math.sqrt(var[t - 1]) * noise if t > 1 else mean
        x[:, 0], x[:, -1] = z_start, z_goal

    phys = normalizer.denormalize(x)
    phys, moved = project_into_bounds(phys, grid)
    stats.projected += moved
    phys[:, 0], phys[:, -1] = starts, goals
    if stats.projected:
        logger.warning("guided sampling projected %d out-of-bounds means", stats.projected)

    out = []
    for i in range(n_ctx):
        out.append([GaussianTrajectory(states=phys[i * k + j], dt=dt) for j in range(k)])
    return out, stats


def guided_sample(
    context: Context,
    grid: EsdfGrid,
    weights: CostWeights,
    gp_model: GpModel,
    prior: DiffusionPrior,
    k: int,
    seed: int,
    guidance_weight: float = 1.0,
    guidance_clip: Optional[float] = None,
    dt: float = 1.0,
) -> list[GaussianTrajectory]:
    trajs, _ = guided_sample_batch(
        [context], grid, weights, gp_model, prior, k, seed, guidance_weight, guidance_clip, dt
    )
    return trajs[0]
