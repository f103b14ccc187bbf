# app/services/training.py
import copy
import logging
import math
import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import torch
from tqdm import tqdm

from app.config import ContextConfig, DenoiserConfig, TrainConfig
from app.errors import DomainError, TrainingDivergedError
from app.models import build_denoiser
from app.models.base import DenoiserBase
from app.models.prior import DiffusionPrior
from app.schemas.diffusion import NoiseSchedule, Normalizer
from app.services.seeding import derive_seed, rng, torch_generator

logger = logging.getLogger(__name__)

# Window of the reported moving-average loss
MOVING_WINDOW = 100


@dataclass
class TrainResult:
    prior: DiffusionPrior
    losses: list[float] = field(default_factory=list)
    start_step: int = 0

    def moving_average(self, window: int = MOVING_WINDOW) -> list[float]:
        out, acc = [], 0.0
        for i, loss in enumerate(self.losses):
            acc += loss
            if i >= window:
                acc -= self.losses[i - window]
            out.append(acc / min(i + 1, window))
        return out

    def curve_rows(self) -> list[dict]:
        avg = self.moving_average()
        return [
            {"step": self.start_step + i + 1, "loss": loss, "moving_avg": avg[i]}
            for i, loss in enumerate(self.losses)
        ]


def make_denoiser(cfg: DenoiserConfig, context_dim: int, zero_init: bool = True) -> DenoiserBase:
    if cfg.kind == "dit":
        hyper = {"kind": "dit", "context_dim": context_dim, "width": cfg.width, "depth": cfg.depth,
                 "heads": cfg.heads, "mlp_ratio": cfg.mlp_ratio, "zero_init": zero_init}
    else:
        hyper = {"kind": "unet", "context_dim": context_dim, "channels": list(cfg.unet_channels),
                 "cond_dim": cfg.width, "zero_init": zero_init}
    return build_denoiser(hyper)


def context_vectors(trajs: np.ndarray, esdf_features: np.ndarray, normalizer: Normalizer) -> np.ndarray:
    """Normalized start and goal states followed by the ESDF features, (N, 10 + E)."""
    ends = normalizer.normalize(np.stack([trajs[:, 0], trajs[:, -1]], axis=1))
    return np.concatenate([ends.reshape(len(trajs), -1), esdf_features], axis=1)


def sliced_wasserstein(pred: torch.Tensor, target: torch.Tensor, projections: torch.Tensor) -> torch.Tensor:
    """
    Squared sliced Wasserstein distance between the token sets of each sample.

    Args:
        pred, target: (B, H, 5)
        projections: (5, P) unit directions
    """
    p = torch.sort(pred @ projections, dim=1).values
    q = torch.sort(target @ projections, dim=1).values
    return ((p - q) ** 2).mean()


def diffusion_loss(
    model: DenoiserBase,
    x0: torch.Tensor,
    context: torch.Tensor,
    t: torch.Tensor,
    eps: torch.Tensor,
    alpha_bars: torch.Tensor,
    kind: str = "mse",
    projections: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    ab = alpha_bars[t - 1][:, None, None]
    noisy = ab.sqrt() * x0 + (1 - ab).sqrt() * eps
    pred = model(noisy, t, context)
    if kind == "sliced-wasserstein":
        return sliced_wasserstein(pred, eps, projections)
    return ((pred - eps) ** 2).mean()


def _random_projections(gen: torch.Generator, count: int, dtype: torch.dtype) -> torch.Tensor:
    p = torch.randn(5, count, generator=gen, dtype=torch.float64)
    return (p / p.norm(dim=0, keepdim=True)).to(dtype)


def train(
    trajs,
    esdf_features,
    schedule: NoiseSchedule,
    denoiser_cfg: DenoiserConfig,
    context_cfg: ContextConfig,
    hyper: TrainConfig,
    seed: int,
    resume: Optional[DiffusionPrior] = None,
    config_hash: Optional[str] = None,
) -> TrainResult:
    """
    Fit the noise predictor.

    Args:
        trajs: (N, H, 5) physical trajectories
        esdf_features: (N, E) ESDF context features
        hyper: Steps, batch size, learning rate and loss kind
        resume: Continue from this prior (weights, normalizer, step counter)

    Returns:
        The trained prior and its per-step losses

    Raises:
        TrainingDivergedError: on a non-finite loss, carrying the last good weights
    """
    trajs = np.asarray(trajs, dtype=float)
    feats = np.asarray(esdf_features, dtype=float)
    if trajs.ndim != 3 or len(trajs) == 0:
        raise DomainError("training needs a non-empty (N, H, 5) dataset")
    if len(feats) != len(trajs):
        raise DomainError(f"{len(trajs)} trajectories but {len(feats)} context rows")
    n, horizon, _ = trajs.shape

    if resume is not None:
        if resume.horizon != horizon:
            raise DomainError(f"checkpoint horizon {resume.horizon} does not match dataset horizon {horizon}")
        normalizer, model, start_step = resume.normalizer, resume.model, resume.step
    else:
        normalizer = Normalizer.fit(trajs)
        torch.manual_seed(derive_seed(seed, "init"))
        model = make_denoiser(denoiser_cfg, context_cfg.dim)
        start_step = 0

    x0_all = torch.as_tensor(normalizer.normalize(trajs), dtype=torch.float32)
    ctx_all = torch.as_tensor(context_vectors(trajs, feats, normalizer), dtype=torch.float32)
    alpha_bars = torch.as_tensor(schedule.alpha_bars, dtype=torch.float32)

    optimizer = torch.optim.AdamW(model.parameters(), lr=hyper.lr, weight_decay=hyper.weight_decay)
    gen = rng(seed, "train", start_step)
    tgen = torch_generator(seed, "train", start_step)
    order = gen.permutation(n) if hyper.shuffle else np.arange(n)
    cursor = 0

    losses: list[float] = []
    last_good = copy.deepcopy(model.state_dict())
    last_good_step = start_step
    model.train()
    bar = tqdm(range(hyper.steps), desc="train", disable=not sys.stderr.isatty(), leave=False)
    for i in bar:
        step = start_step + i + 1
        idx = np.empty(hyper.batch_size, dtype=int)
        for b in range(hyper.batch_size):
            if cursor == n:
                order = gen.permutation(n) if hyper.shuffle else order
                cursor = 0
            idx[b] = order[cursor]
            cursor += 1
        t = torch.as_tensor(gen.integers(1, schedule.steps + 1, size=hyper.batch_size), dtype=torch.long)
        eps = torch.randn(hyper.batch_size, horizon, 5, generator=tgen)
        projections = None
        if hyper.loss == "sliced-wasserstein":
            projections = _random_projections(tgen, hyper.sw_projections, torch.float32)

        loss = diffusion_loss(model, x0_all[idx], ctx_all[idx], t, eps, alpha_bars, hyper.loss, projections)
        value = float(loss.detach())
        if not math.isfinite(value):
            logger.error("training diverged step=%d last_good_step=%d", step, last_good_step)
            model.load_state_dict(last_good)
            model.eval()
            snapshot = DiffusionPrior(
                model=model, schedule=schedule, normalizer=normalizer, context=context_cfg,
                horizon=horizon, config_hash=config_hash, step=last_good_step,
            )
            raise TrainingDivergedError(step, last_good, last_good_step, prior=snapshot)
        optimizer.zero_grad()
        loss.backward()
        if hyper.grad_clip is not None:
            torch.nn.utils.clip_grad_norm_(model.parameters(), hyper.grad_clip)
        optimizer.step()
        losses.append(value)

        if step % hyper.log_every == 0:
            last_good = copy.deepcopy(model.state_dict())
            last_good_step = step
            window = losses[-MOVING_WINDOW:]
            logger.info("train step=%d loss=%.5f moving_avg=%.5f", step, value, sum(window) / len(window))
            bar.set_postfix(loss=f"{value:.4f}")
    model.eval()

    prior = DiffusionPrior(
        model=model,
        schedule=schedule,
        normalizer=normalizer,
        context=context_cfg,
        horizon=horizon,
        config_hash=config_hash,
        step=start_step + hyper.steps,
    )
    return TrainResult(prior=prior, losses=losses, start_step=start_step)


def eps_prediction_error(prior: DiffusionPrior, traj, esdf_features, t: int, seed: int) -> float:
    """Mean squared noise-prediction error on one physical trajectory at step t."""
    traj = np.asarray(traj, dtype=float)[None]
    x0 = prior.normalizer.normalize(traj)
    ctx = context_vectors(traj, np.asarray(esdf_features, dtype=float)[None], prior.normalizer)
    gen = rng(seed, "eps_error", t)
    eps = gen.standard_normal(x0.shape)
    ab = prior.schedule.alpha_bars[t - 1]
    noisy = math.sqrt(ab) * x0 + math.sqrt(1 - ab) * eps
    dtype = next(prior.model.parameters()).dtype
    with torch.no_grad():
        pred = prior.model(
            torch.as_tensor(noisy, dtype=dtype),
            torch.as_tensor([t], dtype=torch.long),
            torch.as_tensor(ctx, dtype=dtype),
        )
    return float(np.mean((pred.double().numpy() - eps) ** 2))
