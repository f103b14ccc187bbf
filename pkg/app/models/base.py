# app/models/base.py
import math
from typing import Optional

import torch
import torch.nn as nn

from app.errors import DenoiserDivergenceError

# Trajectory node width
NODE_DIM = 5


class SinusoidalPosEmb(nn.Module):
    """Sinusoidal embedding of integer (or real) indices."""

    def __init__(self, dim: int):
        super().__init__()
        self.dim = dim

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        half_dim = self.dim // 2
        scale = math.log(10000) / max(half_dim - 1, 1)
        freqs = torch.exp(torch.arange(half_dim, device=x.device, dtype=torch.float64) * -scale)
        emb = x.to(torch.float64)[..., None] * freqs
        emb = torch.cat((emb.sin(), emb.cos()), dim=-1)
        if self.dim % 2:
            emb = torch.cat((emb, torch.zeros_like(emb[..., :1])), dim=-1)
        return emb


def check_finite(h: torch.Tensor, index: int, where: str = "block") -> torch.Tensor:
    if not torch.isfinite(h).all():
        raise DenoiserDivergenceError(index, where)
    return h


class DenoiserBase(nn.Module):
    """
    Noise predictor eps_theta(x_t, t, c) over (B, H, 5) trajectories.

    Subclasses implement `backbone`. The conditioning vector fed to the
    backbone is the timestep embedding plus a projection of the context.
    """

    kind = "base"

    def __init__(self, context_dim: int, cond_dim: int):
        super().__init__()
        self.context_dim = context_dim
        self.cond_dim = cond_dim
        self.time_mlp = nn.Sequential(
            SinusoidalPosEmb(cond_dim),
            nn.Linear(cond_dim, cond_dim * 4),
            nn.SiLU(),
            nn.Linear(cond_dim * 4, cond_dim),
        )
        self.context_mlp = nn.Sequential(
            nn.Linear(context_dim, cond_dim),
            nn.SiLU(),
            nn.Linear(cond_dim, cond_dim),
        )

    def hyperparameters(self) -> dict:
        raise NotImplementedError

    def conditioning(self, t: torch.Tensor, context: torch.Tensor) -> torch.Tensor:
        dtype = next(self.parameters()).dtype
        t_emb = self.time_mlp[0](t).to(dtype)
        t_emb = self.time_mlp[1:](t_emb)
        return t_emb + self.context_mlp(context.to(dtype))

    def backbone(self, x: torch.Tensor, cond: torch.Tensor, positions: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def forward(
        self, x: torch.Tensor, t: torch.Tensor, context: torch.Tensor, positions: Optional[torch.Tensor] = None
    ) -> torch.Tensor:
        """
        Args:
            x: (B, H, 5) noisy normalized trajectories
            t: (B,) diffusion steps in 1..T
            context: (B, context_dim)
            positions: optional (H,) or (B, H) token indices; defaults to 0..H-1

        Returns:
            (B, H, 5) predicted noise
        """
        if x.dim() != 3 or x.shape[-1] != NODE_DIM:
            raise ValueError(f"expected (B, H, {NODE_DIM}) input, got {tuple(x.shape)}")
        b, h, _ = x.shape
        if positions is None:
            positions = torch.arange(h, device=x.device)
        if positions.dim() == 1:
            positions = positions[None].expand(b, h)
        cond = self.conditioning(t, context)
        check_finite(cond, -1, "conditioning")
        out = self.backbone(x.to(cond.dtype), cond, positions)
        if out.shape != x.shape:
            raise ValueError(f"denoiser output {tuple(out.shape)} does not match input {tuple(x.shape)}")
        return out
