# app/schemas/diffusion.py
from typing import Any, Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.schemas.base import ArrayModel, NDArray
from app.schemas.gaussian import RHO_MAX, SIGMA_MIN, GaussianState


class NoiseSchedule(ArrayModel):
    """
    DDPM schedule; index t - 1 holds step t for t in 1..T.

    alpha_bar[t-1] = prod_{s <= t} (1 - beta_s)
    """
    kind: str = "cosine"
    betas: NDArray

    @field_validator("betas")
    @classmethod
    def _valid_betas(cls, betas: np.ndarray) -> np.ndarray:
        if betas.ndim != 1 or len(betas) < 1:
            raise ValueError("betas must be a non-empty vector")
        if np.any(betas <= 0) or np.any(betas >= 1):
            raise ValueError("betas must lie in (0, 1)")
        if np.any(np.diff(betas) < 0):
            raise ValueError("betas must be nondecreasing")
        return betas

    @property
    def steps(self) -> int:
        return len(self.betas)

    @property
    def alphas(self) -> np.ndarray:
        return 1.0 - self.betas

    @property
    def alpha_bars(self) -> np.ndarray:
        return np.cumprod(self.alphas)

    @property
    def posterior_variance(self) -> np.ndarray:
        """beta_t (1 - alpha_bar_{t-1}) / (1 - alpha_bar_t), with alpha_bar_0 = 1."""
        ab = self.alpha_bars
        ab_prev = np.concatenate([[1.0], ab[:-1]])
        return self.betas * (1.0 - ab_prev) / (1.0 - ab)

    @property
    def posterior_variance_clipped(self) -> np.ndarray:
        """Posterior variance with the zero first entry replaced by the second."""
        var = self.posterior_variance.copy()
        var[0] = var[1] if len(var) > 1 else self.betas[0]
        return var


class Normalizer(ArrayModel):
    """
    Per-dimension affine map applied after the log-sigma / atanh-rho transform.

    z = (u - mean) / std with u = [x, y, log sx, log sy, atanh rho]
    """
    mean: NDArray
    std: NDArray

    @model_validator(mode="after")
    def _shapes(self) -> "Normalizer":
        if self.mean.shape != (5,) or self.std.shape != (5,):
            raise ValueError("mean and std must be 5-vectors")
        if np.any(self.std <= 0):
            raise ValueError("std must be positive")
        return self

    @classmethod
    def identity(cls) -> "Normalizer":
        return cls(mean=np.zeros(5), std=np.ones(5))

    @staticmethod
    def transform(states) -> np.ndarray:
        s = np.asarray(states, dtype=float)
        u = s.copy()
        u[..., 2:4] = np.log(np.maximum(s[..., 2:4], SIGMA_MIN))
        u[..., 4] = np.arctanh(np.clip(s[..., 4], -RHO_MAX, RHO_MAX))
        return u

    @classmethod
    def fit(cls, states) -> "Normalizer":
        u = cls.transform(np.asarray(states, dtype=float).reshape(-1, 5))
        std = u.std(axis=0)
        return cls(mean=u.mean(axis=0), std=np.where(std > 1e-6, std, 1.0))

    def normalize(self, states) -> np.ndarray:
        return (self.transform(states) - self.mean) / self.std

    def denormalize(self, z) -> np.ndarray:
        u = np.asarray(z, dtype=float) * self.std + self.mean
        s = u.copy()
        s[..., 2:4] = np.maximum(np.exp(np.minimum(u[..., 2:4], 50.0)), SIGMA_MIN)
        s[..., 4] = np.clip(np.tanh(u[..., 4]), -RHO_MAX, RHO_MAX)
        return s

    def jacobian(self, states) -> np.ndarray:
        """d state / d z per entry, evaluated at physical states."""
        s = np.asarray(states, dtype=float)
        j = np.broadcast_to(self.std, s.shape).copy()
        j[..., 2:4] *= s[..., 2:4]
        j[..., 4] *= 1.0 - s[..., 4] ** 2
        return j


class Context(ArrayModel):
    """Endpoint states plus ESDF features of one planning query"""
    start: GaussianState
    goal: GaussianState
    esdf_features: NDArray = Field(..., description="Chord samples and pooled statistics")

    def vector(self, normalizer: Normalizer) -> np.ndarray:
        ends = normalizer.normalize(np.stack([self.start.to_array(), self.goal.to_array()]))
        return np.concatenate([ends.reshape(-1), self.esdf_features])


CHECKPOINT_FORMAT = "swarmdiff-checkpoint"


class CheckpointLayer(BaseModel):
    """One parameter tensor; offset and count are in f32 elements past the header line"""
    name: str
    shape: list[int]
    offset: int = Field(..., ge=0)
    count: int = Field(..., ge=0)


class CheckpointHeader(BaseModel):
    format: str = CHECKPOINT_FORMAT
    version: int = 1
    hyper: dict[str, Any] = Field(..., description="Denoiser constructor arguments, including kind")
    normalizer: Normalizer
    schedule: NoiseSchedule
    context: dict[str, Any]
    horizon: int = Field(..., ge=2)
    step: int = Field(0, ge=0)
    config_hash: Optional[str] = None
    layers: list[CheckpointLayer]

    @property
    def total(self) -> int:
        return sum(layer.count for layer in self.layers)
