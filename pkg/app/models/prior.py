# app/models/prior.py
from dataclasses import dataclass, field
from typing import Optional

from app.config import ContextConfig
from app.models.base import DenoiserBase
from app.schemas.diffusion import NoiseSchedule, Normalizer


@dataclass
class DiffusionPrior:
    """A trained denoiser with everything needed to sample from it."""
    model: DenoiserBase
    schedule: NoiseSchedule
    normalizer: Normalizer
    context: ContextConfig
    horizon: int
    config_hash: Optional[str] = None
    step: int = 0
    extra: dict = field(default_factory=dict)
