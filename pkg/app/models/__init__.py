# app/models/__init__.py
from app.models.base import DenoiserBase
from app.models.dit import DiTDenoiser
from app.models.temporal_unet import TemporalUNet


def build_denoiser(hyper: dict) -> DenoiserBase:
    """Instantiate a denoiser from its stored hyperparameters."""
    params = dict(hyper)
    kind = params.pop("kind")
    if kind == "dit":
        return DiTDenoiser(**params)
    if kind == "unet":
        params["channels"] = tuple(params["channels"])
        return TemporalUNet(**params)
    raise ValueError(f"unknown denoiser kind {kind!r}")
