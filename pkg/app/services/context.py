# app/services/context.py
import numpy as np

from app.config import ContextConfig
from app.schemas.diffusion import Context
from app.schemas.esdf import EsdfGrid
from app.schemas.gaussian import GaussianState
from app.services.esdf import chord_features


def esdf_feature_vector(grid: EsdfGrid, start: GaussianState, goal: GaussianState, cfg: ContextConfig) -> np.ndarray:
    """
    Chord features with distances scaled by the workspace extent.

    Layout: n_chord triples (distance, normal x, normal y), then mean, min,
    max, std of the field and its occupied fraction.
    """
    if not cfg.use_esdf:
        return np.zeros(cfg.esdf_dim)
    feats = chord_features(grid, start.mean, goal.mean, cfg.n_chord)
    scale = max(grid.width, grid.height)
    n = cfg.n_chord
    feats[0:3 * n:3] /= scale
    feats[3 * n:3 * n + 4] /= scale
    return feats


def build_context(start: GaussianState, goal: GaussianState, grid: EsdfGrid, cfg: ContextConfig) -> Context:
    return Context(start=start, goal=goal, esdf_features=esdf_feature_vector(grid, start, goal, cfg))
