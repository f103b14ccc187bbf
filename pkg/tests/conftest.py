# tests/conftest.py
import numpy as np
import pytest
import torch

from app.config import PlannerConfig
from app.models.prior import DiffusionPrior
from app.schemas.diffusion import Normalizer
from app.schemas.geometry import ConvexPolygon, Workspace
from app.services.diffusion import build_schedule
from app.services.esdf import build_esdf
from app.services.training import make_denoiser


def square(x0: float, y0: float, x1: float, y1: float) -> ConvexPolygon:
    return ConvexPolygon(vertices=[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


@pytest.fixture
def box_workspace() -> Workspace:
    """10 x 10 workspace with the square [4, 6]^2 in the middle."""
    return Workspace(width=10.0, height=10.0, obstacles=[square(4.0, 4.0, 6.0, 6.0)])


@pytest.fixture
def box_grid(box_workspace):
    return build_esdf(box_workspace, 0.1)


@pytest.fixture
def empty_grid():
    return build_esdf(Workspace(width=10.0, height=10.0), 0.1)


@pytest.fixture
def small_config() -> PlannerConfig:
    """A config small enough to plan and simulate in a few seconds."""
    return PlannerConfig.model_validate(
        {
            "scenario": {
                "width": 40.0,
                "height": 30.0,
                "obstacle_count": 2,
                "radius_range": [2.0, 4.0],
                "min_clearance": 2.0,
                "start_region": [1.0, 10.0, 7.0, 20.0],
                "goal_region": [33.0, 10.0, 39.0, 20.0],
                "region_clearance": 3.0,
            },
            "esdf": {"resolution": 0.5},
            "schedule": {"kind": "linear", "steps": 10},
            "denoiser": {"kind": "dit", "horizon": 16, "width": 32, "depth": 2, "heads": 2},
            "context": {"n_chord": 4},
            "train": {"steps": 5, "batch_size": 4, "log_every": 1},
            "roadmap": {"n_nodes": 120, "k_neighbors": 8, "path_nodes": 32},
            "mission": {"robot_count": 6, "spawn_radius": 1.5},
            "planner": {"samples_per_pair": 2, "hard_cap": 1000.0},
            "mpc": {"settle_time": 10.0},
            "bench": {"sizes": [4], "densities": [1], "repeats": 1},
        }
    )


@pytest.fixture
def tiny_prior(small_config) -> DiffusionPrior:
    """Untrained prior: the zero-initialized output layer predicts zero noise."""
    torch.manual_seed(0)
    model = make_denoiser(small_config.denoiser, small_config.context.dim)
    model.eval()
    return DiffusionPrior(
        model=model,
        schedule=build_schedule(small_config.schedule),
        normalizer=Normalizer(
            mean=np.array([20.0, 15.0, np.log(0.5), np.log(0.5), 0.0]), std=np.array([10.0, 5.0, 0.3, 0.3, 0.3])
        ),
        context=small_config.context,
        horizon=small_config.denoiser.horizon,
    )


def line_trajectories(n: int, horizon: int, seed: int = 0) -> np.ndarray:
    """(n, horizon, 5) straight-line trajectories across the small world."""
    gen = np.random.default_rng(seed)
    out = np.zeros((n, horizon, 5))
    u = np.linspace(0.0, 1.0, horizon)[:, None]
    for i in range(n):
        start = gen.uniform([2.0, 8.0], [6.0, 22.0])
        goal = gen.uniform([34.0, 8.0], [38.0, 22.0])
        out[i, :, :2] = start + u * (goal - start)
        out[i, :, 2] = gen.uniform(0.3, 1.0)
        out[i, :, 3] = gen.uniform(0.3, 1.0)
        out[i, :, 4] = gen.uniform(-0.3, 0.3)
    return out


@pytest.fixture
def world_workspace() -> Workspace:
    """40 x 30 world with one block in the middle, matching small_config."""
    return Workspace(width=40.0, height=30.0, obstacles=[square(18.0, 12.0, 22.0, 18.0)])


@pytest.fixture
def world_grid(world_workspace):
    return build_esdf(world_workspace, 0.5)
