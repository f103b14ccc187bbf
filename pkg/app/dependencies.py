# app/dependencies.py
import time
from functools import lru_cache
from typing import Optional

import torch

from app.config import PlannerConfig, load_config, settings
from app.crud.checkpoint import CheckpointRepository
from app.crud.dataset import DatasetRepository
from app.crud.esdf import EsdfRepository
from app.crud.plan import MetricsRepository, PlanRepository
from app.crud.scenario import ScenarioRepository
from app.crud.swarm_log import SwarmLogRepository
from app.crud.table import TableRepository
from app.models.prior import DiffusionPrior
from app.schemas.esdf import EsdfGrid
from app.schemas.geometry import Scenario
from app.services.esdf import build_esdf


def get_scenario_repository() -> ScenarioRepository:
    return ScenarioRepository()


def get_esdf_repository() -> EsdfRepository:
    return EsdfRepository()


def get_dataset_repository() -> DatasetRepository:
    return DatasetRepository()


def get_checkpoint_repository() -> CheckpointRepository:
    return CheckpointRepository()


def get_plan_repository() -> PlanRepository:
    return PlanRepository()


def get_metrics_repository() -> MetricsRepository:
    return MetricsRepository()


def get_table_repository() -> TableRepository:
    return TableRepository()


def get_swarm_log_repository() -> SwarmLogRepository:
    return SwarmLogRepository()


@lru_cache
def get_config(path: Optional[str] = None) -> PlannerConfig:
    """
    Dependency for getting the planner config.

    Args:
        path: Config file; None gives the defaults

    Returns:
        PlannerConfig: loaded once per path
    """
    return load_config(path)


@lru_cache(maxsize=8)
def _grid_for_document(scenario_json: str, resolution: float) -> EsdfGrid:
    scenario = Scenario.model_validate_json(scenario_json)
    return build_esdf(scenario.to_workspace(), resolution)


def get_grid(scenario: Scenario, resolution: float) -> EsdfGrid:
    """ESDF of a scenario, built once per (scene, resolution)."""
    return _grid_for_document(scenario.model_dump_json(), resolution)


@lru_cache
def get_prior(checkpoint_path: str, cfg_hash: Optional[str] = None) -> tuple[DiffusionPrior, float]:
    """
    Dependency for getting a loaded denoiser.

    Returns:
        The prior and the seconds spent loading it
    """
    configure_torch()
    began = time.perf_counter()
    prior = get_checkpoint_repository().load(checkpoint_path, cfg_hash)
    prior.model.to(settings.DEVICE)
    return prior, time.perf_counter() - began


def configure_torch() -> None:
    torch.set_num_threads(max(1, settings.TORCH_THREADS))
