# app/services/datagen.py
"""Training corpus generation: one roadmap trajectory per random scene."""
import logging
import sys
from collections import Counter, deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from tqdm import tqdm

from app.config import PlannerConfig
from app.errors import (
    DatasetGenerationError,
    InfeasibleEndpointError,
    NoPathError,
    SamplingError,
    ScenarioGenerationError,
)
from app.schemas.dataset import DatasetRecord
from app.schemas.geometry import Scenario, ScenarioKind, ScenarioParams
from app.services.context import esdf_feature_vector
from app.services.esdf import build_esdf
from app.services.roadmap import edges_feasible, plan_roadmap_path, sample_gaussian_node
from app.services.scenarios import generate_scenario
from app.services.seeding import derive_seed

logger = logging.getLogger(__name__)

_RECOVERABLE = (ScenarioGenerationError, SamplingError, NoPathError, InfeasibleEndpointError)


@dataclass
class AttemptOutcome:
    attempt: int
    record: Optional[DatasetRecord] = None
    failure: Optional[str] = None


def subsample_indices(length: int, horizon: int) -> np.ndarray:
    """Evenly spaced indices including both endpoints."""
    if horizon > length:
        raise ValueError(f"cannot subsample {length} states to {horizon}")
    return np.round(np.linspace(0, length - 1, horizon)).astype(int)


def subsample(trajs: np.ndarray, horizon: int) -> np.ndarray:
    return np.asarray(trajs)[..., subsample_indices(np.asarray(trajs).shape[-2], horizon), :]


def scenario_params(cfg: PlannerConfig) -> ScenarioParams:
    return ScenarioParams(**cfg.scenario.model_dump(exclude={"kind", "boundary_obstacles"}))


def run_attempt(attempt: int, seed: int, kind: ScenarioKind, cfg: PlannerConfig) -> AttemptOutcome:
    """Plan one record; every random draw is keyed by (seed, attempt)."""
    scene_seed = derive_seed(seed, "scene", attempt)
    params = scenario_params(cfg)
    costs, rm = cfg.costs, cfg.roadmap
    name = f"attempt {attempt} (scene seed {scene_seed})"
    try:
        ws = generate_scenario(kind, scene_seed, params, boundary_obstacles=cfg.scenario.boundary_obstacles)
        grid = build_esdf(ws, cfg.esdf.resolution)
        common = dict(alpha=costs.alpha, epsilon=costs.epsilon, max_retries=rm.max_node_retries, scene=name)
        start = sample_gaussian_node(ws, grid, cfg.sigma_bounds, derive_seed(scene_seed, "start"),
                                     region=params.start_region, **common)
        goal = sample_gaussian_node(ws, grid, cfg.sigma_bounds, derive_seed(scene_seed, "goal"),
                                    region=params.goal_region, **common)
        traj = plan_roadmap_path(
            ws, grid, start, goal, rm.n_nodes, rm.k_neighbors, derive_seed(scene_seed, "roadmap"),
            bounds=cfg.sigma_bounds, alpha=costs.alpha, epsilon=costs.epsilon,
            edge_resolution=rm.edge_resolution, path_nodes=rm.path_nodes,
            max_node_retries=rm.max_node_retries, shortcut=rm.shortcut, dt=cfg.planner.macro_dt, scene=name,
        )
    except _RECOVERABLE as exc:
        return AttemptOutcome(attempt=attempt, failure=type(exc).__name__)

    stored = traj.states.astype(np.float32)
    # The stored (rounded) states must pass the same recheck validation runs
    wide = stored.astype(np.float64)
    if not np.all(edges_feasible(wide[:-1], wide[1:], grid, costs.alpha, costs.epsilon, rm.edge_resolution)):
        return AttemptOutcome(attempt=attempt, failure="RoundingRecheck")
    features = esdf_feature_vector(grid, start, goal, cfg.context).astype(np.float32)
    scenario = Scenario.from_workspace(ws, kind=kind, seed=scene_seed, params=params)
    return AttemptOutcome(attempt=attempt, record=DatasetRecord(attempt, scenario, stored, features))


def _run_attempt_packed(args) -> AttemptOutcome:
    return run_attempt(*args)


def _outcomes(seed: int, kind: ScenarioKind, cfg: PlannerConfig, workers: int) -> Iterator[AttemptOutcome]:
    attempt = 0
    if workers <= 1:
        while True:
            yield run_attempt(attempt, seed, kind, cfg)
            attempt += 1
    chunk = 4 * workers
    with ProcessPoolExecutor(max_workers=workers) as pool:
        while True:
            batch = [(a, seed, kind, cfg) for a in range(attempt, attempt + chunk)]
            # map yields in submission order
            yield from pool.map(_run_attempt_packed, batch)
            attempt += chunk


def build_dataset(
    count: int, scenario_kind: ScenarioKind, seed: int, cfg: PlannerConfig, workers: int = 1
) -> tuple[list[DatasetRecord], Counter]:
    """
    Generate `count` records, replacing failed attempts with fresh scenes.

    Returns:
        (records in attempt order, failure counts by kind)

    Raises:
        DatasetGenerationError: when more than max_failure_rate of the last
            failure_window attempts failed
    """
    if count < 1:
        raise DatasetGenerationError(f"record count must be >= 1, got {count}")
    window = deque(maxlen=cfg.dataset.failure_window)
    failures: Counter = Counter()
    records: list[DatasetRecord] = []
    bar = tqdm(total=count, desc="gen-data", disable=not sys.stderr.isatty(), leave=False)
    outcomes = _outcomes(seed, scenario_kind, cfg, workers)
    try:
        for outcome in outcomes:
            window.append(outcome.failure is not None)
            if outcome.failure is not None:
                failures[outcome.failure] += 1
                logger.debug("dataset attempt=%d failed reason=%s", outcome.attempt, outcome.failure)
            else:
                records.append(outcome.record)
                bar.update(1)
                if len(records) == count:
                    break
            if len(window) == window.maxlen and sum(window) / len(window) > cfg.dataset.max_failure_rate:
                detail = ", ".join(f"{k}={v}" for k, v in sorted(failures.items()))
                raise DatasetGenerationError(
                    f"{sum(window)} of the last {len(window)} attempts failed "
                    f"({len(records)} records kept; failures: {detail})"
                )
    finally:
        outcomes.close()
        bar.close()
    logger.info("dataset built records=%d attempts=%d failures=%d", len(records), records[-1].attempt + 1,
                sum(failures.values()))
    return records, failures


def validate_records(records, cfg: PlannerConfig) -> list[str]:
    """Recheck endpoint and edge feasibility of stored records; returns problem descriptions."""
    problems = []
    costs, rm = cfg.costs, cfg.roadmap
    for index, rec in enumerate(records):
        ws = rec.scenario.to_workspace()
        grid = build_esdf(ws, cfg.esdf.resolution)
        states = np.asarray(rec.trajectory, dtype=np.float64)
        if len(states) != rm.path_nodes:
            problems.append(f"record {index}: {len(states)} states, expected {rm.path_nodes}")
            continue
        ok = edges_feasible(states[:-1], states[1:], grid, costs.alpha, costs.epsilon, rm.edge_resolution)
        if not np.all(ok):
            problems.append(f"record {index}: edge {int(np.argmin(ok))} violates the CVaR bound")
    return problems
