# app/services/bench.py
"""
Benchmark suites: one end-to-end run per (suite value, repeat) cell.

Cells sharing a repeat index share their scene and mission seeds, so rows
of one suite are paired experiments that differ only in the swept value.
"""
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Union

from app.config import PlannerConfig, config_hash
from app.crud.checkpoint import CheckpointRepository
from app.errors import SwarmDiffError
from app.models.prior import DiffusionPrior
from app.schemas.metrics import METRIC_COLUMNS, MetricsReport
from app.services.pipeline import run_mission, scenario_for
from app.services.seeding import derive_seed

logger = logging.getLogger(__name__)

Suite = Literal["sizes", "densities"]

# Fixed CSV column order
BENCH_COLUMNS = ["suite", "cell", "value", "repeat"] + METRIC_COLUMNS + ["error"]

# Columns measured with a wall clock; everything else repeats under fixed seeds
TIMING_COLUMNS = ["T_sol", "T_macro", "T_micro", "T_fit", "T_load", "T_mpc"]

# Per-process prior, loaded once by the pool initializer
_worker_prior: Optional[DiffusionPrior] = None
_worker_load_time = 0.0


@dataclass(frozen=True)
class BenchCell:
    index: int
    suite: Suite
    value: int
    repeat: int
    scene_seed: int
    run_seed: int


def bench_cells(cfg: PlannerConfig, suite: Suite, seed: int) -> list[BenchCell]:
    """Cells in output order: values outer, repeats inner."""
    values = cfg.bench.sizes if suite == "sizes" else cfg.bench.densities
    cells = []
    for value in values:
        for repeat in range(cfg.bench.repeats):
            cells.append(BenchCell(
                index=len(cells),
                suite=suite,
                value=value,
                repeat=repeat,
                scene_seed=derive_seed(seed, "bench", "scene", repeat),
                run_seed=derive_seed(seed, "bench", "run", repeat),
            ))
    return cells


def cell_config(cfg: PlannerConfig, cell: BenchCell) -> PlannerConfig:
    """The config of one cell: robot count for sizes, obstacle count for densities."""
    data = cfg.model_dump()
    if cell.suite == "sizes":
        data["mission"]["robot_count"] = cell.value
    else:
        data["scenario"]["obstacle_count"] = cell.value
    return PlannerConfig.model_validate(data)


def _row(cell: BenchCell, report: MetricsReport, error: str = "") -> dict:
    return report.csv_row(suite=cell.suite, cell=cell.index, value=cell.value, repeat=cell.repeat) | {"error": error}


def run_cell(cell: BenchCell, cfg: PlannerConfig, prior: DiffusionPrior, T_load: float = 0.0) -> dict:
    """
    Run one cell; failures become rows with success = false and the error text.
    """
    try:
        cell_cfg = cell_config(cfg, cell)
        scenario = scenario_for(cell_cfg, cell.scene_seed)
        outcome = run_mission(scenario, cell_cfg, prior, cell.run_seed, T_load=T_load)
    except (SwarmDiffError, ValueError) as exc:
        logger.warning("bench cell=%d suite=%s value=%d repeat=%d failed: %s",
                       cell.index, cell.suite, cell.value, cell.repeat, exc)
        report = MetricsReport(seed=cell.run_seed, config_hash=config_hash(cfg), T_load=T_load)
        return _row(cell, report, f"{type(exc).__name__}: {exc}")
    return _row(cell, outcome.report)


def _init_worker(checkpoint: str, cfg_hash: str) -> None:
    global _worker_prior, _worker_load_time
    began = time.perf_counter()
    _worker_prior = CheckpointRepository().load(checkpoint, cfg_hash)
    _worker_load_time = time.perf_counter() - began


def _run_cell_in_worker(args: tuple[BenchCell, PlannerConfig]) -> dict:
    cell, cfg = args
    return run_cell(cell, cfg, _worker_prior, _worker_load_time)


def run_bench(
    cfg: PlannerConfig,
    suite: Suite,
    checkpoint: Union[str, Path],
    seed: int,
    workers: int = 1,
) -> list[dict]:
    """
    Run a whole suite.

    Args:
        cfg: Planner config; cfg.bench holds the swept values and repeat count
        suite: "sizes" sweeps the robot count, "densities" the obstacle count
        checkpoint: Trained model file; every worker process loads its own copy
        seed: Root seed
        workers: Parallel processes

    Returns:
        One row per cell, ordered by cell index
    """
    cells = bench_cells(cfg, suite, seed)
    logger.info("bench suite=%s cells=%d workers=%d", suite, len(cells), workers)
    if workers <= 1:
        _init_worker(str(checkpoint), config_hash(cfg))
        return [run_cell(cell, cfg, _worker_prior, _worker_load_time) for cell in cells]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker, initargs=(str(checkpoint), config_hash(cfg))
    ) as pool:
        return list(pool.map(_run_cell_in_worker, [(cell, cfg) for cell in cells]))
