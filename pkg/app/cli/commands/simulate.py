# app/cli/commands/simulate.py
from pathlib import Path
from typing import Optional

import click

from app.cli.options import config_option, out_option, seed_option
from app.config import config_hash, settings
from app.crud.plan import metrics_path
from app.dependencies import (
    get_config,
    get_grid,
    get_metrics_repository,
    get_plan_repository,
    get_swarm_log_repository,
)
from app.schemas.metrics import MetricsReport
from app.services.metrics import build_report
from app.services.pipeline import simulate_plan


def sidecar_metrics(artifact: str) -> Optional[MetricsReport]:
    """Wall-clock metrics stored next to a plan or log, if present."""
    path = metrics_path(artifact)
    return get_metrics_repository().get(path) if Path(path).exists() else None


@click.command("simulate")
@click.argument("plan_path", type=click.Path(dir_okay=False))
@config_option
@seed_option
@out_option(help="Swarm log to write; the metrics report goes to <out>.metrics.json.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Threads for per-robot MPC solves.")
def simulate(
    plan_path: str,
    config_path: Optional[str],
    seed: Optional[int],
    out_path: str,
    workers: Optional[int],
) -> None:
    """
    Track a plan with the whole swarm and report the run metrics.
    """
    cfg = get_config(config_path)
    cfg_hash = config_hash(cfg)
    document = get_plan_repository().load(plan_path, cfg_hash)
    seed = document.seed if seed is None else seed
    grid = get_grid(document.scenario, cfg.esdf.resolution)

    log, stats = simulate_plan(document, cfg, seed, grid, workers or settings.WORKERS)
    get_swarm_log_repository().save(out_path, log)
    planned = sidecar_metrics(plan_path)
    report = build_report(
        log,
        seed=seed,
        config_hash=cfg_hash,
        T_macro=planned.T_macro if planned else 0.0,
        T_micro=stats.elapsed,
        T_fit=planned.T_fit if planned else 0.0,
        T_load=planned.T_load if planned else 0.0,
        T_mpc=stats.mpc_time_mean,
    )
    get_metrics_repository().create(metrics_path(out_path), report)
    for name, count in log.header.warnings.items():
        click.echo(f"warning {name}: {count}", err=True)
    click.echo(report.model_dump_json(indent=2))
