# app/cli/commands/plan.py
from typing import Optional

import click

from app.cli.options import config_option, out_option, resolve_seed, seed_option
from app.config import config_hash
from app.crud.plan import metrics_path
from app.dependencies import (
    get_config,
    get_esdf_repository,
    get_grid,
    get_metrics_repository,
    get_plan_repository,
    get_prior,
    get_scenario_repository,
)
from app.schemas.metrics import MetricsReport
from app.services.macro_planner import risk_audit
from app.services.pipeline import plan_mission, scenario_for
from app.services.seeding import derive_seed


@click.command("plan")
@config_option
@seed_option
@out_option(help="Plan JSON to write; wall-clock metrics go to <out>.metrics.json.")
@click.option("--model", "model_path", type=click.Path(dir_okay=False), required=True, help="Trained checkpoint.")
@click.option("--scenario", "scenario_path", type=click.Path(dir_okay=False), default=None,
              help="Scenario JSON; a scene is generated from the seed when omitted.")
@click.option("--scenario-out", type=click.Path(dir_okay=False), default=None,
              help="Also write the scenario used.")
@click.option("--esdf-out", type=click.Path(dir_okay=False), default=None, help="Also export the scene's ESDF.")
def plan(
    config_path: Optional[str],
    seed: Optional[int],
    out_path: str,
    model_path: str,
    scenario_path: Optional[str],
    scenario_out: Optional[str],
    esdf_out: Optional[str],
) -> None:
    """
    Plan the macroscopic GMM trajectory of one mission.
    """
    cfg = get_config(config_path)
    cfg_hash = config_hash(cfg)
    seed = resolve_seed(cfg, seed)
    prior, load_time = get_prior(model_path, cfg_hash)
    if scenario_path:
        scenario = get_scenario_repository().load(scenario_path, cfg_hash)
    else:
        scenario = scenario_for(cfg, derive_seed(seed, "scene"))
    grid = get_grid(scenario, cfg.esdf.resolution)

    outcome = plan_mission(scenario, cfg, prior, seed, grid)
    get_plan_repository().create(out_path, outcome.document)
    report = MetricsReport.build(
        T_macro=outcome.macro.elapsed, T_fit=outcome.T_fit, T_load=load_time, seed=seed, config_hash=cfg_hash,
    )
    get_metrics_repository().create(metrics_path(out_path), report)
    if scenario_out:
        get_scenario_repository().save(scenario_out, scenario)
    if esdf_out:
        get_esdf_repository().save(esdf_out, grid)

    gmm_traj = outcome.document.plan
    worst = risk_audit(gmm_traj, grid, cfg.costs.alpha)
    click.echo(
        f"plan K={len(gmm_traj.trajectories)} objective={outcome.macro.objective:.4f} "
        f"max_cvar={worst:.4f} projected={outcome.macro.projected}"
    )
    click.echo(f"T_macro={report.T_macro:.3f}s T_fit={report.T_fit:.3f}s T_load={report.T_load:.3f}s -> {out_path}")
