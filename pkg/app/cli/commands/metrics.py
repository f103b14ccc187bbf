# app/cli/commands/metrics.py
from typing import Optional

import click

from app.cli.commands.simulate import sidecar_metrics
from app.cli.options import out_option
from app.dependencies import get_metrics_repository, get_swarm_log_repository
from app.services.metrics import build_report


@click.command("metrics")
@click.argument("log_path", type=click.Path(dir_okay=False))
@out_option(required=False, help="Also write the report as JSON.")
def metrics(log_path: str, out_path: Optional[str]) -> None:
    """
    Reduce a swarm log to its metrics report.

    Distances and success come from the log itself; wall-clock times come
    from the log's metrics sidecar when it exists.
    """
    log = get_swarm_log_repository().load(log_path)
    timed = sidecar_metrics(log_path)
    report = build_report(
        log,
        seed=log.header.seed,
        config_hash=log.header.config_hash,
        T_macro=timed.T_macro if timed else 0.0,
        T_micro=timed.T_micro if timed else 0.0,
        T_fit=timed.T_fit if timed else 0.0,
        T_load=timed.T_load if timed else 0.0,
        T_mpc=timed.T_mpc if timed else 0.0,
    )
    if out_path:
        get_metrics_repository().create(out_path, report)
    click.echo(report.model_dump_json(indent=2))
