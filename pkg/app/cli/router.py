# app/cli/router.py
from typing import Optional

import click

from app.cli.commands import bench, data, metrics, plan, plot, simulate, train
from app.config import settings
from app.log import configure_logging


@click.group(name="swarmdiff", help=f"{settings.PROJECT_NAME}: diffusion-prior swarm planning toolkit.")
@click.option("--log-level", default=None, help="Overrides SWARMDIFF_LOG_LEVEL.")
@click.option("--log-format", type=click.Choice(["text", "json"]), default=None, help="Overrides SWARMDIFF_LOG_FORMAT.")
def cli(log_level: Optional[str], log_format: Optional[str]) -> None:
    configure_logging(log_level, log_format)


# Include commands from command modules
cli.add_command(data.gen_data)
cli.add_command(data.validate_dataset)
cli.add_command(train.train)
cli.add_command(plan.plan)
cli.add_command(simulate.simulate)
cli.add_command(plot.plot)
cli.add_command(bench.bench)
cli.add_command(metrics.metrics)
