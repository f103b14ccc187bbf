# app/cli/commands/plot.py
import click

from app.cli.options import out_option
from app.crud.base import atomic_write, line_offsets, parse_json_line, read_bytes
from app.dependencies import get_plan_repository, get_swarm_log_repository
from app.errors import ArtifactError, UsageError
from app.services.plotting import render_log, render_plan


def input_kind(path: str) -> str:
    """
    "plan" for a plan document, "log" for a swarm log.

    Raises:
        UsageError: for anything else
    """
    data = read_bytes(path)
    offsets = line_offsets(data, 1)
    first_end = offsets[1] - 1 if len(offsets) > 1 else len(data)
    try:
        first = parse_json_line(data, 0, first_end, path, "first line")
    except ArtifactError:
        first = {}
    if {"robot_count", "robot_radius", "dt"} <= first.keys():
        return "log"
    try:
        whole = parse_json_line(data, 0, len(data), path, "document")
    except ArtifactError:
        whole = {}
    if {"plan", "scenario"} <= whole.keys():
        return "plan"
    raise UsageError(f"{path}: neither a plan document nor a swarm log")


@click.command("plot")
@click.argument("input_path", type=click.Path(dir_okay=False))
@out_option(help="SVG file to write.")
def plot(input_path: str, out_path: str) -> None:
    """
    Render a plan (endpoint ellipses and trajectories) or a swarm log (robot paths) to SVG.
    """
    if input_kind(input_path) == "plan":
        svg = render_plan(get_plan_repository().get(input_path))
    else:
        svg = render_log(get_swarm_log_repository().load(input_path))
    atomic_write(out_path, svg.encode("utf-8"))
    click.echo(f"wrote {out_path}")
