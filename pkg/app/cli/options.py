# app/cli/options.py
"""Options shared by every subcommand."""
from typing import Optional

import click

from app.config import PlannerConfig

MAX_SEED = 2**64 - 1

config_option = click.option(
    "--config", "config_path",
    type=click.Path(dir_okay=False),
    default=None,
    help="Planner config JSON; defaults apply when omitted.",
)

seed_option = click.option(
    "--seed",
    type=click.IntRange(0, MAX_SEED),
    default=None,
    help="Root seed (u64); defaults to seeds.root of the config.",
)


def out_option(required: bool = True, help: str = "Output file."):
    return click.option("--out", "out_path", type=click.Path(dir_okay=False), required=required, help=help)


def resolve_seed(cfg: PlannerConfig, seed: Optional[int], fallback: Optional[int] = None) -> int:
    if seed is not None:
        return seed
    return cfg.seeds.root if fallback is None else fallback
