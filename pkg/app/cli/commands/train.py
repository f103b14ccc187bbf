# app/cli/commands/train.py
from typing import Optional

import click

from app.cli.options import config_option, out_option, resolve_seed, seed_option
from app.config import config_hash
from app.dependencies import (
    configure_torch,
    get_checkpoint_repository,
    get_config,
    get_dataset_repository,
    get_table_repository,
)
from app.errors import ConfigError, TrainingDivergedError
from app.services.datagen import subsample
from app.services.diffusion import build_schedule
from app.services.training import train as train_prior

CURVE_COLUMNS = ["step", "loss", "moving_avg"]


def curve_path(checkpoint: str) -> str:
    """Training-curve CSV written next to a checkpoint."""
    return f"{checkpoint}.loss.csv"


@click.command("train")
@click.argument("dataset_path", type=click.Path(dir_okay=False))
@config_option
@seed_option
@out_option(help="Checkpoint file to write.")
@click.option("--steps", type=click.IntRange(min=1), default=None, help="Optimizer steps; defaults to train.steps.")
@click.option("--resume", "resume_path", type=click.Path(dir_okay=False), default=None,
              help="Continue from this checkpoint.")
def train(
    dataset_path: str,
    config_path: Optional[str],
    seed: Optional[int],
    out_path: str,
    steps: Optional[int],
    resume_path: Optional[str],
) -> None:
    """
    Train the diffusion prior on a dataset.
    """
    cfg = get_config(config_path)
    cfg_hash = config_hash(cfg)
    seed = resolve_seed(cfg, seed, fallback=cfg.train.seed)
    configure_torch()
    dataset = get_dataset_repository().load(dataset_path, cfg_hash)
    header = dataset.header
    if header.horizon != cfg.denoiser.horizon:
        raise ConfigError(
            f"dataset {dataset_path} was built for horizon {header.horizon} "
            f"but denoiser.horizon is {cfg.denoiser.horizon}"
        )
    if header.feature_dim != cfg.context.esdf_dim:
        raise ConfigError(
            f"dataset {dataset_path} stores {header.feature_dim} context features "
            f"but the context section expects {cfg.context.esdf_dim}"
        )

    hyper = cfg.train if steps is None else cfg.train.model_copy(update={"steps": steps})
    resume = get_checkpoint_repository().load(resume_path, cfg_hash) if resume_path else None
    trajs = subsample(dataset.trajectories, cfg.denoiser.horizon)
    try:
        result = train_prior(
            trajs, dataset.features, build_schedule(cfg.schedule), cfg.denoiser, cfg.context, hyper, seed,
            resume=resume, config_hash=cfg_hash,
        )
    except TrainingDivergedError as exc:
        if exc.prior is not None:
            fallback = f"{out_path}.last-good"
            get_checkpoint_repository().save(fallback, exc.prior)
            click.echo(f"last good parameters (step {exc.last_good_step}) saved to {fallback}", err=True)
        raise

    get_checkpoint_repository().save(out_path, result.prior)
    get_table_repository().save(curve_path(out_path), CURVE_COLUMNS, result.curve_rows())
    averages = result.moving_average()
    click.echo(
        f"trained steps {result.start_step + 1}..{result.prior.step}: "
        f"loss {result.losses[0]:.5f} -> {result.losses[-1]:.5f} (moving avg {averages[-1]:.5f})"
    )
    click.echo(f"checkpoint {out_path}, curve {curve_path(out_path)}")
