# app/cli/commands/data.py
from typing import Optional, get_args

import click

from app.cli.options import config_option, out_option, resolve_seed, seed_option
from app.config import config_hash
from app.dependencies import get_config, get_dataset_repository
from app.errors import ArtifactError, UsageError
from app.schemas.dataset import DatasetHeader
from app.schemas.geometry import ScenarioKind
from app.services.datagen import build_dataset, scenario_params, validate_records


@click.command("gen-data")
@config_option
@seed_option
@out_option(help="Dataset file to write.")
@click.option("--count", type=int, default=None, help="Records to generate; defaults to dataset.count.")
@click.option("--kind", type=click.Choice(get_args(ScenarioKind)), default=None, help="Scenario family.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes.")
def gen_data(
    config_path: Optional[str],
    seed: Optional[int],
    out_path: str,
    count: Optional[int],
    kind: Optional[str],
    workers: Optional[int],
) -> None:
    """
    Generate a training dataset of roadmap-planned Gaussian trajectories.
    """
    cfg = get_config(config_path)
    seed = resolve_seed(cfg, seed)
    count = cfg.dataset.count if count is None else count
    if count < 1:
        raise UsageError(f"--count must be at least 1, got {count}")
    kind = kind or cfg.dataset.kind
    workers = workers or cfg.dataset.workers

    records, failures = build_dataset(count, kind, seed, cfg, workers=workers)
    header = DatasetHeader(
        seed=seed,
        kind=kind,
        count=len(records),
        path_nodes=cfg.roadmap.path_nodes,
        horizon=cfg.denoiser.horizon,
        feature_dim=cfg.context.esdf_dim,
        params=scenario_params(cfg),
        config_hash=config_hash(cfg),
        failures=dict(sorted(failures.items())),
    )
    get_dataset_repository().save(out_path, header, records)

    attempts = records[-1].attempt + 1
    click.echo(f"wrote {len(records)} records to {out_path} ({attempts} attempts)")
    for reason, n in sorted(failures.items()):
        click.echo(f"  failed {reason}: {n}")


@click.command("validate-dataset")
@click.argument("dataset_path", type=click.Path(dir_okay=False))
@config_option
def validate_dataset(dataset_path: str, config_path: Optional[str]) -> None:
    """
    Recheck every stored record against the CVaR feasibility bound.
    """
    cfg = get_config(config_path)
    dataset = get_dataset_repository().load(dataset_path, config_hash(cfg))
    problems = validate_records(list(dataset.records()), cfg)
    for problem in problems:
        click.echo(problem, err=True)
    if problems:
        raise ArtifactError(f"{dataset_path}: {len(problems)} of {dataset.header.count} records fail validation",
                            path=dataset_path)
    click.echo(f"{dataset_path}: {dataset.header.count} records valid")
