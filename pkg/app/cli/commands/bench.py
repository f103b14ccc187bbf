# app/cli/commands/bench.py
from typing import Optional

import click

from app.cli.options import config_option, out_option, resolve_seed, seed_option
from app.dependencies import configure_torch, get_config, get_table_repository
from app.services.bench import BENCH_COLUMNS, run_bench


@click.command("bench")
@config_option
@seed_option
@out_option(help="CSV table to write.")
@click.option("--suite", type=click.Choice(["sizes", "densities"]), required=True,
              help="sizes sweeps bench.sizes robots, densities sweeps bench.densities obstacles.")
@click.option("--model", "model_path", type=click.Path(dir_okay=False), required=True, help="Trained checkpoint.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Parallel cell processes.")
def bench(
    config_path: Optional[str],
    seed: Optional[int],
    out_path: str,
    suite: str,
    model_path: str,
    workers: Optional[int],
) -> None:
    """
    Run a benchmark suite, one CSV row per (value, repeat) cell.

    Columns: suite, cell, value, repeat, then the metrics report fields and
    an error column that is empty for cells that ran to completion.
    """
    cfg = get_config(config_path)
    seed = resolve_seed(cfg, seed)
    configure_torch()
    rows = run_bench(cfg, suite, model_path, seed, workers or cfg.bench.workers)
    get_table_repository().save(out_path, BENCH_COLUMNS, rows)
    succeeded = sum(1 for row in rows if row["success"])
    click.echo(f"{suite}: {succeeded}/{len(rows)} cells succeeded -> {out_path}")
