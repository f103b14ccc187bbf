# tests/services/test_bench.py
import pytest

from app.crud.checkpoint import CheckpointRepository
from app.services.bench import BENCH_COLUMNS, bench_cells, cell_config, run_bench


@pytest.fixture
def bench_config(small_config):
    update = {
        "mpc": small_config.mpc.model_copy(update={"max_steps": 10}),
        "bench": small_config.bench.model_copy(update={"sizes": [3, 4], "repeats": 2}),
    }
    return small_config.model_copy(update=update)


@pytest.fixture
def checkpoint(tmp_path, tiny_prior):
    return CheckpointRepository().save(tmp_path / "prior.ckpt", tiny_prior)


def test_cells_pair_values_by_repeat(bench_config):
    cells = bench_cells(bench_config, "sizes", seed=1)
    assert [(c.value, c.repeat) for c in cells] == [(3, 0), (3, 1), (4, 0), (4, 1)]
    assert [c.index for c in cells] == [0, 1, 2, 3]
    assert cells[0].scene_seed == cells[2].scene_seed
    assert cells[0].run_seed == cells[2].run_seed
    assert cells[0].scene_seed != cells[1].scene_seed


def test_cell_config_sweeps_one_field(bench_config):
    sizes = bench_cells(bench_config, "sizes", seed=0)
    assert cell_config(bench_config, sizes[2]).mission.robot_count == 4
    densities = bench_cells(bench_config, "densities", seed=0)
    swept = cell_config(bench_config, densities[0])
    assert swept.scenario.obstacle_count == bench_config.bench.densities[0]
    assert swept.mission == bench_config.mission


def test_run_bench_rows(bench_config, checkpoint):
    cfg = bench_config.model_copy(update={"bench": bench_config.bench.model_copy(update={"repeats": 1})})
    rows = run_bench(cfg, "sizes", checkpoint, seed=0)
    assert len(rows) == 2
    for row, value in zip(rows, [3, 4]):
        assert list(row) == BENCH_COLUMNS
        assert row["value"] == value
        assert row["error"] == ""
        assert row["T_load"] > 0


def test_failed_cell_becomes_an_error_row(bench_config, checkpoint):
    mission = bench_config.mission.model_copy(update={"min_spacing": 5.0})
    cfg = bench_config.model_copy(update={"mission": mission})
    rows = run_bench(cfg, "densities", checkpoint, seed=0)
    assert len(rows) == 2
    assert all(not row["success"] for row in rows)
    assert all(row["error"].startswith("SamplingError") for row in rows)
