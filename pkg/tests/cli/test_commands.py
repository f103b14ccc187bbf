# tests/cli/test_commands.py
import json

import pytest

from app.cli.commands.plot import input_kind
from app.config import dump_config
from app.crud.checkpoint import CheckpointRepository
from app.errors import UsageError
from main import main


@pytest.fixture
def config_file(tmp_path, small_config):
    cfg = small_config.model_copy(update={"mpc": small_config.mpc.model_copy(update={"max_steps": 10})})
    path = tmp_path / "config.json"
    path.write_text(dump_config(cfg))
    return str(path)


@pytest.fixture
def model_file(tmp_path, tiny_prior):
    return str(CheckpointRepository().save(tmp_path / "prior.ckpt", tiny_prior))


def test_usage_errors_exit_with_one(capsys):
    assert main(["plan"]) == 1
    assert main(["no-such-command"]) == 1
    assert main(["--help"]) == 0
    assert "gen-data" in capsys.readouterr().out


def test_invalid_config_lists_every_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"esdf": {"resolution": -1}, "train": {"steps": 0}}))
    assert main(["gen-data", "--config", str(path), "--out", str(tmp_path / "d.bin")]) == 1
    err = capsys.readouterr().err
    assert "esdf.resolution" in err and "train.steps" in err


def test_missing_checkpoint_is_an_artifact_error(tmp_path, config_file):
    code = main(["plan", "--config", config_file, "--model", str(tmp_path / "absent.ckpt"),
                 "--out", str(tmp_path / "plan.json")])
    assert code == 3


def test_data_and_training_commands(tmp_path, config_file, capsys):
    data = str(tmp_path / "d.bin")
    assert main(["gen-data", "--config", config_file, "--seed", "4", "--count", "2", "--out", data]) == 0
    assert "wrote 2 records" in capsys.readouterr().out
    assert main(["validate-dataset", data, "--config", config_file]) == 0
    ckpt = str(tmp_path / "m.ckpt")
    assert main(["train", data, "--config", config_file, "--steps", "2", "--out", ckpt]) == 0
    assert (tmp_path / "m.ckpt.loss.csv").read_text().splitlines()[0] == "step,loss,moving_avg"
    assert CheckpointRepository().load_header(ckpt).step == 2
    assert main(["gen-data", "--config", config_file, "--count", "0", "--out", data]) == 1


def test_corrupt_dataset_fails_validation(tmp_path, config_file):
    path = tmp_path / "d.bin"
    path.write_bytes(b"not a dataset")
    assert main(["validate-dataset", str(path), "--config", config_file]) == 3


def test_plan_simulate_metrics_plot(tmp_path, config_file, model_file, capsys):
    plan = str(tmp_path / "plan.json")
    scene = str(tmp_path / "scene.json")
    assert main(["plan", "--config", config_file, "--model", model_file, "--seed", "3", "--out", plan,
                 "--scenario-out", scene, "--esdf-out", str(tmp_path / "grid.esdf")]) == 0
    assert "plan K=1" in capsys.readouterr().out
    assert (tmp_path / "plan.json.metrics.json").exists()

    log = str(tmp_path / "run.jsonl")
    assert main(["simulate", plan, "--config", config_file, "--out", log]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["seed"] == 3
    assert report["success"] is False
    assert report["T_sol"] == pytest.approx(report["T_macro"] + report["T_micro"])

    out = str(tmp_path / "report.json")
    assert main(["metrics", log, "--out", out]) == 0
    assert json.loads(capsys.readouterr().out)["D_bar"] == report["D_bar"]

    assert input_kind(plan) == "plan" and input_kind(log) == "log"
    assert main(["plot", plan, "--out", str(tmp_path / "plan.svg")]) == 0
    assert main(["plot", log, "--out", str(tmp_path / "run.svg")]) == 0
    assert (tmp_path / "run.svg").read_text().startswith("<?xml")

    # the same scene loaded from disk gives the same plan
    again = str(tmp_path / "again.json")
    assert main(["plan", "--config", config_file, "--model", model_file, "--seed", "3", "--out", again,
                 "--scenario", scene]) == 0
    assert json.loads((tmp_path / "again.json").read_text())["plan"] == json.loads((tmp_path / "plan.json").read_text())["plan"]


def test_plot_rejects_other_files(tmp_path):
    path = tmp_path / "other.json"
    path.write_text('{"hello": 1}')
    with pytest.raises(UsageError):
        input_kind(str(path))
    assert main(["plot", str(path), "--out", str(tmp_path / "x.svg")]) == 1
