# tests/crud/test_plan.py
import logging

from app.crud.plan import MetricsRepository, PlanRepository, metrics_path
from app.schemas.metrics import MetricsReport
from tests.services.test_plotting import plan_document  # noqa: F401


def test_plan_round_trip(tmp_path, plan_document):  # noqa: F811
    doc = plan_document.model_copy(update={"config_hash": "abc", "seed": 9})
    path = PlanRepository().create(tmp_path / "plan.json", doc)
    loaded = PlanRepository().load(path, "abc")
    assert loaded.seed == 9
    assert loaded.plan.alphas == [1.0]
    assert (loaded.plan.trajectories[0].states == doc.plan.trajectories[0].states).all()


def test_plan_hash_mismatch_warns(tmp_path, plan_document, caplog):  # noqa: F811
    doc = plan_document.model_copy(update={"config_hash": "abc"})
    path = PlanRepository().create(tmp_path / "plan.json", doc)
    with caplog.at_level(logging.WARNING):
        PlanRepository().load(path, "def")
    assert "config hash mismatch" in caplog.text


def test_metrics_sidecar(tmp_path):
    assert metrics_path("out/plan.json") == "out/plan.json.metrics.json"
    report = MetricsReport.build(T_macro=1.0, T_micro=0.5, seed=2)
    path = MetricsRepository().create(metrics_path(tmp_path / "plan.json"), report)
    assert MetricsRepository().get(path) == report
