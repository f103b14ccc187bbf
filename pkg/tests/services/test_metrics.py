# tests/services/test_metrics.py
import pytest
from pydantic import ValidationError

from app.schemas.geometry import Scenario
from app.schemas.metrics import METRIC_COLUMNS, MetricsReport
from app.schemas.robot import SwarmFrame, SwarmLog, SwarmLogHeader
from app.services.metrics import build_report, log_metrics


def swarm_log(success=True, task_time=0.2) -> SwarmLog:
    header = SwarmLogHeader(
        scenario=Scenario(width=10.0, height=10.0), robot_radius=0.2, robot_count=2, dt=0.1,
        capture_radius=0.5, success=success, task_time=task_time,
    )
    frames = [
        SwarmFrame(t=0.0, positions=[(0.0, 0.0), (5.0, 0.0)], velocities=[(0.0, 0.0)] * 2,
                   min_robot_distance=4.6, min_obstacle_distance=1.0),
        SwarmFrame(t=0.1, positions=[(3.0, 4.0), (5.0, 1.0)], velocities=[(0.0, 0.0)] * 2,
                   min_robot_distance=3.4, min_obstacle_distance=0.5),
        SwarmFrame(t=0.2, positions=[(3.0, 4.0), (5.0, 2.0)], velocities=[(0.0, 0.0)] * 2,
                   min_robot_distance=2.5, min_obstacle_distance=0.7),
    ]
    return SwarmLog(header=header, frames=frames)


def test_log_metrics():
    metrics = log_metrics(swarm_log())
    assert metrics["D_bar"] == pytest.approx((5.0 + 2.0) / 2)
    assert metrics["d_obs"] == 0.5
    assert metrics["d_rob"] == 2.5
    assert metrics["success"] is True
    assert metrics["T_task"] == 0.2


def test_single_frame_log_has_no_travel():
    log = swarm_log(success=False, task_time=None)
    log.frames = log.frames[:1]
    metrics = log_metrics(log)
    assert metrics["D_bar"] == 0.0
    assert metrics["T_task"] == 0.0


def test_report_adds_the_phase_times():
    report = build_report(swarm_log(), seed=3, config_hash="abc", T_macro=1.5, T_micro=2.25, T_mpc=0.01)
    assert report.T_sol == 3.75
    assert report.seed == 3 and report.config_hash == "abc"
    row = report.csv_row(suite="sizes")
    assert list(row)[:1] == ["suite"]
    assert list(row)[1:] == METRIC_COLUMNS


def test_report_rejects_inconsistent_totals():
    with pytest.raises(ValidationError, match="T_sol"):
        MetricsReport(T_sol=1.0, T_macro=2.0, T_micro=0.0)
