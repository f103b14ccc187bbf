# tests/services/test_pipeline.py
import numpy as np
import pytest

from app.config import config_hash
from app.services.pipeline import plan_mission, run_mission, scenario_for, simulate_plan, straight_line_bound


@pytest.fixture
def quick_config(small_config):
    return small_config.model_copy(update={"mpc": small_config.mpc.model_copy(update={"max_steps": 20})})


def test_scenario_for_is_seeded(small_config):
    a = scenario_for(small_config, 11)
    assert a == scenario_for(small_config, 11)
    assert a.seed == 11
    assert a.config_hash == config_hash(small_config)
    assert len(a.obstacles) == small_config.scenario.obstacle_count


def test_plan_mission(quick_config, tiny_prior):
    scenario = scenario_for(quick_config, 2)
    outcome = plan_mission(scenario, quick_config, tiny_prior, seed=5)
    doc = outcome.document
    assert len(doc.robots) == quick_config.mission.robot_count
    assert len(doc.goal_points) == quick_config.mission.robot_count
    assert doc.plan.horizon == quick_config.denoiser.horizon
    assert doc.seed == 5 and doc.config_hash == config_hash(quick_config)
    assert outcome.macro.elapsed > 0 and outcome.T_fit >= 0
    assert straight_line_bound(doc) > 20.0


def test_run_mission_reports_additive_times(quick_config, tiny_prior):
    scenario = scenario_for(quick_config, 2)
    outcome = run_mission(scenario, quick_config, tiny_prior, seed=5, T_load=0.25)
    report = outcome.report
    assert report.T_sol == pytest.approx(report.T_macro + report.T_micro)
    assert report.T_load == 0.25
    assert report.seed == 5
    assert outcome.log.header.robot_count == quick_config.mission.robot_count
    assert outcome.simulation.steps == 20
    # 20 steps are far too few to cross the map
    assert not report.success


def test_simulating_a_stored_plan_repeats_the_run(quick_config, tiny_prior):
    scenario = scenario_for(quick_config, 2)
    doc = plan_mission(scenario, quick_config, tiny_prior, seed=5).document
    a, _ = simulate_plan(doc, quick_config, seed=5)
    b, _ = simulate_plan(doc, quick_config, seed=5)
    assert np.array_equal(
        np.array([f.positions for f in a.frames]), np.array([f.positions for f in b.frames])
    )


def with_sections(cfg, **sections):
    return cfg.model_copy(update={
        name: getattr(cfg, name).model_copy(update=values) for name, values in sections.items()
    })


@pytest.mark.slow
def test_twenty_robots_cross_an_empty_scene(small_config, tiny_prior):
    cfg = with_sections(small_config, scenario={"obstacle_count": 0}, mission={"robot_count": 20},
                        mpc={"settle_time": 60.0})
    outcome = run_mission(scenario_for(cfg, 3), cfg, tiny_prior, seed=3)
    report = outcome.report
    assert outcome.log.header.robot_count == 20
    assert report.success
    assert report.d_rob >= 0.0
    assert report.d_obs >= 0.0


@pytest.mark.slow
def test_macro_time_does_not_grow_with_the_swarm(small_config, tiny_prior):
    cfg = with_sections(small_config, scenario={
        "obstacle_count": 0, "start_region": (1.0, 3.0, 13.0, 27.0), "goal_region": (27.0, 3.0, 39.0, 27.0),
    })
    scenario = scenario_for(cfg, 1)
    small = with_sections(cfg, mission={"robot_count": 20})
    large = with_sections(cfg, mission={"robot_count": 100})
    plan_mission(scenario, small, tiny_prior, seed=0)
    times = {20: [], 100: []}
    for seed in range(3):
        for count, variant in ((20, small), (100, large)):
            outcome = plan_mission(scenario, variant, tiny_prior, seed=seed)
            assert len(outcome.document.robots) == count
            times[count].append(outcome.macro.elapsed)
    assert min(times[100]) <= 2.0 * min(times[20])
