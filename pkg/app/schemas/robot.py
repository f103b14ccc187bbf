# app/schemas/robot.py
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

from app.schemas.geometry import Point, Scenario


class RobotState(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: int = Field(..., ge=0)
    position: Point
    velocity: Point = (0.0, 0.0)
    radius: float = Field(0.2, gt=0)


class Assignment(BaseModel):
    """Robot k goes to target mapping[k]"""
    mapping: list[int]
    objective: float = Field(0.0, ge=0, description="Total squared travel distance")

    @field_validator("mapping")
    @classmethod
    def _bijective(cls, mapping: list[int]) -> list[int]:
        if sorted(mapping) != list(range(len(mapping))):
            raise ValueError("assignment must be a permutation")
        return mapping


class MpcConfig(BaseModel):
    """Per-robot predictive controller and simulator settings"""
    horizon: int = Field(5, ge=1, description="N_MPC steps")
    dt: float = Field(0.1, gt=0, description="Control step in seconds")
    v_max: float = Field(3.0, gt=0)
    a_max: float = Field(4.0, gt=0)
    safety_margin: float = Field(0.05, ge=0)
    w_track: float = Field(1.0, gt=0, description="Tracking weight")
    w_effort: float = Field(1e-3, ge=0, description="Control-effort weight")
    neighbor_radius: float = Field(5.0, gt=0, description="Robots closer than this are constrained")
    orca_time_horizon: float = Field(1.0, gt=0)
    cutting_planes: int = Field(4, ge=0, description="Re-solves that tighten the speed discs")
    capture_radius: float = Field(0.5, gt=0)
    max_steps: Optional[int] = Field(None, ge=1, description="Step budget; None derives it from the plan duration")
    settle_time: float = Field(30.0, ge=0, description="Extra seconds allowed after the plan ends")
    process_noise: float = Field(0.0, ge=0, description="Std of seeded position noise per step")
    selection: Literal["stochastic", "quota"] = "stochastic"


class SwarmFrame(BaseModel):
    t: float
    positions: list[Point]
    velocities: list[Point]
    min_robot_distance: Optional[float] = Field(None, description="Min surface distance between robots")
    min_obstacle_distance: Optional[float] = Field(None, description="Min robot-obstacle surface distance")


class SwarmLogHeader(BaseModel):
    """First line of a swarm log: the run's setup and outcome"""
    scenario: Scenario
    robot_radius: float
    robot_count: int
    dt: float
    capture_radius: float
    targets: list[Point] = Field(default_factory=list, description="Final targets")
    seed: int = 0
    config_hash: Optional[str] = None
    merge_threshold: float = 0.05
    selection: Literal["stochastic", "quota"] = "stochastic"
    success: bool = False
    task_time: Optional[float] = Field(None, description="Simulated seconds until capture")
    warnings: dict[str, int] = Field(default_factory=dict)


class SwarmLog(BaseModel):
    header: SwarmLogHeader
    frames: list[SwarmFrame] = Field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.header.success
