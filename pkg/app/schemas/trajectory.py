# app/schemas/trajectory.py
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.schemas.base import ArrayModel, NDArray
from app.schemas.gaussian import RHO_MAX, SIGMA_MIN, GaussianState, Gmm
from app.schemas.geometry import Point, Scenario


class CostWeights(BaseModel):
    """Weights of the three trajectory cost terms plus the risk parameters"""
    lambda_obs: float = Field(1.0, ge=0, description="Collision (CVaR) weight")
    lambda_dis: float = Field(0.1, ge=0, description="Wasserstein transport weight")
    lambda_gp: float = Field(0.01, ge=0, description="GP smoothness weight; 0 defers to the learned prior")
    alpha: float = Field(0.1, gt=0, lt=1, description="CVaR risk level")
    epsilon: float = Field(0.0, ge=0, description="Safety margin in meters")

    def scaled(self, c: float) -> "CostWeights":
        return self.model_copy(
            update={"lambda_obs": c * self.lambda_obs, "lambda_dis": c * self.lambda_dis, "lambda_gp": c * self.lambda_gp}
        )


class GpModel(ArrayModel):
    """Constant-velocity transition Phi and process noise Q on the 10-dim extended state"""
    transition: NDArray
    process_noise: NDArray
    dt: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _shapes(self) -> "GpModel":
        if self.transition.shape != (10, 10) or self.process_noise.shape != (10, 10):
            raise ValueError("transition and process_noise must be 10x10")
        if np.min(np.linalg.eigvalsh(0.5 * (self.process_noise + self.process_noise.T))) <= 0:
            raise ValueError("process_noise must be positive definite")
        return self


class GaussianTrajectory(ArrayModel):
    """
    Length-H sequence of Gaussian states, stored as an (H, 5) array.

    Serializes as {"states": [[x, y, sx, sy, rho], ...], "dt": dt}.
    """
    states: NDArray
    dt: float = Field(1.0, gt=0, description="Seconds between states")

    @field_validator("states")
    @classmethod
    def _valid_states(cls, states: np.ndarray) -> np.ndarray:
        if states.ndim != 2 or states.shape[1] != 5:
            raise ValueError(f"states must have shape (H, 5), got {states.shape}")
        if states.shape[0] < 2:
            raise ValueError("a trajectory needs at least 2 states")
        if not np.all(np.isfinite(states)):
            raise ValueError("states must be finite")
        if np.any(states[:, 2:4] <= 0) or np.any(np.abs(states[:, 4]) >= 1):
            raise ValueError("every state needs sigma > 0 and |rho| < 1")
        clipped = states.copy()
        clipped[:, 2:4] = np.maximum(clipped[:, 2:4], SIGMA_MIN)
        clipped[:, 4] = np.clip(clipped[:, 4], -RHO_MAX, RHO_MAX)
        clipped.setflags(write=False)
        return clipped

    @property
    def horizon(self) -> int:
        return int(self.states.shape[0])

    def __len__(self) -> int:
        return self.horizon

    def state(self, index: int) -> GaussianState:
        return GaussianState.from_array(self.states[index])

    @classmethod
    def from_states(cls, states: list[GaussianState], dt: float = 1.0) -> "GaussianTrajectory":
        return cls(states=np.array([s.to_array() for s in states]), dt=dt)


class GaussianRoadmap(ArrayModel):
    """Roadmap over Gaussian states; edge costs are W2 distances"""
    nodes: NDArray = Field(..., description="(N, 5) node states")
    edges: list[tuple[int, int, float]] = Field(default_factory=list)
    start_index: int
    goal_index: int


class GmmTrajectory(ArrayModel):
    """The macroscopic plan: K weighted Gaussian trajectories plus their transport plan"""
    trajectories: list[GaussianTrajectory] = Field(..., min_length=1)
    alphas: list[float]
    plan: NDArray = Field(..., description="N1 x N2 transport matrix")
    start_gmm: Gmm
    goal_gmm: Gmm
    pairs: list[tuple[int, int]] = Field(..., description="(start, goal) component of each trajectory")

    @model_validator(mode="after")
    def _consistent(self) -> "GmmTrajectory":
        k = len(self.trajectories)
        if len(self.alphas) != k or len(self.pairs) != k:
            raise ValueError("trajectories, alphas and pairs must have equal length")
        if min(self.alphas) < 0 or abs(sum(self.alphas) - 1.0) > 1e-9:
            raise ValueError("alphas must be nonnegative and sum to 1")
        n1, n2 = len(self.start_gmm), len(self.goal_gmm)
        if self.plan.shape != (n1, n2):
            raise ValueError(f"plan shape {self.plan.shape} does not match ({n1}, {n2})")
        if int(np.count_nonzero(self.plan > 0)) != k:
            raise ValueError("K must equal the number of positive plan entries")
        if np.max(np.abs(self.plan.sum(axis=1) - np.array(self.start_gmm.weights))) > 1e-8:
            raise ValueError("plan row sums differ from the start weights")
        if np.max(np.abs(self.plan.sum(axis=0) - np.array(self.goal_gmm.weights))) > 1e-8:
            raise ValueError("plan column sums differ from the goal weights")
        horizons = {t.horizon for t in self.trajectories}
        if len(horizons) != 1:
            raise ValueError("all trajectories must share one horizon")
        return self

    @property
    def horizon(self) -> int:
        return self.trajectories[0].horizon

    @property
    def dt(self) -> float:
        return self.trajectories[0].dt


class PlanDocument(BaseModel):
    """Plan file: the macroscopic plan plus the mission it was made for"""
    plan: GmmTrajectory
    scenario: Scenario
    robots: list[Point] = Field(default_factory=list, description="Initial robot positions")
    goal_points: list[Point] = Field(default_factory=list)
    robot_radius: float = Field(0.2, gt=0)
    seed: int = 0
    config_hash: Optional[str] = None
