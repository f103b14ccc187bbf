# app/schemas/dataset.py
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np
from pydantic import BaseModel, Field

from app.schemas.base import ArrayModel, NDArray
from app.schemas.geometry import Scenario, ScenarioKind, ScenarioParams

DATASET_FORMAT = "swarmdiff-dataset"


@dataclass
class DatasetRecord:
    attempt: int
    scenario: Scenario
    trajectory: np.ndarray  # (path_nodes, 5)
    features: np.ndarray    # (E,)


class DatasetHeader(BaseModel):
    format: str = DATASET_FORMAT
    version: int = 1
    seed: int
    kind: ScenarioKind
    count: int = Field(..., ge=1)
    path_nodes: int = Field(..., ge=2)
    horizon: int = Field(..., ge=2, description="Training horizon H of the subsampled view")
    feature_dim: int = Field(..., ge=0)
    params: ScenarioParams
    config_hash: Optional[str] = None
    failures: dict[str, int] = Field(default_factory=dict)

    @property
    def stride(self) -> int:
        """Floats per record."""
        return self.path_nodes * 5 + self.feature_dim


class DatasetIndex(BaseModel):
    index: int
    attempt: int
    scenario: Scenario


class Dataset(ArrayModel):
    """A loaded dataset; arrays hold the stored f32 values widened to float64"""
    header: DatasetHeader
    index: list[DatasetIndex]
    trajectories: NDArray
    features: NDArray

    def records(self) -> Iterator[DatasetRecord]:
        for entry, traj, feats in zip(self.index, self.trajectories, self.features):
            yield DatasetRecord(attempt=entry.attempt, scenario=entry.scenario, trajectory=traj, features=feats)
