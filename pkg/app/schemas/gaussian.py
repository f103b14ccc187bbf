# app/schemas/gaussian.py
import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_serializer, model_validator

from app.schemas.base import ArrayModel, NDArray

# Construction-site bounds shared by every Gaussian
SIGMA_MIN = 1e-4
RHO_MAX = 1.0 - 1e-6


class GaussianState(BaseModel):
    """
    One macroscopic node [x, y, sigma_x, sigma_y, rho].

    Serializes as the plain 5-list. Out-of-range shape parameters are rejected;
    valid ones are clipped to sigma >= SIGMA_MIN and |rho| <= RHO_MAX.
    """
    model_config = ConfigDict(frozen=True)

    x: float
    y: float
    sigma_x: float = Field(..., gt=0)
    sigma_y: float = Field(..., gt=0)
    rho: float = Field(..., gt=-1, lt=1)

    @model_validator(mode="before")
    @classmethod
    def _from_sequence(cls, data: Any) -> Any:
        if isinstance(data, (list, tuple, np.ndarray)):
            values = [float(v) for v in data]
            if len(values) != 5:
                raise ValueError(f"a Gaussian state has 5 entries, got {len(values)}")
            data = dict(zip(("x", "y", "sigma_x", "sigma_y", "rho"), values))
        return data

    @model_validator(mode="after")
    def _clip(self) -> "GaussianState":
        for name in ("x", "y", "sigma_x", "sigma_y", "rho"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "sigma_x", max(self.sigma_x, SIGMA_MIN))
        object.__setattr__(self, "sigma_y", max(self.sigma_y, SIGMA_MIN))
        object.__setattr__(self, "rho", min(max(self.rho, -RHO_MAX), RHO_MAX))
        return self

    @model_serializer
    def _as_list(self) -> list[float]:
        return [self.x, self.y, self.sigma_x, self.sigma_y, self.rho]

    @property
    def mean(self) -> np.ndarray:
        return np.array([self.x, self.y])

    @property
    def covariance(self) -> np.ndarray:
        c = self.rho * self.sigma_x * self.sigma_y
        return np.array([[self.sigma_x ** 2, c], [c, self.sigma_y ** 2]])

    def to_array(self) -> np.ndarray:
        return np.array(self._as_list())

    @classmethod
    def from_array(cls, values) -> "GaussianState":
        return cls.model_validate(list(np.asarray(values, dtype=float)))

    @classmethod
    def from_covariance(cls, mean, cov) -> "GaussianState":
        cov = np.asarray(cov, dtype=float)
        sx = math.sqrt(cov[0, 0])
        sy = math.sqrt(cov[1, 1])
        rho = 0.5 * (cov[0, 1] + cov[1, 0]) / (sx * sy)
        return cls(x=float(mean[0]), y=float(mean[1]), sigma_x=sx, sigma_y=sy, rho=rho)


class Gmm(BaseModel):
    """Weighted mixture of Gaussian states"""
    model_config = ConfigDict(frozen=True)

    weights: list[float] = Field(..., min_length=1)
    components: list[GaussianState] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _valid_weights(self) -> "Gmm":
        if len(self.weights) != len(self.components):
            raise ValueError(f"{len(self.weights)} weights for {len(self.components)} components")
        if min(self.weights) < 0:
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {sum(self.weights)!r}, expected 1")
        return self

    def __len__(self) -> int:
        return len(self.components)

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def covariances(self) -> np.ndarray:
        return np.array([c.covariance for c in self.components])

    def states(self) -> np.ndarray:
        return np.array([c.to_array() for c in self.components])


class AffineMap(ArrayModel):
    """T(x) = A x + b"""
    A: NDArray
    b: NDArray

    def apply(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float)
        return pts @ self.A.T + self.b
