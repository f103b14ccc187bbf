# app/schemas/esdf.py
import numpy as np
from pydantic import Field, model_validator

from app.schemas.base import ArrayModel, NDArray


class EsdfGrid(ArrayModel):
    """
    Signed distance samples at origin + (i, j) * resolution.

    values has shape (ny, nx) with row index along y; gradients has shape
    (ny, nx, 2) and holds unit vectors (gx, gy).
    """
    resolution: float = Field(..., gt=0)
    origin: tuple[float, float] = (0.0, 0.0)
    width: float = Field(..., gt=0, description="Queryable extent along x")
    height: float = Field(..., gt=0, description="Queryable extent along y")
    values: NDArray
    gradients: NDArray

    @model_validator(mode="after")
    def _shapes(self) -> "EsdfGrid":
        if self.values.ndim != 2 or min(self.values.shape) < 2:
            raise ValueError(f"values must be a 2D grid of at least 2x2 samples, got {self.values.shape}")
        if self.gradients.shape != self.values.shape + (2,):
            raise ValueError(f"gradients shape {self.gradients.shape} does not match values {self.values.shape}")
        if not (np.all(np.isfinite(self.values)) and np.all(np.isfinite(self.gradients))):
            raise ValueError("grid contains non-finite entries")
        ny, nx = self.values.shape
        ox, oy = self.origin
        if ox + (nx - 1) * self.resolution < ox + self.width - 1e-9 or oy + (ny - 1) * self.resolution < oy + self.height - 1e-9:
            raise ValueError("grid samples do not cover the stated extent")
        return self

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def sample_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Sample coordinates as two (ny, nx) arrays."""
        ny, nx = self.values.shape
        xs = self.origin[0] + np.arange(nx) * self.resolution
        ys = self.origin[1] + np.arange(ny) * self.resolution
        return np.meshgrid(xs, ys)
