# app/services/esdf.py
import logging
import math

import numpy as np

from app.errors import DomainError
from app.schemas.esdf import EsdfGrid
from app.schemas.geometry import Workspace
from app.services.geometry import workspace_sdf

logger = logging.getLogger(__name__)

# Fallback unit vector where the central difference vanishes
DEFAULT_NORMAL = np.array([1.0, 0.0])
_BOUNDS_TOL = 1e-9


def build_esdf(ws: Workspace, resolution: float) -> EsdfGrid:
    """
    Sample the exact obstacle SDF on a regular grid covering the workspace.

    Args:
        ws: Workspace
        resolution: Grid spacing, at most min(width, height)/4

    Returns:
        Grid with central-difference gradients normalized to unit length
    """
    if not (resolution > 0 and resolution <= min(ws.width, ws.height) / 4 + 1e-12):
        raise DomainError(
            f"resolution {resolution} must lie in (0, {min(ws.width, ws.height) / 4}] for a "
            f"{ws.width}x{ws.height} workspace"
        )
    nx = int(math.ceil(ws.width / resolution - 1e-9)) + 1
    ny = int(math.ceil(ws.height / resolution - 1e-9)) + 1
    xs = np.arange(nx) * resolution
    ys = np.arange(ny) * resolution
    gx, gy = np.meshgrid(xs, ys)
    values = workspace_sdf(ws, np.stack([gx, gy], axis=-1))

    dy, dx = np.gradient(values, resolution)
    grads = np.stack([dx, dy], axis=-1)
    norms = np.linalg.norm(grads, axis=-1, keepdims=True)
    flat = norms[..., 0] < 1e-12
    grads = np.where(norms > 1e-12, grads / np.maximum(norms, 1e-12), DEFAULT_NORMAL)
    logger.debug("esdf built nx=%d ny=%d res=%.3f obstacles=%d flat_cells=%d",
                 nx, ny, resolution, len(ws.obstacles), int(flat.sum()))
    return EsdfGrid(
        resolution=resolution,
        origin=(0.0, 0.0),
        width=ws.width,
        height=ws.height,
        values=values,
        gradients=grads,
    )


def in_bounds(grid: EsdfGrid, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    x = pts[..., 0] - grid.origin[0]
    y = pts[..., 1] - grid.origin[1]
    return (
        (x >= -_BOUNDS_TOL) & (x <= grid.width + _BOUNDS_TOL)
        & (y >= -_BOUNDS_TOL) & (y <= grid.height + _BOUNDS_TOL)
        & np.isfinite(x) & np.isfinite(y)
    )


def _cells(grid: EsdfGrid, pts: np.ndarray):
    ny, nx = grid.values.shape
    fx = (pts[:, 0] - grid.origin[0]) / grid.resolution
    fy = (pts[:, 1] - grid.origin[1]) / grid.resolution
    i0 = np.clip(np.floor(fx).astype(int), 0, nx - 2)
    j0 = np.clip(np.floor(fy).astype(int), 0, ny - 2)
    tx = np.clip(fx - i0, 0.0, 1.0)
    ty = np.clip(fy - j0, 0.0, 1.0)
    return i0, j0, tx, ty


def query_sdf_batch(grid: EsdfGrid, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Bilinear SDF queries.

    Args:
        grid: ESDF grid
        points: (N, 2) array inside the grid extent

    Returns:
        (distance (N,), normal (N, 2), value_gradient (N, 2)); normal is the
        normalized interpolated stored gradient, value_gradient the exact
        gradient of the bilinear interpolant of the values

    Raises:
        DomainError: if any point lies outside the grid extent
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    ok = in_bounds(grid, pts)
    if not np.all(ok):
        bad = pts[np.argmin(ok)]
        raise DomainError(
            f"query point ({bad[0]:.6g}, {bad[1]:.6g}) outside [0, {grid.width}] x [0, {grid.height}]"
        )
    i0, j0, tx, ty = _cells(grid, pts)
    v = grid.values
    v00, v10 = v[j0, i0], v[j0, i0 + 1]
    v01, v11 = v[j0 + 1, i0], v[j0 + 1, i0 + 1]
    w00 = (1 - tx) * (1 - ty)
    w10 = tx * (1 - ty)
    w01 = (1 - tx) * ty
    w11 = tx * ty
    dist = w00 * v00 + w10 * v10 + w01 * v01 + w11 * v11

    g = grid.gradients
    n = (
        w00[:, None] * g[j0, i0] + w10[:, None] * g[j0, i0 + 1]
        + w01[:, None] * g[j0 + 1, i0] + w11[:, None] * g[j0 + 1, i0 + 1]
    )
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    n = np.where(norm > 1e-12, n / np.maximum(norm, 1e-12), DEFAULT_NORMAL)

    res = grid.resolution
    dvdx = ((1 - ty) * (v10 - v00) + ty * (v11 - v01)) / res
    dvdy = ((1 - tx) * (v01 - v00) + tx * (v11 - v10)) / res
    return dist, n, np.stack([dvdx, dvdy], axis=1)


def query_sdf(grid: EsdfGrid, p) -> tuple[float, np.ndarray]:
    """Signed distance and unit normal at one point."""
    dist, normal, _ = query_sdf_batch(grid, np.asarray(p, dtype=float)[None, :])
    return float(dist[0]), normal[0]


def chord_features(grid: EsdfGrid, a, b, n: int) -> np.ndarray:
    """
    SDF value and normal at n points along the segment a -> b, followed by
    the global statistics (mean, min, max, std, occupied fraction) of the grid.

    Returns:
        Vector of length 3 * n + 5
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = a[None] + t * (b - a)[None]
    dist, normal, _ = query_sdf_batch(grid, pts)
    local = np.concatenate([dist[:, None], normal], axis=1).reshape(-1)
    values = grid.values
    pooled = np.array([values.mean(), values.min(), values.max(), values.std(), float(np.mean(values < 0))])
    return np.concatenate([local, pooled])
