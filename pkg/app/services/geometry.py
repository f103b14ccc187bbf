# app/services/geometry.py
"""Exact signed distances to convex polygons and their union."""
import numpy as np

from app.schemas.geometry import ConvexPolygon, Workspace


def polygon_sdf(poly: ConvexPolygon, points) -> np.ndarray:
    """
    Signed distance from each point to one convex polygon.

    Args:
        poly: Counter-clockwise convex polygon
        points: (..., 2) array

    Returns:
        (...) array, negative strictly inside
    """
    pts = np.asarray(points, dtype=float)
    flat = pts.reshape(-1, 2)
    v = np.asarray(poly.vertices, dtype=float)
    w = np.roll(v, -1, axis=0)
    edges = w - v                                     # (E, 2)
    rel = flat[:, None, :] - v[None, :, :]            # (N, E, 2)
    t = np.einsum("nek,ek->ne", rel, edges) / np.einsum("ek,ek->e", edges, edges)
    t = np.clip(t, 0.0, 1.0)
    closest = v[None] + t[..., None] * edges[None]
    dist = np.min(np.linalg.norm(flat[:, None, :] - closest, axis=-1), axis=1)
    cross = edges[None, :, 0] * rel[..., 1] - edges[None, :, 1] * rel[..., 0]
    inside = np.all(cross > 0.0, axis=1)
    out = np.where(inside, -dist, dist)
    return out.reshape(pts.shape[:-1])


def point_in_polygon(poly: ConvexPolygon, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    v = np.asarray(poly.vertices, dtype=float)
    edges = np.roll(v, -1, axis=0) - v
    rel = pts.reshape(-1, 2)[:, None, :] - v[None]
    cross = edges[None, :, 0] * rel[..., 1] - edges[None, :, 1] * rel[..., 0]
    return np.all(cross > 0.0, axis=1).reshape(pts.shape[:-1])


def boundary_sdf(ws: Workspace, points) -> np.ndarray:
    """Distance to the four boundary half-planes, positive inside the workspace."""
    pts = np.asarray(points, dtype=float)
    x, y = pts[..., 0], pts[..., 1]
    return np.minimum.reduce([x, ws.width - x, y, ws.height - y])


def distance_cap(ws: Workspace) -> float:
    return float(max(ws.width, ws.height))


def workspace_sdf(ws: Workspace, points) -> np.ndarray:
    """Exact SDF of the obstacle union (pointwise min), capped at max(width, height)."""
    pts = np.asarray(points, dtype=float)
    cap = distance_cap(ws)
    out = np.full(pts.shape[:-1], cap)
    for poly in ws.obstacles:
        out = np.minimum(out, polygon_sdf(poly, pts))
    if ws.boundary_obstacles:
        out = np.minimum(out, boundary_sdf(ws, pts))
    return out


def occupied(ws: Workspace, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    mask = np.zeros(pts.shape[:-1], dtype=bool)
    for poly in ws.obstacles:
        mask |= point_in_polygon(poly, pts)
    return mask
