# app/services/scenarios.py
import logging
import math

import numpy as np

from app.errors import ScenarioGenerationError
from app.schemas.geometry import Box, ConvexPolygon, ScenarioKind, ScenarioParams, Workspace
from app.services.seeding import rng

logger = logging.getLogger(__name__)

# Per-vertex angular jitter as a fraction of the slot width
_ANGLE_JITTER = 0.2


def _box_distance(box: Box, point: np.ndarray) -> float:
    x0, y0, x1, y1 = box
    dx = max(x0 - point[0], 0.0, point[0] - x1)
    dy = max(y0 - point[1], 0.0, point[1] - y1)
    return math.hypot(dx, dy)


def _random_polygon(gen: np.random.Generator, center: np.ndarray, radius: float, n_vertices: int) -> ConvexPolygon:
    phase = gen.uniform(0.0, 2 * math.pi)
    slots = (np.arange(n_vertices) + gen.uniform(-_ANGLE_JITTER, _ANGLE_JITTER, n_vertices)) / n_vertices
    angles = phase + 2 * math.pi * slots
    verts = [(float(center[0] + radius * math.cos(a)), float(center[1] + radius * math.sin(a))) for a in angles]
    return ConvexPolygon(vertices=verts)


def _rectangle(x0: float, y0: float, x1: float, y1: float) -> ConvexPolygon:
    return ConvexPolygon(vertices=[(x0, y0), (x1, y0), (x1, y1), (x0, y1)])


def _place_random(
    gen: np.random.Generator,
    params: ScenarioParams,
    count: int,
    x_ranges: list[tuple[float, float]],
    blocked: list[tuple[np.ndarray, float]],
) -> list[ConvexPolygon]:
    """
    Rejection-sample `count` random polygons.

    Placement is tested on circumscribed circles, so accepted obstacles keep
    at least min_clearance from each other, from `blocked` discs and
    region_clearance from the start/goal regions.
    """
    placed: list[ConvexPolygon] = []
    discs = list(blocked)
    r_lo, r_hi = params.radius_range
    v_lo, v_hi = params.vertex_range
    for index in range(count):
        last_violation = "none"
        for _ in range(params.max_retries):
            radius = gen.uniform(r_lo, r_hi)
            lo, hi = x_ranges[int(gen.integers(len(x_ranges)))]
            if hi - lo < 2 * radius or params.height < 2 * radius:
                last_violation = f"radius {radius:.2f} does not fit the placement band"
                continue
            center = np.array([gen.uniform(lo + radius, hi - radius), gen.uniform(radius, params.height - radius)])
            n_vertices = int(gen.integers(v_lo, v_hi + 1))
            gap = min(
                (float(np.linalg.norm(center - c)) - radius - r for c, r in discs),
                default=math.inf,
            )
            if gap < params.min_clearance:
                last_violation = f"min_clearance {params.min_clearance} (gap {gap:.2f})"
                continue
            region_gap = min(_box_distance(params.start_region, center), _box_distance(params.goal_region, center)) - radius
            if region_gap < params.region_clearance:
                last_violation = f"region_clearance {params.region_clearance} (gap {region_gap:.2f})"
                continue
            placed.append(_random_polygon(gen, center, radius, n_vertices))
            discs.append((center, radius))
            break
        else:
            raise ScenarioGenerationError(
                f"could not place obstacle {index + 1} of {count} within {params.max_retries} tries; "
                f"last violated constraint: {last_violation}"
            )
    return placed


def _corridor_wall(gen: np.random.Generator, params: ScenarioParams) -> tuple[list[ConvexPolygon], list[float]]:
    w, h = params.width, params.height
    x0, x1 = w / 3, 2 * w / 3
    cw = params.corridor_width
    count = params.corridor_count
    spacing = h / (count + 1)
    if spacing < cw:
        raise ScenarioGenerationError(
            f"{count} corridors of width {cw} do not fit a wall of height {h}"
        )
    slack = max(0.0, (spacing - cw) / 4)
    centers = [spacing * (k + 1) + gen.uniform(-slack, slack) for k in range(count)]
    blocks = []
    lower = 0.0
    for yc in centers + [None]:
        upper = h if yc is None else yc - cw / 2
        if upper - lower > 1e-6:
            blocks.append(_rectangle(x0, lower, x1, upper))
        if yc is not None:
            lower = yc + cw / 2
    return blocks, centers


def generate_scenario(
    kind: ScenarioKind, seed: int, params: ScenarioParams, *, boundary_obstacles: bool = False
) -> Workspace:
    """
    Procedural benchmark scene.

    Args:
        kind: "dense-obstacles" or "narrow-passages"
        seed: Scene seed
        params: Obstacle count, sizes and clearances

    Returns:
        Workspace, identical for identical (kind, seed, params)

    Raises:
        ScenarioGenerationError: when rejection sampling runs out of retries
    """
    gen = rng(seed, "scenario", kind)
    w = params.width
    if kind == "dense-obstacles":
        obstacles = _place_random(gen, params, params.obstacle_count, [(0.0, w)], [])
    elif kind == "narrow-passages":
        wall, centers = _corridor_wall(gen, params)
        # Outer obstacles stay min_clearance away from the wall
        bands = [(0.0, w / 3 - params.min_clearance), (2 * w / 3 + params.min_clearance, w)]
        outer = _place_random(gen, params, params.obstacle_count, bands, [])
        obstacles = wall + outer
        logger.debug("corridor centers %s", ", ".join(f"{c:.2f}" for c in centers))
    else:
        raise ScenarioGenerationError(f"unknown scenario kind {kind!r}")
    logger.info("scenario generated kind=%s seed=%d obstacles=%d", kind, seed, len(obstacles))
    return Workspace(width=w, height=params.height, obstacles=obstacles, boundary_obstacles=boundary_obstacles)


def corridor_centers(seed: int, params: ScenarioParams) -> list[float]:
    """y-coordinates of the corridor midlines of a narrow-passages scene."""
    gen = rng(seed, "scenario", "narrow-passages")
    return _corridor_wall(gen, params)[1]
