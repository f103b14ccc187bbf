# app/services/plotting.py
"""Static SVG renderings of plans and swarm logs."""
import math
from pathlib import Path
from typing import Iterable

import numpy as np
from jinja2 import Environment, FileSystemLoader, StrictUndefined

from app.schemas.gaussian import Gmm
from app.schemas.geometry import Scenario
from app.schemas.robot import SwarmLog
from app.schemas.trajectory import PlanDocument

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"
PALETTE = ["#1f77b4", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf", "#bcbd22"]
START_COLOR = "#1f77b4"
GOAL_COLOR = "#d62728"
PIXELS_PER_METER = 8.0

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATE_DIR)),
    undefined=StrictUndefined,
    trim_blocks=True,
    lstrip_blocks=True,
    keep_trailing_newline=True,
)


def fmt(value: float) -> str:
    return f"{float(value):.9g}"


def points_attr(points: Iterable) -> str:
    return " ".join(f"{fmt(x)},{fmt(y)}" for x, y in points)


def sigma_ellipse(mean, cov, n_sigma: float = 2.0) -> dict:
    """n-sigma ellipse of a 2D Gaussian: semi-axes along the covariance eigenvectors."""
    lam, vec = np.linalg.eigh(np.asarray(cov, dtype=float))
    major = vec[:, 1]
    angle = math.degrees(math.atan2(major[1], major[0]))
    return {
        "cx": fmt(mean[0]),
        "cy": fmt(mean[1]),
        "rx": fmt(n_sigma * math.sqrt(max(lam[1], 0.0))),
        "ry": fmt(n_sigma * math.sqrt(max(lam[0], 0.0))),
        "angle": fmt(angle),
    }


def _gmm_ellipses(gmm: Gmm) -> list[dict]:
    return [sigma_ellipse(c.mean, c.covariance) for c in gmm.components]


def _context(scenario: Scenario, title: str) -> dict:
    scale = PIXELS_PER_METER
    return {
        "title": title,
        "width": fmt(scenario.width),
        "height": fmt(scenario.height),
        "pixel_width": fmt(scenario.width * scale),
        "pixel_height": fmt(scenario.height * scale),
        "scale": fmt(scale),
        "line": fmt(2.0 / scale),
        "obstacles": [points_attr(vertices) for vertices in scenario.obstacles],
        "ellipse_groups": [],
        "paths": [],
        "marker_groups": [],
    }


def render_plan(doc: PlanDocument) -> str:
    """Obstacles, 2-sigma endpoint ellipses and one polyline per plan trajectory."""
    ctx = _context(doc.scenario, "GMM trajectory")
    plan = doc.plan
    ctx["ellipse_groups"] = [
        {"id": "start", "color": START_COLOR, "ellipses": _gmm_ellipses(plan.start_gmm)},
        {"id": "goal", "color": GOAL_COLOR, "ellipses": _gmm_ellipses(plan.goal_gmm)},
    ]
    ctx["paths"] = [
        {
            "points": points_attr(traj.states[:, :2]),
            "color": PALETTE[k % len(PALETTE)],
            "opacity": fmt(0.4 + 0.6 * alpha),
        }
        for k, (traj, alpha) in enumerate(zip(plan.trajectories, plan.alphas))
    ]
    return _env.get_template("scene.svg.j2").render(**ctx)


def render_log(log: SwarmLog) -> str:
    """Obstacles and one polyline per robot path, with start and end markers."""
    header = log.header
    ctx = _context(header.scenario, "Swarm paths")
    positions = np.array([f.positions for f in log.frames], dtype=float)
    ctx["paths"] = [
        {"points": points_attr(positions[:, k]), "color": PALETTE[k % len(PALETTE)], "opacity": "0.8"}
        for k in range(positions.shape[1])
    ]
    r = fmt(header.robot_radius)
    ctx["marker_groups"] = [
        {"id": "start", "color": START_COLOR, "markers": [{"cx": fmt(x), "cy": fmt(y), "r": r} for x, y in positions[0]]},
        {"id": "end", "color": GOAL_COLOR, "markers": [{"cx": fmt(x), "cy": fmt(y), "r": r} for x, y in positions[-1]]},
    ]
    return _env.get_template("scene.svg.j2").render(**ctx)
