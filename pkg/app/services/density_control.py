# app/services/density_control.py
"""Per-robot targets from a mixture step, and the optimal robot-to-target assignment."""
import logging
from typing import Literal

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from app.errors import DomainError
from app.schemas.gaussian import Gmm
from app.schemas.robot import Assignment
from app.services.gaussian import mahalanobis_sq, ot_map, responsibilities
from app.services.seeding import rng

logger = logging.getLogger(__name__)


def current_components(positions: np.ndarray, gmm: Gmm) -> tuple[np.ndarray, int]:
    """
    Maximum-responsibility component per robot.

    Robots whose densities all underflow fall back to the nearest component
    by Mahalanobis distance; the second value counts them.
    """
    resp = responsibilities(positions, gmm)
    comp = np.argmax(resp, axis=1)
    empty = resp.sum(axis=1) == 0.0
    if empty.any():
        comp[empty] = np.argmin(mahalanobis_sq(positions[empty], gmm), axis=1)
        logger.warning("density control fell back to Mahalanobis assignment for %d robots", int(empty.sum()))
    return comp, int(empty.sum())


def largest_remainder(total: int, shares: np.ndarray) -> np.ndarray:
    """Integer counts summing to `total`, proportional to `shares`."""
    shares = np.asarray(shares, dtype=float)
    exact = total * shares / shares.sum()
    counts = np.floor(exact).astype(int)
    rest = total - int(counts.sum())
    if rest:
        order = np.argsort(-(exact - counts), kind="stable")[:rest]
        counts[order] += 1
    return counts


def _destinations(
    comp: np.ndarray, plan: np.ndarray, seed: int, mode: Literal["stochastic", "quota"]
) -> np.ndarray:
    dest = np.empty(len(comp), dtype=int)
    gen = rng(seed, "density")
    for i in range(plan.shape[0]):
        members = np.flatnonzero(comp == i)
        if len(members) == 0:
            continue
        row = plan[i]
        if row.sum() <= 0:
            raise DomainError(f"component {i} holds robots but carries no transport mass")
        if mode == "quota":
            dest[members] = np.repeat(np.arange(len(row)), largest_remainder(len(members), row))
        else:
            dest[members] = gen.choice(len(row), size=len(members), p=row / row.sum())
    return dest


def density_targets(
    positions,
    gmm_now: Gmm,
    gmm_next: Gmm,
    plan,
    seed: int,
    mode: Literal["stochastic", "quota"] = "stochastic",
) -> tuple[np.ndarray, int]:
    """
    Map every robot through the optimal affine transport between its current
    component and a destination component drawn from the plan row.

    Returns:
        ((N, 2) targets, number of Mahalanobis fallbacks)
    """
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    p = np.asarray(plan, dtype=float)
    if len(pts) == 0:
        raise DomainError("density control needs at least one robot")
    if p.shape != (len(gmm_now), len(gmm_next)):
        raise DomainError(f"plan shape {p.shape} does not match ({len(gmm_now)}, {len(gmm_next)})")
    comp, fallbacks = current_components(pts, gmm_now)
    dest = _destinations(comp, p, seed, mode)
    targets = np.empty_like(pts)
    maps = {}
    for k, (i, j) in enumerate(zip(comp, dest)):
        if (i, j) not in maps:
            maps[(i, j)] = ot_map(gmm_now.components[i], gmm_next.components[j])
        targets[k] = maps[(i, j)].apply(pts[k][None])[0]
    return targets, fallbacks


def assign_targets(positions, targets) -> Assignment:
    """Exact minimum total squared travel distance matching of robots to targets."""
    pts = np.atleast_2d(np.asarray(positions, dtype=float))
    tgt = np.atleast_2d(np.asarray(targets, dtype=float))
    if len(pts) != len(tgt):
        raise DomainError(f"{len(pts)} robots but {len(tgt)} targets")
    cost = cdist(pts, tgt, "sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    mapping = np.empty(len(pts), dtype=int)
    mapping[rows] = cols
    return Assignment(mapping=[int(c) for c in mapping], objective=float(cost[rows, cols].sum()))
