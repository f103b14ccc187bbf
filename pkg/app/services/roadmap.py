# app/services/roadmap.py
"""Probabilistic roadmap over Gaussian states with CVaR-feasible edges."""
import logging
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from app.config import SigmaBounds
from app.errors import InfeasibleEndpointError, NoPathError, SamplingError
from app.schemas.esdf import EsdfGrid
from app.schemas.gaussian import GaussianState
from app.schemas.geometry import Box, Workspace
from app.schemas.trajectory import GaussianRoadmap, GaussianTrajectory
from app.services.costs import cvar_values
from app.services.esdf import query_sdf_batch
from app.services.gaussian import wasserstein2_batch
from app.services.seeding import rng

logger = logging.getLogger(__name__)

# Candidates drawn per rejection-sampling round
_BLOCK = 256


def sample_nodes(
    ws: Workspace,
    grid: EsdfGrid,
    bounds: SigmaBounds,
    count: int,
    seed: int,
    *,
    alpha: float,
    epsilon: float,
    region: Optional[Box] = None,
    max_retries: int = 10000,
    scene: str = "scene",
) -> np.ndarray:
    """
    Rejection-sample `count` risk-feasible node states, (count, 5).

    Means are uniform over the workspace (or `region`) and kept where the
    SDF is positive; shapes are uniform in the bounds; a node is accepted
    when its CVaR is at most epsilon.

    Raises:
        SamplingError: when max_retries candidates (at least `count`) yield too few nodes
    """
    gen = rng(seed, "nodes")
    x0, y0, x1, y1 = region if region is not None else (0.0, 0.0, ws.width, ws.height)
    budget = max(max_retries, count)
    accepted: list[np.ndarray] = []
    have, tried = 0, 0
    while have < count:
        if tried >= budget:
            raise SamplingError(
                f"node sampling in {scene} accepted {have} of {count} nodes after {tried} candidates"
            )
        cand = np.column_stack([
            gen.uniform(x0, x1, _BLOCK),
            gen.uniform(y0, y1, _BLOCK),
            gen.uniform(bounds.sigma_min, bounds.sigma_max, _BLOCK),
            gen.uniform(bounds.sigma_min, bounds.sigma_max, _BLOCK),
            gen.uniform(-bounds.rho_max, bounds.rho_max, _BLOCK),
        ])
        free = query_sdf_batch(grid, cand[:, :2])[0] > 0.0
        cvar = cvar_values(cand, grid, alpha)[0]
        ok = free & (cvar <= epsilon)
        # Candidate order is preserved so the first accepted node is the same for any count
        ok_idx = np.flatnonzero(ok)
        if tried + _BLOCK > budget:
            ok_idx = ok_idx[ok_idx < budget - tried]
        take = cand[ok_idx][: count - have]
        accepted.append(take)
        have += len(take)
        tried += _BLOCK
    return np.concatenate(accepted)[:count]


def sample_gaussian_node(
    ws: Workspace,
    grid: EsdfGrid,
    bounds: SigmaBounds,
    seed: int,
    *,
    alpha: float = 0.1,
    epsilon: float = 0.0,
    region: Optional[Box] = None,
    max_retries: int = 10000,
    scene: str = "scene",
) -> GaussianState:
    """One risk-feasible node; deterministic per seed."""
    states = sample_nodes(
        ws, grid, bounds, 1, seed, alpha=alpha, epsilon=epsilon, region=region, max_retries=max_retries, scene=scene
    )
    return GaussianState.from_array(states[0])


def _edge_points(a: np.ndarray, b: np.ndarray, resolution: int) -> np.ndarray:
    """States at i / resolution, i = 0..resolution, along each edge; (E, r + 1, 5)."""
    t = np.linspace(0.0, 1.0, resolution + 1)[None, :, None]
    return a[:, None, :] + t * (b - a)[:, None, :]


def edges_feasible(a, b, grid: EsdfGrid, alpha: float, epsilon: float, resolution: int) -> np.ndarray:
    """Vectorized connect_edge over (E, 5) endpoint arrays."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if resolution < 2:
        raise ValueError(f"edge resolution must be >= 2, got {resolution}")
    if len(a) == 0:
        return np.zeros(0, dtype=bool)
    pts = _edge_points(a, b, resolution)
    flat = pts.reshape(-1, 5)
    cvar = cvar_values(flat, grid, alpha)[0].reshape(pts.shape[:2])
    return np.all(cvar <= epsilon, axis=1)


def connect_edge(a, b, grid: EsdfGrid, alpha: float, epsilon: float, resolution: int) -> bool:
    """
    Risk feasibility of the straight 5-vector interpolation a -> b.

    Checks the resolution + 1 states at parameters i / resolution, so a
    doubled resolution checks a superset of states.
    """
    a = a.to_array() if isinstance(a, GaussianState) else np.asarray(a, dtype=float)
    b = b.to_array() if isinstance(b, GaussianState) else np.asarray(b, dtype=float)
    return bool(edges_feasible(a[None], b[None], grid, alpha, epsilon, resolution)[0])


def build_roadmap(
    nodes: np.ndarray,
    start: np.ndarray,
    goal: np.ndarray,
    grid: EsdfGrid,
    k_neighbors: int,
    *,
    alpha: float,
    epsilon: float,
    edge_resolution: int,
) -> GaussianRoadmap:
    """
    k-nearest (by W2) roadmap over the sampled nodes plus the two endpoints,
    keeping only risk-feasible edges. Start and goal are the last two nodes.
    """
    all_nodes = np.vstack([nodes, start[None], goal[None]])
    n = len(all_nodes)
    dist = wasserstein2_batch(all_nodes[:, None, :], all_nodes[None, :, :])
    np.fill_diagonal(dist, np.inf)
    k = min(k_neighbors, n - 1)
    nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
    pairs = {(min(i, j), max(i, j)) for i in range(n) for j in nearest[i]}
    pairs = np.array(sorted(pairs), dtype=int).reshape(-1, 2)
    ok = edges_feasible(all_nodes[pairs[:, 0]], all_nodes[pairs[:, 1]], grid, alpha, epsilon, edge_resolution)
    kept = pairs[ok]
    edges = [(int(i), int(j), float(dist[i, j])) for i, j in kept]
    return GaussianRoadmap(nodes=all_nodes, edges=edges, start_index=n - 2, goal_index=n - 1)


def shortest_path(n: int, edges: list[tuple[int, int, float]], source: int, target: int) -> tuple[list[int], float]:
    """
    Dijkstra over an undirected weighted graph.

    Raises:
        NoPathError: if target is unreachable
    """
    if source == target:
        return [source], 0.0
    if edges:
        i, j, w = (np.array(col) for col in zip(*edges))
        # Zero weights would vanish from the sparse matrix
        graph = csr_matrix((np.maximum(w.astype(float), 1e-300), (i.astype(int), j.astype(int))), shape=(n, n))
    else:
        graph = csr_matrix((n, n))
    dist, pred = dijkstra(graph, directed=False, indices=source, return_predecessors=True)
    if not np.isfinite(dist[target]):
        raise NoPathError(f"roadmap is disconnected: no path from node {source} to node {target}")
    path = [target]
    while path[-1] != source:
        path.append(int(pred[path[-1]]))
    return path[::-1], float(dist[target])


def compress_path(path: np.ndarray, grid: EsdfGrid, alpha: float, epsilon: float, resolution: int) -> np.ndarray:
    """Greedy shortcutting: from each kept state jump to the farthest directly connectable one."""
    out = [path[0]]
    i = 0
    last = len(path) - 1
    while i < last:
        j = last
        while j > i + 1 and not connect_edge(path[i], path[j], grid, alpha, epsilon, resolution):
            j -= 1
        out.append(path[j])
        i = j
    return np.array(out)


def path_length(states) -> float:
    s = np.asarray(states, dtype=float)
    return float(np.sum(wasserstein2_batch(s[:-1], s[1:])))


def resample_path(path, count: int) -> np.ndarray:
    """
    Resample a polyline of states to exactly `count` states.

    Intervals are apportioned to segments in proportion to their W2 length
    (largest remainder, at least one per segment when possible) and spaced
    evenly inside each segment, so every output state lies on the polyline
    and the endpoints are kept exactly.
    """
    p = np.asarray(path, dtype=float)
    keep = [0] + [i for i in range(1, len(p)) if not np.array_equal(p[i], p[i - 1])]
    p = p[keep]
    if len(p) == 1:
        return np.repeat(p, count, axis=0)
    seg = wasserstein2_batch(p[:-1], p[1:])
    m = len(seg)
    intervals = count - 1
    if m <= intervals:
        alloc = np.ones(m, dtype=int)
        spare = intervals - m
    else:
        alloc = np.zeros(m, dtype=int)
        spare = intervals
    total = seg.sum()
    share = seg / total * spare if total > 0 else np.full(m, spare / m)
    base = np.floor(share).astype(int)
    alloc += base
    remainder = spare - int(base.sum())
    if remainder:
        order = np.argsort(-(share - base), kind="stable")[:remainder]
        alloc[order] += 1
    out = [p[0]]
    for s in range(m):
        for step in range(1, alloc[s] + 1):
            out.append(p[s] + (step / alloc[s]) * (p[s + 1] - p[s]))
    out = np.array(out)
    out[-1] = p[-1]
    return out


def plan_roadmap_path(
    ws: Workspace,
    grid: EsdfGrid,
    start: GaussianState,
    goal: GaussianState,
    n_nodes: int,
    k_neighbors: int,
    seed: int,
    *,
    bounds: SigmaBounds,
    alpha: float,
    epsilon: float,
    edge_resolution: int = 10,
    path_nodes: int = 256,
    max_node_retries: int = 10000,
    shortcut: bool = True,
    dt: float = 1.0,
    scene: str = "scene",
) -> GaussianTrajectory:
    """
    Feasible Gaussian-space path from start to goal, resampled to path_nodes states.

    A direct start-goal edge is tried first; otherwise a k-nearest W2
    roadmap is searched with Dijkstra and the result shortcut.

    Raises:
        InfeasibleEndpointError: if start or goal violates the risk bound
        NoPathError: if no feasible path exists or the resampled path fails its recheck
    """
    s, g = start.to_array(), goal.to_array()
    endpoint_cvar = cvar_values(np.stack([s, g]), grid, alpha)[0]
    if np.any(endpoint_cvar > epsilon):
        raise InfeasibleEndpointError(
            f"endpoint CVaR {endpoint_cvar.max():.3f} exceeds epsilon {epsilon} in {scene}"
        )
    if connect_edge(s, g, grid, alpha, epsilon, edge_resolution):
        polyline = np.stack([s, g])
    else:
        nodes = sample_nodes(
            ws, grid, bounds, n_nodes, seed, alpha=alpha, epsilon=epsilon, max_retries=max_node_retries, scene=scene
        )
        roadmap = build_roadmap(
            nodes, s, g, grid, k_neighbors, alpha=alpha, epsilon=epsilon, edge_resolution=edge_resolution
        )
        order, cost = shortest_path(len(roadmap.nodes), roadmap.edges, roadmap.start_index, roadmap.goal_index)
        polyline = roadmap.nodes[order]
        logger.debug("roadmap path scene=%s nodes=%d edges=%d hops=%d cost=%.3f",
                     scene, len(roadmap.nodes), len(roadmap.edges), len(order) - 1, cost)
        if shortcut:
            polyline = compress_path(polyline, grid, alpha, epsilon, edge_resolution)
    states = resample_path(polyline, path_nodes)
    states[0], states[-1] = s, g
    ok = edges_feasible(states[:-1], states[1:], grid, alpha, epsilon, edge_resolution)
    if not np.all(ok):
        raise NoPathError(f"resampled path in {scene} fails the edge recheck at {int(np.argmin(ok))}")
    return GaussianTrajectory(states=states, dt=dt)
