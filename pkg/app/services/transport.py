# app/services/transport.py
"""
Exact discrete optimal transport by the transportation simplex.

Bases are spanning trees over the bipartite row/column graph, so every
returned plan is a vertex of the transport polytope.
"""
import logging
from collections import deque
from dataclasses import dataclass

import numpy as np

from app.errors import TransportError

logger = logging.getLogger(__name__)

# Reduced costs above -TOL count as nonnegative
TOL = 1e-12
# Plan entries at or below this are reported as zero
ZERO = 1e-12


@dataclass
class TransportSolution:
    plan: np.ndarray
    objective: float
    u: np.ndarray
    v: np.ndarray
    iterations: int = 0

    @property
    def dual_bound(self) -> float:
        return float(self.u @ self.plan.sum(axis=1) + self.v @ self.plan.sum(axis=0))


def _check_inputs(cost, w_start, w_goal) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    c = np.asarray(cost, dtype=float)
    a = np.asarray(w_start, dtype=float)
    b = np.asarray(w_goal, dtype=float)
    if c.ndim != 2 or c.shape != (len(a), len(b)) or c.size == 0:
        raise TransportError(f"cost shape {c.shape} does not match marginals ({len(a)}, {len(b)})")
    if not np.all(np.isfinite(c)) or np.any(c < 0):
        raise TransportError("transport costs must be finite and nonnegative")
    if np.any(a < 0) or np.any(b < 0):
        raise TransportError("marginal weights must be nonnegative")
    if abs(a.sum() - b.sum()) > 1e-9:
        raise TransportError(
            f"marginals are not normalized alike: start sums to {a.sum():.12g}, goal to {b.sum():.12g}"
        )
    return c, a, b


def _north_west_corner(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, set[tuple[int, int]]]:
    """Initial basic solution with exactly n1 + n2 - 1 basic cells (some possibly zero)."""
    n1, n2 = len(a), len(b)
    x = np.zeros((n1, n2))
    ra, rb = a.copy(), b.copy()
    basis = set()
    i = j = 0
    while True:
        amount = max(min(ra[i], rb[j]), 0.0)
        x[i, j] = amount
        basis.add((i, j))
        ra[i] -= amount
        rb[j] -= amount
        if i == n1 - 1 and j == n2 - 1:
            break
        if j == n2 - 1 or (i < n1 - 1 and ra[i] <= rb[j]):
            i += 1
        else:
            j += 1
    return x, basis


def _potentials(c: np.ndarray, basis: set[tuple[int, int]]) -> tuple[np.ndarray, np.ndarray]:
    """Solve u_i + v_j = c_ij on the basis tree with u_0 = 0."""
    n1, n2 = c.shape
    u = np.full(n1, np.nan)
    v = np.full(n2, np.nan)
    rows = [[] for _ in range(n1)]
    cols = [[] for _ in range(n2)]
    for i, j in basis:
        rows[i].append(j)
        cols[j].append(i)
    u[0] = 0.0
    queue = deque([("r", 0)])
    while queue:
        side, k = queue.popleft()
        if side == "r":
            for j in rows[k]:
                if np.isnan(v[j]):
                    v[j] = c[k, j] - u[k]
                    queue.append(("c", j))
        else:
            for i in cols[k]:
                if np.isnan(u[i]):
                    u[i] = c[i, k] - v[k]
                    queue.append(("r", i))
    if np.any(np.isnan(u)) or np.any(np.isnan(v)):
        raise TransportError("transport basis is not a spanning tree")
    return u, v


def _cycle(basis: set[tuple[int, int]], enter: tuple[int, int], n1: int, n2: int) -> list[tuple[int, int]]:
    """
    Cells of the pivot cycle, starting with the entering cell; signs alternate +, -, +, ...
    """
    # Nodes 0..n1-1 are rows, n1..n1+n2-1 are columns
    adj = [[] for _ in range(n1 + n2)]
    for i, j in basis:
        adj[i].append(n1 + j)
        adj[n1 + j].append(i)
    ei, ej = enter
    source, target = n1 + ej, ei
    parent = {source: None}
    queue = deque([source])
    while queue:
        node = queue.popleft()
        if node == target:
            break
        for nxt in adj[node]:
            if nxt not in parent:
                parent[nxt] = node
                queue.append(nxt)
    path = [target]
    while parent[path[-1]] is not None:
        path.append(parent[path[-1]])
    # path runs row ei -> ... -> column ej
    cells = [enter]
    for a, b in zip(path[:-1], path[1:]):
        r, col = (a, b - n1) if a < n1 else (b, a - n1)
        cells.append((r, col))
    return cells


def solve_transport_lp(cost, w_start, w_goal, max_iter: int = 10000) -> TransportSolution:
    """
    Minimize sum(plan * cost) subject to row sums w_start and column sums w_goal.

    Entering cells follow the most-negative reduced cost; after a run of
    degenerate pivots the rule switches to smallest-index (Bland) selection.

    Returns:
        The vertex plan with at most N1 + N2 - 1 positive entries, its
        objective, and the dual potentials u, v

    Raises:
        TransportError: on mismatched marginal sums or malformed input
    """
    c, a, b = _check_inputs(cost, w_start, w_goal)
    n1, n2 = c.shape
    x, basis = _north_west_corner(a, b)
    degenerate_run = 0
    bland = False
    iterations = 0
    while True:
        u, v = _potentials(c, basis)
        reduced = c - u[:, None] - v[None, :]
        for cell in basis:
            reduced[cell] = 0.0
        negative = reduced < -TOL
        if not negative.any():
            break
        if iterations >= max_iter:
            raise TransportError(f"transportation simplex did not converge in {max_iter} pivots")
        if bland:
            enter = tuple(int(k) for k in np.argwhere(negative)[0])
        else:
            enter = tuple(int(k) for k in np.unravel_index(np.argmin(reduced), reduced.shape))
        cells = _cycle(basis, enter, n1, n2)
        minus = cells[1::2]
        theta = min(x[cell] for cell in minus)
        # Smallest-index tie break among the blocking cells
        leave = min(cell for cell in minus if x[cell] == theta)
        for cell in cells[0::2]:
            x[cell] += theta
        for cell in minus:
            x[cell] -= theta
        x[leave] = 0.0
        basis.remove(leave)
        basis.add(enter)
        iterations += 1
        degenerate_run = degenerate_run + 1 if theta == 0.0 else 0
        if degenerate_run > n1 * n2 and not bland:
            logger.debug("transport switching to smallest-index pivoting after %d degenerate pivots", degenerate_run)
            bland = True

    x[x <= ZERO] = 0.0
    objective = float(np.sum(x * c))
    logger.debug("transport solved n1=%d n2=%d pivots=%d objective=%.6g", n1, n2, iterations, objective)
    return TransportSolution(plan=x, objective=objective, u=u, v=v, iterations=iterations)
