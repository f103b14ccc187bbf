# app/services/gaussian.py
"""
2D Gaussian algebra on the [x, y, sigma_x, sigma_y, rho] parameterization.

Array forms take (..., 5) state arrays and (..., 2, 2) covariances; the
GaussianState forms wrap them.
"""
import logging
import math

import numpy as np
from scipy.special import logsumexp

from app.errors import ConditioningError, DomainError, NumericDomainError
from app.schemas.gaussian import AffineMap, GaussianState, Gmm
from app.services.seeding import rng

logger = logging.getLogger(__name__)

# Diagonal jitter added to an EM covariance whose smallest eigenvalue drops below it (m^2)
EM_JITTER = 1e-6
MAX_CONDITION = 1e8
SYMMETRY_TOL = 1e-9


def covariance(states) -> np.ndarray:
    s = np.asarray(states, dtype=float)
    sx, sy, rho = s[..., 2], s[..., 3], s[..., 4]
    c = rho * sx * sy
    return np.stack([np.stack([sx * sx, c], -1), np.stack([c, sy * sy], -1)], -2)


def states_from_moments(means, covs) -> np.ndarray:
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    sx = np.sqrt(covs[..., 0, 0])
    sy = np.sqrt(covs[..., 1, 1])
    rho = 0.5 * (covs[..., 0, 1] + covs[..., 1, 0]) / (sx * sy)
    return np.stack([means[..., 0], means[..., 1], sx, sy, rho], axis=-1)


def _det(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def _trace(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] + m[..., 1, 1]


def spd_sqrt_batch(m) -> np.ndarray:
    """Closed-form principal square root of (..., 2, 2) SPD matrices, no checks."""
    m = np.asarray(m, dtype=float)
    s = np.sqrt(np.maximum(_det(m), 0.0))
    t = np.sqrt(_trace(m) + 2.0 * s)
    eye = np.eye(2)
    return (m + s[..., None, None] * eye) / t[..., None, None]


def spd_sqrt(m) -> np.ndarray:
    """
    Principal square root of a 2x2 SPD matrix.

    S = (M + sqrt(det M) I) / sqrt(tr M + 2 sqrt(det M))

    Raises:
        NumericDomainError: if M is not symmetric or not positive definite
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise NumericDomainError(f"expected a 2x2 matrix, got shape {m.shape}")
    if abs(m[0, 1] - m[1, 0]) > SYMMETRY_TOL:
        raise NumericDomainError(f"matrix is not symmetric (off-diagonal gap {abs(m[0, 1] - m[1, 0]):.3e})")
    lam_min = float(np.linalg.eigvalsh(0.5 * (m + m.T))[0])
    if lam_min <= 0.0:
        raise NumericDomainError("matrix is not positive definite", smallest_eigenvalue=lam_min)
    return spd_sqrt_batch(0.5 * (m + m.T))


def wasserstein2_sq_batch(s1, s2) -> np.ndarray:
    """Squared W2 between (..., 5) state arrays (broadcasting)."""
    s1 = np.asarray(s1, dtype=float)
    s2 = np.asarray(s2, dtype=float)
    c1, c2 = covariance(s1), covariance(s2)
    dmu = s1[..., :2] - s2[..., :2]
    cross = np.einsum("...ij,...ji->...", c1, c2) + 2.0 * np.sqrt(np.maximum(_det(c1) * _det(c2), 0.0))
    w2 = np.sum(dmu * dmu, axis=-1) + _trace(c1 + c2) - 2.0 * np.sqrt(np.maximum(cross, 0.0))
    w2 = np.maximum(w2, 0.0)
    return np.where(np.all(s1 == s2, axis=-1), 0.0, w2)


def wasserstein2_batch(s1, s2) -> np.ndarray:
    return np.sqrt(wasserstein2_sq_batch(s1, s2))


def wasserstein2(g1: GaussianState, g2: GaussianState) -> float:
    """Closed-form Wasserstein-2 distance between two Gaussian states."""
    return float(wasserstein2_batch(g1.to_array(), g2.to_array()))


def ot_map(g1: GaussianState, g2: GaussianState) -> AffineMap:
    """
    Optimal transport map from g1 to g2.

    Raises:
        ConditioningError: when cond(Sigma_1) > 1e8
    """
    c1, c2 = g1.covariance, g2.covariance
    eig = np.linalg.eigvalsh(c1)
    if eig[0] <= 0 or eig[-1] / eig[0] > MAX_CONDITION:
        raise ConditioningError(
            f"source covariance condition number {eig[-1] / max(eig[0], 1e-300):.3e} exceeds {MAX_CONDITION:.0e}",
            smallest_eigenvalue=float(eig[0]),
        )
    r1 = spd_sqrt_batch(c1)
    r1_inv = np.linalg.inv(r1)
    mid = spd_sqrt_batch(r1 @ c2 @ r1)
    a = r1_inv @ mid @ r1_inv
    a = 0.5 * (a + a.T)
    b = g2.mean - a @ g1.mean
    return AffineMap(A=a, b=b)


def merge_moments(weights, states) -> tuple[float, np.ndarray]:
    """Moment-matched single Gaussian of a weighted group; returns (total weight, state)."""
    w = np.asarray(weights, dtype=float)
    s = np.asarray(states, dtype=float)
    total = float(w.sum())
    mu = (w[:, None] * s[:, :2]).sum(axis=0) / total
    d = s[:, :2] - mu
    cov = (w[:, None, None] * (covariance(s) + d[:, :, None] * d[:, None, :])).sum(axis=0) / total
    return total, states_from_moments(mu, cov)


def merge_groups(states, threshold: float) -> list[list[int]]:
    """
    Greedy W2 grouping: components are scanned in order and each joins the
    first earlier group whose seed component lies within the threshold.
    threshold = 0 puts every component in its own group.
    """
    s = np.asarray(states, dtype=float)
    if threshold <= 0:
        return [[i] for i in range(len(s))]
    groups: list[list[int]] = []
    for i in range(len(s)):
        for group in groups:
            if wasserstein2_batch(s[group[0]], s[i]) < threshold:
                group.append(i)
                break
        else:
            groups.append([i])
    return groups


def merge_components(weights, states, threshold: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Merge components closer than `threshold` in W2 by moment matching.

    Returns:
        (weights (M,), states (M, 5)) with weights renormalized to sum 1
    """
    w = np.asarray(weights, dtype=float)
    s = np.asarray(states, dtype=float)
    out_w, out_s = [], []
    for group in merge_groups(s, threshold):
        if len(group) == 1:
            out_w.append(w[group[0]])
            out_s.append(s[group[0]])
        else:
            total, state = merge_moments(w[group], s[group])
            out_w.append(total)
            out_s.append(state)
    out_w = np.array(out_w)
    return out_w / out_w.sum(), np.array(out_s)


def gmm_from_arrays(weights, states) -> Gmm:
    w = np.asarray(weights, dtype=float)
    w = w / w.sum()
    return Gmm(weights=[float(v) for v in w], components=[GaussianState.from_array(s) for s in states])


def component_log_likelihoods(points, means, covs) -> np.ndarray:
    """log N(x_n | mu_k, Sigma_k) as an (N, K) array."""
    pts = np.asarray(points, dtype=float)
    means = np.asarray(means, dtype=float)
    covs = np.asarray(covs, dtype=float)
    d = pts[:, None, :] - means[None, :, :]
    inv = np.linalg.inv(covs)
    maha = np.einsum("nki,kij,nkj->nk", d, inv, d)
    return -0.5 * maha - 0.5 * np.log(_det(covs))[None, :] - math.log(2 * math.pi)


def mahalanobis_sq(points, gmm: Gmm) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    d = pts[:, None, :] - gmm.means[None]
    return np.einsum("nki,kij,nkj->nk", d, np.linalg.inv(gmm.covariances), d)


def responsibilities(points, gmm: Gmm) -> np.ndarray:
    """Posterior component probabilities, (N, K); rows of zeros where every density underflows."""
    ll = component_log_likelihoods(points, gmm.means, gmm.covariances)
    with np.errstate(divide="ignore"):
        ll = ll + np.log(np.asarray(gmm.weights))[None, :]
    norm = logsumexp(ll, axis=1, keepdims=True)
    resp = np.exp(ll - norm)
    resp[~np.isfinite(norm[:, 0])] = 0.0
    return resp


def _kmeans_pp(points: np.ndarray, k: int, gen: np.random.Generator) -> np.ndarray:
    n = len(points)
    centers = [points[int(gen.integers(n))]]
    for _ in range(1, k):
        d2 = np.min(((points[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        probs = d2 / total if total > 0 else np.full(n, 1.0 / n)
        centers.append(points[int(gen.choice(n, p=probs))])
    return np.array(centers)


def _floor_covariances(covs: np.ndarray) -> tuple[np.ndarray, int]:
    covs = 0.5 * (covs + np.swapaxes(covs, -1, -2))
    lam_min = np.linalg.eigvalsh(covs)[..., 0]
    low = lam_min < EM_JITTER
    covs = covs + np.where(low, EM_JITTER, 0.0)[:, None, None] * np.eye(2)
    return covs, int(low.sum())


def run_em(
    points, k: int, seed: int, max_iter: int = 100, tol: float = 1e-8
) -> tuple[Gmm, list[float]]:
    """
    Expectation-Maximization for a k-component 2D mixture.

    Initialization is k-means++ driven by the seed, followed by hard
    assignment moments. Covariances whose smallest eigenvalue falls below
    EM_JITTER receive EM_JITTER on the diagonal.

    Returns:
        (mixture, per-iteration mean log-likelihood history)
    """
    pts = np.asarray(points, dtype=float)
    if k < 1 or pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2 * k:
        raise DomainError(f"EM needs k >= 1 and at least 2k points, got k={k} and {len(pts)} points")
    gen = rng(seed, "em", k)
    n = len(pts)

    centers = _kmeans_pp(pts, k, gen)
    labels = np.argmin(((pts[:, None, :] - centers[None]) ** 2).sum(-1), axis=1)
    resp = np.zeros((n, k))
    resp[np.arange(n), labels] = 1.0

    history: list[float] = []
    jittered = 0
    means = covs = weights = None
    for it in range(max_iter):
        # M-step
        nk = np.maximum(resp.sum(axis=0), 1e-12)
        weights = nk / n
        means = (resp.T @ pts) / nk[:, None]
        d = pts[:, None, :] - means[None]
        covs = np.einsum("nk,nki,nkj->kij", resp, d, d) / nk[:, None, None]
        covs, low = _floor_covariances(covs)
        jittered += low
        # E-step
        ll = component_log_likelihoods(pts, means, covs) + np.log(weights)[None, :]
        norm = logsumexp(ll, axis=1, keepdims=True)
        resp = np.exp(ll - norm)
        history.append(float(norm.mean()))
        if it > 0 and abs(history[-1] - history[-2]) < tol:
            break
    if jittered:
        logger.debug("em jitter applied count=%d k=%d", jittered, k)
    gmm = gmm_from_arrays(weights, states_from_moments(means, covs))
    return gmm, history


def fit_gmm_em(points, k: int, seed: int, max_iter: int = 100, tol: float = 1e-8) -> Gmm:
    return run_em(points, k, seed, max_iter=max_iter, tol=tol)[0]


def sample_gmm(gmm: Gmm, n: int, seed: int) -> np.ndarray:
    """
    Draw n points: a component per the weights, then mu + L z with L the
    Cholesky factor of the component covariance.

    Returns:
        (n, 2) array
    """
    if n < 0:
        raise DomainError(f"sample count must be >= 0, got {n}")
    if n == 0:
        return np.zeros((0, 2))
    gen = rng(seed, "sample_gmm")
    weights = np.asarray(gmm.weights)
    idx = gen.choice(len(weights), size=n, p=weights / weights.sum())
    z = gen.standard_normal((n, 2))
    chol = np.linalg.cholesky(gmm.covariances)
    return gmm.means[idx] + np.einsum("nij,nj->ni", chol[idx], z)
