"""Minimum-norm point of ``conv(P) + cone(R)``.

Every criticality and Fritz-John decision in the package reduces to this
problem::

    minimize   || P^T lam + R^T mu ||
    subject to lam >= 0, sum(lam) = 1, mu >= 0

The solver is Wolfe's active-set algorithm extended with cone rays: a
corral of points and rays is maintained, the affine (signless) problem is
solved on the corral by least squares, and the line search back into the
nonnegative orthant drops members whose weight hits zero.
"""

from dataclasses import dataclass

import numpy as np

__all__ = ["MinNormResult", "min_norm_point", "distance_to_cone"]


@dataclass
class MinNormResult:
    point: np.ndarray
    lam: np.ndarray
    mu: np.ndarray
    norm: float
    iterations: int
    converged: bool


def _affine_minimizer(P, R):
    # argmin || p0 + sum_i a_i (p_i - p0) + sum_j b_j r_j ||, weights on P sum to 1
    p0 = P[0]
    cols = [p - p0 for p in P[1:]] + list(R)
    if not cols:
        return np.ones(1), np.zeros(0)
    A = np.stack(cols, axis=1)
    t = np.linalg.lstsq(A, -p0, rcond=None)[0]
    k = len(P) - 1
    a = np.concatenate([[1.0 - t[:k].sum()], t[:k]])
    return a, t[k:]


def min_norm_point(points, rays=None, tol=1e-12, max_iter=None):
    """Closest point to the origin of ``conv(points) + cone(rays)``.

    Parameters
    ----------
    points : array-like, shape (k, n)
        Polytope generators, ``k >= 1``.
    rays : array-like, shape (r, n), optional
        Cone generators.
    tol : float
        Relative optimality tolerance on the Wolfe gap.
    max_iter : int, optional
        Total budget of major plus minor cycles.

    Returns
    -------
    MinNormResult
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    if P.shape[0] == 0:
        raise ValueError("at least one polytope generator is required")
    n = P.shape[1]
    R = np.zeros((0, n)) if rays is None else np.asarray(rays, dtype=float).reshape(-1, n)
    # zero rays contribute nothing and break the affine solve
    ray_norms = np.linalg.norm(R, axis=1)
    keep_rays = np.flatnonzero(ray_norms > 0)
    R_used = R[keep_rays]
    k, r = P.shape[0], R_used.shape[0]
    if max_iter is None:
        max_iter = 50 * (k + r + n) + 100

    scale = max(1.0, float(np.max(np.linalg.norm(P, axis=1))))
    start = int(np.argmin(np.linalg.norm(P, axis=1)))
    S_pts = [start]
    S_rays = []
    lam_S = np.ones(1)
    mu_S = np.zeros(0)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        z = lam_S @ P[S_pts] + (mu_S @ R_used[S_rays] if S_rays else 0.0)
        zz = float(z @ z)
        gaps_p = zz - P @ z
        j = int(np.argmax(gaps_p))
        gap_p = gaps_p[j]
        gap_r, jr = -np.inf, -1
        if r:
            gaps_r = -(R_used @ z) / np.linalg.norm(R_used, axis=1)
            jr = int(np.argmax(gaps_r))
            gap_r = gaps_r[jr]
        thresh = tol * scale * scale
        if gap_p <= thresh and gap_r <= tol * scale:
            converged = True
            break
        if gap_r / scale > gap_p / (scale * scale) and gap_r > tol * scale:
            if jr in S_rays:
                converged = True
                break
            S_rays.append(jr)
            mu_S = np.append(mu_S, 0.0)
        else:
            if j in S_pts:
                converged = True
                break
            S_pts.append(j)
            lam_S = np.append(lam_S, 0.0)

        # minor cycles
        while it < max_iter:
            it += 1
            a, b = _affine_minimizer(P[S_pts], R_used[S_rays])
            if np.all(a > tol) and np.all(b > tol):
                lam_S, mu_S = a, b
                break
            old = np.concatenate([lam_S, mu_S])
            new = np.concatenate([a, b])
            neg = new <= tol
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(neg & (old - new > 0), old / (old - new), np.inf)
            theta = float(min(1.0, ratios.min()))
            w = old + theta * (new - old)
            w[np.abs(w) <= tol] = 0.0
            w = np.maximum(w, 0.0)
            kp = len(S_pts)
            keep_p = w[:kp] > 0
            keep_r = w[kp:] > 0
            if not keep_p.any():
                # numerical breakdown; restart the corral at the best point
                keep_p[int(np.argmax(w[:kp]))] = True
                w[:kp][keep_p] = 1.0
            S_pts = [s for s, kk in zip(S_pts, keep_p) if kk]
            S_rays = [s for s, kk in zip(S_rays, keep_r) if kk]
            lam_S = w[:kp][keep_p]
            lam_S = lam_S / lam_S.sum()
            mu_S = w[kp:][keep_r]

    lam = np.zeros(k)
    lam[S_pts] = lam_S
    lam /= lam.sum()
    mu = np.zeros(R.shape[0])
    if S_rays:
        mu[keep_rays[S_rays]] = mu_S
    point = lam @ P + (mu @ R if R.shape[0] else 0.0)
    return MinNormResult(point=point, lam=lam, mu=mu, norm=float(np.linalg.norm(point)),
                         iterations=it, converged=converged)


def distance_to_cone(v, rays, tol=1e-12):
    """Distance from ``v`` to ``cone(rays)``; returns ``(distance, mu)``."""
    v = np.asarray(v, dtype=float)
    rays = np.asarray(rays, dtype=float).reshape(-1, v.size)
    res = min_norm_point(v[None, :], -rays, tol=tol)
    return res.norm, res.mu
