"""Closed convex sets: projection, distance and normal-cone generators."""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .minnorm import distance_to_cone

__all__ = [
    "ConvexSet", "Box", "Polyhedron", "Ball", "WholeSpace", "NormalConeRep",
    "project", "distance", "normal_cone", "estimate_distance_subgradients",
    "distance_subdiff_estimate_check", "set_from_dict", "InfeasiblePointError",
    "DEFAULT_ACTIVE_TOL",
]

DEFAULT_ACTIVE_TOL = 1e-8


class InfeasiblePointError(ValueError):
    """Raised when a point is required to lie in a set and does not."""


@dataclass
class NormalConeRep:
    """Nonnegative hull of ``rays``; no rays means the cone is ``{0}``."""

    rays: np.ndarray

    @property
    def is_trivial(self):
        return len(self.rays) == 0

    def distance(self, v):
        if self.is_trivial:
            return float(np.linalg.norm(v))
        return distance_to_cone(v, self.rays)[0]

    def contains(self, v, tol=1e-8):
        return self.distance(v) <= tol


def _unit_rows(V):
    V = np.atleast_2d(np.asarray(V, dtype=float))
    norms = np.linalg.norm(V, axis=1)
    return V[norms > 0] / norms[norms > 0, None]


class ConvexSet:
    kind = "abstract"
    n = None

    def project(self, x):
        raise NotImplementedError

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.project(x)))

    def contains(self, x, tol=1e-12):
        return self.distance(x) <= tol

    def normal_cone(self, x, active_tol=DEFAULT_ACTIVE_TOL):
        raise NotImplementedError

    def bounding_box(self):
        """``(lower, upper)``, possibly infinite."""
        raise NotImplementedError

    def sample(self, size, rng):
        """Points of the set: uniform draws in the bounding box, projected."""
        lo, hi = self.bounding_box()
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("sampling needs a bounded set")
        pts = rng.uniform(lo, hi, size=(size, self.n))
        return np.array([self.project(p) for p in pts])

    def _check_member(self, x, active_tol):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.size != self.n:
            raise ValueError(f"point has dimension {x.size}, set has {self.n}")
        d = self.distance(x)
        if d > active_tol:
            raise InfeasiblePointError(f"point lies at distance {d:.3g} from the set")
        return x


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("bounds must have equal shapes")
        if np.any(self.lower > self.upper):
            raise ValueError("lower must not exceed upper")
        self.n = self.lower.size

    def project(self, x):
        return np.clip(np.atleast_1d(np.asarray(x, dtype=float)), self.lower, self.upper)

    def normal_cone(self, x, active_tol=DEFAULT_ACTIVE_TOL):
        x = self._check_member(x, active_tol)
        rays = []
        for i in range(self.n):
            if x[i] >= self.upper[i] - active_tol:
                e = np.zeros(self.n)
                e[i] = 1.0
                rays.append(e)
            if x[i] <= self.lower[i] + active_tol:
                e = np.zeros(self.n)
                e[i] = -1.0
                rays.append(e)
        return NormalConeRep(np.array(rays).reshape(-1, self.n))

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def to_dict(self):
        return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.radius = float(radius)
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        self.n = self.center.size

    def project(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = x - self.center
        r = np.linalg.norm(d)
        if r <= self.radius:
            return x.copy()
        return self.center + d * (self.radius / r)

    def normal_cone(self, x, active_tol=DEFAULT_ACTIVE_TOL):
        x = self._check_member(x, active_tol)
        d = x - self.center
        if np.linalg.norm(d) >= self.radius - active_tol:
            return NormalConeRep(_unit_rows(d[None, :]))
        return NormalConeRep(np.zeros((0, self.n)))

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def to_dict(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}

    def __repr__(self):
        return f"Ball({self.center.tolist()}, {self.radius})"


class WholeSpace(ConvexSet):
    kind = "whole"

    def __init__(self, n):
        self.n = int(n)

    def project(self, x):
        return np.atleast_1d(np.asarray(x, dtype=float)).copy()

    def normal_cone(self, x, active_tol=DEFAULT_ACTIVE_TOL):
        self._check_member(x, active_tol)
        return NormalConeRep(np.zeros((0, self.n)))

    def bounding_box(self):
        return np.full(self.n, -np.inf), np.full(self.n, np.inf)

    def to_dict(self):
        return {"kind": "whole", "n": self.n}

    def __repr__(self):
        return f"WholeSpace({self.n})"


class Polyhedron(ConvexSet):
    """``{y : A y <= b}``; nonemptiness is certified by an LP at construction."""

    kind = "polyhedron"

    def __init__(self, A, b):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.b = np.atleast_1d(np.asarray(b, dtype=float))
        if self.A.shape[0] != self.b.size:
            raise ValueError("A and b disagree on the number of constraints")
        self.n = self.A.shape[1]
        self._row_norms = np.linalg.norm(self.A, axis=1)
        if np.any(self._row_norms == 0):
            raise ValueError("zero constraint row")
        res = linprog(np.zeros(self.n), A_ub=self.A, b_ub=self.b,
                      bounds=[(None, None)] * self.n, method="highs")
        if res.status != 0:
            raise ValueError("polyhedron is empty")
        self._feasible = self._polish_feasible(res.x)
        self._bbox = None

    def _polish_feasible(self, y):
        viol = self.A @ y - self.b
        if np.all(viol <= 0):
            return y
        # pull the LP vertex slightly inside using a Chebyshev-center LP
        c = np.zeros(self.n + 1)
        c[-1] = -1.0
        A = np.hstack([self.A, self._row_norms[:, None]])
        res = linprog(c, A_ub=A, b_ub=self.b, bounds=[(None, None)] * self.n + [(0, 1)],
                      method="highs")
        return res.x[:-1]

    def _violations(self, y):
        return (self.A @ y - self.b) / self._row_norms

    def project(self, x, tol=1e-12, max_iter=None):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if np.all(self._violations(x) <= 0):
            return x.copy()
        return _polyhedron_project(self.A, self.b, x, self._feasible, tol, max_iter)

    def normal_cone(self, x, active_tol=DEFAULT_ACTIVE_TOL):
        x = self._check_member(x, active_tol)
        act = self._violations(x) >= -active_tol
        return NormalConeRep(_unit_rows(self.A[act]).reshape(-1, self.n))

    def bounding_box(self):
        if self._bbox is None:
            lo, hi = np.empty(self.n), np.empty(self.n)
            for i in range(self.n):
                for sign, out in ((1.0, lo), (-1.0, hi)):
                    c = np.zeros(self.n)
                    c[i] = sign
                    res = linprog(c, A_ub=self.A, b_ub=self.b,
                                  bounds=[(None, None)] * self.n, method="highs")
                    out[i] = res.x[i] if res.status == 0 else -sign * np.inf
            self._bbox = (lo, hi)
        return self._bbox[0].copy(), self._bbox[1].copy()

    def to_dict(self):
        return {"kind": "polyhedron", "A": self.A.tolist(), "b": self.b.tolist()}

    def __repr__(self):
        return f"Polyhedron(A={self.A.tolist()}, b={self.b.tolist()})"


def _polyhedron_project(A, b, x, y0, tol=1e-12, max_iter=None):
    """Primal active-set QP for ``min 0.5||y - x||^2  s.t.  A y <= b``."""
    p, n = A.shape
    if max_iter is None:
        max_iter = 20 * (p + n) + 50
    y = y0.astype(float).copy()
    scale = max(1.0, float(np.max(np.abs(b))), float(np.max(np.abs(x))))
    slack = b - A @ y
    W = []
    for i in np.flatnonzero(slack <= tol * scale):
        cand = W + [i]
        if np.linalg.matrix_rank(A[cand]) == len(cand):
            W = cand
    for _ in range(max_iter):
        g = y - x
        if W:
            AW = A[W]
            nu = np.linalg.lstsq(AW.T, g, rcond=None)[0]
            step = -(g - AW.T @ nu)
        else:
            nu = np.zeros(0)
            step = -g
        if np.linalg.norm(step) <= tol * scale:
            lam = -nu
            if not W or lam.min() >= -tol * scale:
                break
            W.pop(int(np.argmin(lam)))
            continue
        Ap = A @ step
        alpha, block = 1.0, None
        for i in range(p):
            if i in W or Ap[i] <= tol * np.linalg.norm(A[i]) * np.linalg.norm(step):
                continue
            a_i = max(0.0, (b[i] - A[i] @ y)) / Ap[i]
            if a_i < alpha:
                alpha, block = a_i, i
        y = y + alpha * step
        if block is not None:
            W.append(block)
    return _polish_projection(A, b, x, y, W, tol * scale)


def _polish_projection(A, b, x, y, W, tol):
    # recompute y = x - A_W^T nu from the final working set; drift-free
    if not W:
        return y
    AW = A[W]
    nu = np.linalg.lstsq(AW @ AW.T, AW @ x - b[W], rcond=None)[0]
    z = x - AW.T @ nu
    if np.all(nu >= -tol) and np.all(A @ z - b <= tol):
        return z
    return y


def set_from_dict(d):
    kind = d.get("kind")
    if kind == "box":
        return Box(d["lower"], d["upper"])
    if kind == "ball":
        return Ball(d["center"], d["radius"])
    if kind == "polyhedron":
        return Polyhedron(d["A"], d["b"])
    if kind == "whole":
        return WholeSpace(d["n"])
    raise ValueError(f"unknown set kind {kind!r}")


def project(S, x):
    return S.project(x)


def distance(S, x):
    return S.distance(x)


def normal_cone(S, x, active_tol=DEFAULT_ACTIVE_TOL):
    return S.normal_cone(x, active_tol)


def estimate_distance_subgradients(S, x, samples=64, seed=0, radius=1e-5):
    """Approximate elements of the limiting subdifferential of ``d_S`` at ``x``.

    Along random rays ``x + t d`` the gradient of the distance function is
    ``(y - P(y)) / d(y)`` off the set and zero at interior points. Each
    sampled limit extrapolates the gradients at ``t`` and ``2t`` linearly
    to ``t = 0``, with ``t`` drawn from ``[radius/2, radius]``. Rays whose
    two offsets fall in different regimes (on and off the set, or next to
    different faces) are skipped.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    rng = np.random.default_rng(seed)

    def grad(y, t):
        py = S.project(y)
        d = np.linalg.norm(y - py)
        if d > t * 1e-6:
            return (y - py) / d
        if d == 0.0:
            return np.zeros(x.size)
        return None

    out = []
    for _ in range(samples):
        u = rng.normal(size=x.size)
        u /= np.linalg.norm(u)
        t = radius * rng.uniform(0.5, 1.0)
        g1, g2 = grad(x + t * u, t), grad(x + 2 * t * u, 2 * t)
        if g1 is None or g2 is None:
            continue
        z1, z2 = not g1.any(), not g2.any()
        if z1 != z2 or np.linalg.norm(g1 - g2) > 1e-3:
            continue
        g = g1 if z1 else 2.0 * g1 - g2
        norm = np.linalg.norm(g)
        out.append(g / norm if norm > 1.0 else g)
    return np.array(out).reshape(-1, x.size)


def distance_subdiff_estimate_check(S, x, samples=64, seed=0, tol=1e-6):
    """Confirm sampled limiting subgradients of ``d_S`` lie in ``B[0,1] ∩ N(x;S)``."""
    x = S._check_member(x, DEFAULT_ACTIVE_TOL)
    est = estimate_distance_subgradients(S, x, samples, seed)
    cone = S.normal_cone(x)
    for u in est:
        if np.linalg.norm(u) > 1.0 + tol:
            return False
        if cone.distance(u) > tol:
            return False
    return True
