"""Brute-force references for small instances (n <= 3, m <= 4).

These routines avoid the min-norm machinery used by :mod:`criticality` so
they can serve as independent checks: grid enumeration for weak Pareto
sets, random-direction tests of the criticality definition and a
finite-difference reconstruction of 1-D limiting subdifferentials.
"""

import csv
import io
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .convexset import Box
from .funcspace import eval_vector, limiting_subdiff

__all__ = [
    "GridSpec", "GridParetoResult", "grid_weak_pareto", "SampledVerdict",
    "sampled_criticality", "oracle_critical_set", "frechet_limit_subdiff_1d",
    "IntervalSet", "hausdorff_1d", "limiting_as_intervals", "kinks_1d",
    "MAX_POINTS_PER_AXIS", "MAX_GRID_POINTS", "DOMINANCE_MARGIN",
]

MAX_POINTS_PER_AXIS = 201
MAX_GRID_POINTS = 10 ** 6
MAX_ORACLE_DIM = 3
MAX_ORACLE_OBJECTIVES = 4
DOMINANCE_MARGIN = 1e-12


@dataclass
class GridSpec:
    box: Box
    points_per_axis: int = 201

    def __post_init__(self):
        if not isinstance(self.box, Box):
            raise TypeError("GridSpec needs a Box")
        if not 2 <= self.points_per_axis <= MAX_POINTS_PER_AXIS:
            raise ValueError(f"points_per_axis must lie in [2, {MAX_POINTS_PER_AXIS}]")
        if not np.all(np.isfinite(self.box.lower)) or not np.all(np.isfinite(self.box.upper)):
            raise ValueError("grid box must be bounded")
        if self.total > MAX_GRID_POINTS:
            raise ValueError(f"grid has {self.total} points, cap is {MAX_GRID_POINTS}")

    @property
    def n(self):
        return self.box.n

    @property
    def total(self):
        return self.points_per_axis ** self.box.n

    def axes(self):
        return [np.linspace(lo, hi, self.points_per_axis)
                for lo, hi in zip(self.box.lower, self.box.upper)]

    def points(self):
        """All grid points in C order (last coordinate fastest)."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.n)


def _check_small(F):
    if F.n > MAX_ORACLE_DIM:
        raise ValueError(f"oracles support n <= {MAX_ORACLE_DIM}, got {F.n}")
    if F.m > MAX_ORACLE_OBJECTIVES:
        raise ValueError(f"oracles support m <= {MAX_ORACLE_OBJECTIVES}, got {F.m}")


@dataclass
class GridParetoResult:
    points: np.ndarray
    values: np.ndarray
    indices: np.ndarray

    def __len__(self):
        return len(self.points)

    def to_csv(self):
        n, m = self.points.shape[1], self.values.shape[1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index"] + [f"x{j}" for j in range(n)] + [f"F{i}" for i in range(m)])
        for idx, p, v in zip(self.indices, self.points, self.values):
            w.writerow([int(idx)] + [format(float(t), ".17g") for t in np.concatenate([p, v])])
        return buf.getvalue()


def _nondominated(V, margin):
    """Boolean mask of rows of ``V`` not strictly dominated by another row."""
    N, m = V.shape
    if m == 1:
        return ~(V[:, 0].min() < V[:, 0] - margin)
    if m == 2:
        order = np.argsort(V[:, 0], kind="stable")
        f1, f2 = V[order, 0], V[order, 1]
        prefix = np.minimum.accumulate(f2)
        # rows with f1 < f1(x) - margin are exactly the first `cut` in sorted order
        cut = np.searchsorted(f1, f1 - margin, side="left")
        best = np.where(cut > 0, prefix[np.maximum(cut - 1, 0)], np.inf)
        keep_sorted = ~(best < f2 - margin)
        keep = np.empty(N, dtype=bool)
        keep[order] = keep_sorted
        return keep
    keep = np.ones(N, dtype=bool)
    chunk = max(1, int(2e7 // max(N * m, 1)))
    for s in range(0, N, chunk):
        block = V[s:s + chunk]
        dom = np.all(V[None, :, :] < block[:, None, :] - margin, axis=2)
        keep[s:s + chunk] = ~dom.any(axis=1)
    return keep


def grid_weak_pareto(F, grid, feasible_set=None, margin=DOMINANCE_MARGIN):
    """Grid points that no other grid point strictly dominates.

    Parameters
    ----------
    F : VectorFunction
    grid : GridSpec
    feasible_set : ConvexSet, optional
        When given, grid points outside the set are dropped first.
    margin : float
        ``y`` dominates ``x`` when ``F(y) < F(x) - margin`` in every component.

    Returns
    -------
    GridParetoResult
        Points sorted lexicographically, with their flat grid indices.
    """
    _check_small(F)
    if grid.n != F.n:
        raise ValueError("grid and F disagree on dimension")
    P = grid.points()
    idx = np.arange(len(P))
    if feasible_set is not None:
        inside = np.array([feasible_set.distance(p) <= 1e-12 for p in P])
        P, idx = P[inside], idx[inside]
    V = np.array([eval_vector(F, p) for p in P])
    keep = _nondominated(V, margin)
    P, V, idx = P[keep], V[keep], idx[keep]
    order = np.lexsort(P.T[::-1])
    return GridParetoResult(P[order], V[order], idx[order])


# ---------------------------------------------------------------------------
# direction-sampled criticality


@dataclass
class SampledVerdict:
    verdict: str
    witness_index: int = None
    witness_subgradient: np.ndarray = None
    worst_margin: float = None

    @property
    def critical(self):
        return self.verdict == "critical"


def _candidate_subgradients(piece, rng, draws):
    G = piece.generators
    out = [G]
    if piece.hull and len(G) > 1:
        out.append(G.mean(axis=0, keepdims=True))
        i, j = np.triu_indices(len(G), k=1)
        out.append(0.5 * (G[i] + G[j]))
        out.append(rng.dirichlet(np.ones(len(G)), size=draws) @ G)
    return np.vstack(out)


def _feasible_samples(S, x, count, rng):
    lo, hi = S.bounding_box()
    if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)):
        Y = S.sample(count, rng)
    else:
        Y = np.array([S.project(p) for p in x + rng.normal(scale=1.0, size=(count, x.size))])
    # nearby points resolve directions that far samples average away
    near = np.array([S.project(p) for p in x + 1e-3 * rng.normal(size=(count, x.size))])
    return np.vstack([Y, near])


def sampled_criticality(F, S, x, directions=200, seed=0, hull_draws=1000, tol=1e-8):
    """Monte-Carlo test of the variational inequality form of criticality.

    ``x`` is declared critical when some component ``i`` has a candidate
    limiting subgradient ``w`` with ``<w, y - x> >= -tol`` at every sampled
    feasible ``y``. Candidates are generators, barycenters, pairwise
    midpoints and ``hull_draws`` random convex combinations per hull piece.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if S.distance(x) > 1e-8:
        raise ValueError("x must lie in the feasible set")
    rng = np.random.default_rng(seed)
    D = _feasible_samples(S, x, directions, rng) - x
    scale = np.linalg.norm(D, axis=1)
    # samples that project back onto x carry only rounding noise as direction
    D, scale = D[scale > 1e-9], scale[scale > 1e-9]
    if len(D) == 0:
        return SampledVerdict("critical", 0, limiting_subdiff(F.components[0], x).pieces[0].generators[0], 0.0)
    worst = -np.inf
    for i, f in enumerate(F.components):
        for piece in limiting_subdiff(f, x).pieces:
            W = _candidate_subgradients(piece, rng, hull_draws)
            # normalized margins so far and near samples count alike
            margins = (W @ D.T / scale).min(axis=1)
            k = int(np.argmax(margins))
            if margins[k] > worst:
                worst = float(margins[k])
            if margins[k] >= -tol:
                return SampledVerdict("critical", i, W[k], float(margins[k]))
    return SampledVerdict("not_critical", None, None, worst)


def oracle_critical_set(F, S, grid, directions=200, seed=0):
    """Grid points of ``S`` accepted by :func:`sampled_criticality`."""
    P = [p for p in grid.points() if S.distance(p) <= 1e-12]
    keep = [p for p in P if sampled_criticality(F, S, p, directions, seed).critical]
    return np.array(keep).reshape(-1, grid.n)


# ---------------------------------------------------------------------------
# 1-D limiting subdifferential from one-sided slopes


@dataclass
class IntervalSet:
    """Finite union of closed intervals ``[lo, hi]`` (degenerate allowed)."""

    intervals: list

    def __post_init__(self):
        iv = sorted((float(a), float(b)) for a, b in self.intervals)
        merged = []
        for a, b in iv:
            if merged and a <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        self.intervals = merged

    @property
    def empty(self):
        return not self.intervals

    @property
    def has_hull(self):
        return any(b > a for a, b in self.intervals)

    def distance(self, t):
        return min(max(a - t, 0.0, t - b) for a, b in self.intervals)

    def endpoints(self):
        return sorted({v for ab in self.intervals for v in ab})


def hausdorff_1d(A, B):
    """Hausdorff distance between two nonempty :class:`IntervalSet` objects."""
    if A.empty or B.empty:
        return 0.0 if A.empty and B.empty else np.inf

    def one_way(P, Q):
        best = 0.0
        for a, b in P.intervals:
            cands = [a, b]
            # farthest point of [a, b] from Q sits at an end or mid-gap of Q
            for (_, q1), (q2, _) in zip(Q.intervals[:-1], Q.intervals[1:]):
                mid = 0.5 * (q1 + q2)
                if a <= mid <= b:
                    cands.append(mid)
            best = max(best, max(Q.distance(t) for t in cands))
        return best

    return max(one_way(A, B), one_way(B, A))


def limiting_as_intervals(f, x):
    """Analytic 1-D limiting subdifferential as an :class:`IntervalSet`."""
    sd = limiting_subdiff(f, np.atleast_1d(x))
    return IntervalSet([(float(p.generators.min()), float(p.generators.max()))
                        for p in sd.pieces])


def _richardson_slopes(f, x, side, radius, resolution):
    """Estimates of the one-sided limit of ``f'`` at ``x`` from shrinking offsets."""
    out = []
    for j in range(resolution - 3, resolution):
        d1 = radius * 2.0 ** (-j)
        d2 = 2.0 * d1
        ests = []
        for d in (d1, d2):
            t = x + side * d
            h = d / 4.0
            ests.append((f(np.array([t + h])) - f(np.array([t - h]))) / (2.0 * h))
        # f'(x + s d) = L + c d + O(d^2): cancel the linear term
        out.append(2.0 * ests[0] - ests[1])
    return out


def _one_sided_derivative(f, x, side, h):
    fx = f(np.array([x]))
    q1 = (f(np.array([x + side * h])) - fx) / h
    q2 = (f(np.array([x + side * 2 * h])) - fx) / (2 * h)
    return side * (2.0 * q1 - q2)


def frechet_limit_subdiff_1d(f, x, radius=1e-3, resolution=12, tol=1e-5):
    """Limiting subdifferential of a 1-D piecewise smooth ``f`` at ``x``.

    The set is ``{L, R}`` together with the regular subdifferential
    ``[d_-, d_+]`` at ``x`` (empty when ``d_- > d_+``). Here ``L`` and ``R``
    are the limits of ``f'`` from the left and the right and ``d_-, d_+``
    the one-sided derivatives at ``x``, all estimated by finite differences
    at offsets ``radius * 2**-j`` for ``j < resolution``.

    Returns
    -------
    (IntervalSet, IntervalSet)
        The limiting set and the regular subdifferential at ``x``.

    Raises
    ------
    ValueError
        If successive offsets disagree, meaning a kink lies inside the
        finest window and the resolution cannot isolate it.
    """
    if f.n != 1:
        raise ValueError("frechet_limit_subdiff_1d needs n = 1")
    if resolution < 4:
        raise ValueError("resolution must be at least 4")
    x = float(np.asarray(x, dtype=float).reshape(-1)[0])
    limits = []
    for side in (-1.0, 1.0):
        ests = _richardson_slopes(f, x, side, radius, resolution)
        if max(ests) - min(ests) > tol * (1.0 + abs(ests[-1])):
            raise ValueError("resolution too coarse to isolate kinks near x")
        limits.append(ests[-1])
    h = radius * 2.0 ** (-resolution)
    dm = _one_sided_derivative(f, x, -1.0, h)
    dp = _one_sided_derivative(f, x, 1.0, h)
    if dm <= dp + tol:
        frechet = IntervalSet([(min(dm, dp), max(dm, dp))])
    else:
        frechet = IntervalSet([])
    limiting = IntervalSet([(v, v) for v in limits] + list(frechet.intervals))
    return limiting, frechet


def kinks_1d(f, lo, hi, samples=2001):
    """Points in ``[lo, hi]`` where two atoms of a 1-D max/min tie and one is extremal."""
    mode, atoms = f.normalized()
    if len(atoms) < 2:
        return np.zeros(0)
    ts = np.linspace(lo, hi, samples)
    out = []
    for i in range(len(atoms)):
        for j in range(i + 1, len(atoms)):
            def diff(t, i=i, j=j):
                p = np.array([t])
                return atoms[i].value(p) - atoms[j].value(p)

            d = np.array([diff(t) for t in ts])
            for k in range(len(ts) - 1):
                if d[k] == 0.0:
                    roots = [ts[k]]
                elif d[k] * d[k + 1] < 0:
                    roots = [brentq(diff, ts[k], ts[k + 1], xtol=1e-15, rtol=1e-15)]
                else:
                    roots = []
                for r in roots:
                    p = np.array([r])
                    vals = np.array([a.value(p) for a in atoms])
                    target = vals.max() if mode == "max" else vals.min()
                    if abs(atoms[i].value(p) - target) <= 1e-9:
                        out.append(r)
    return np.unique(np.round(out, 14))
