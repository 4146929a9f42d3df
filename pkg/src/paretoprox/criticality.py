"""Pareto criticality decisions and Fritz-John certificates.

A point ``x`` of a convex set ``S`` is Pareto critical for ``F`` when a
single component ``f_i`` has a limiting subgradient ``w`` with
``-w`` in the normal cone ``N(x; S)``. Each test is a min-norm problem over
``conv(piece) + cone(normal rays)``.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .convexset import DEFAULT_ACTIVE_TOL, InfeasiblePointError, WholeSpace
from .funcspace import (
    DEFAULT_ACTIVITY_TOL, NormSqShift, VectorFunction, clarke_subdiff, eval_vector,
    limiting_subdiff,
)
from .minnorm import min_norm_point

__all__ = [
    "CriticalityCertificate", "FritzJohnCertificate", "HullStationarity",
    "is_pareto_critical", "hull_stationarity", "fritz_john_residual",
    "proximal_step_certificate", "positivity_check", "positivity_margin",
    "DEFAULT_CRITICALITY_TOL", "SELECTION_BUDGET",
]

DEFAULT_CRITICALITY_TOL = 1e-8
SELECTION_BUDGET = 4096


def _as_list(v):
    return None if v is None else np.asarray(v, dtype=float).tolist()


@dataclass
class CriticalityCertificate:
    verdict: str
    residual: float
    witness_index: int = None
    witness_piece: int = None
    witness_subgradient: np.ndarray = None
    generators: np.ndarray = None
    hull_coefficients: np.ndarray = None
    rays: np.ndarray = None
    cone_multipliers: np.ndarray = None
    tol: float = DEFAULT_CRITICALITY_TOL

    @property
    def critical(self):
        return self.verdict == "critical"

    def reconstruction_error(self):
        if self.witness_subgradient is None:
            return 0.0
        return float(np.max(np.abs(self.hull_coefficients @ self.generators
                                   - self.witness_subgradient)))

    def recompute_residual(self):
        v = self.hull_coefficients @ self.generators
        if self.rays is not None and len(self.rays):
            v = v + self.cone_multipliers @ self.rays
        return float(np.linalg.norm(v))

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "residual": self.residual,
            "tol": self.tol,
            "witness_index": self.witness_index,
            "witness_piece": self.witness_piece,
            "witness_subgradient": _as_list(self.witness_subgradient),
            "generators": _as_list(self.generators),
            "hull_coefficients": _as_list(self.hull_coefficients),
            "rays": _as_list(self.rays),
            "cone_multipliers": _as_list(self.cone_multipliers),
        }


def _piece_residual_minnorm(C, rays):
    res = min_norm_point(C, rays)
    return res.norm, res.lam, res.mu


def _piece_residual_nnls(C, rays, weight=1e6):
    # independent route: nonnegative least squares with the simplex row weighted
    k, n = C.shape
    r = len(rays)
    M = np.zeros((n + 1, k + r))
    M[:n, :k] = C.T
    if r:
        M[:n, k:] = rays.T
    M[n, :k] = weight
    rhs = np.zeros(n + 1)
    rhs[n] = weight
    # bounded-variable least squares; scipy's nnls can stop short on these systems
    coef = lsq_linear(M, rhs, bounds=(0.0, np.inf), method="bvls", tol=1e-14).x
    lam = coef[:k] / coef[:k].sum()
    mu = coef[k:]
    v = lam @ C + (mu @ rays if r else 0.0)
    return float(np.linalg.norm(v)), lam, mu


def is_pareto_critical(F, S, x, tol=DEFAULT_CRITICALITY_TOL,
                       activity_tol=DEFAULT_ACTIVITY_TOL, active_tol=DEFAULT_ACTIVE_TOL,
                       method="minnorm"):
    """Decide Pareto criticality of ``x`` for ``F`` on ``S``.

    For each component and each convex piece of its limiting subdifferential
    the distance from the piece to ``-N(x; S)`` is computed; the first
    (component, piece) pair within ``tol`` is the witness.

    Parameters
    ----------
    method : {"minnorm", "nnls"}
        ``"minnorm"`` uses the active-set min-norm solver, ``"nnls"`` an
        independent weighted nonnegative least-squares formulation.

    Returns
    -------
    CriticalityCertificate
        The best (smallest residual) candidate is reported when no pair is
        within ``tol``.
    """
    if isinstance(F, VectorFunction) is False:
        F = VectorFunction(list(F))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    S = WholeSpace(F.n) if S is None else S
    cone = S.normal_cone(x, active_tol)
    rays = cone.rays
    solve = _piece_residual_minnorm if method == "minnorm" else _piece_residual_nnls
    best = None
    for i, f in enumerate(F.components):
        sub = limiting_subdiff(f, x, activity_tol)
        for j, C in enumerate(sub.components()):
            if len(C) == 0:
                raise ValueError("empty generator piece")
            r, lam, mu = solve(C, rays)
            if best is None or r < best[0]:
                best = (r, i, j, C, lam, mu)
            if r <= tol:
                break
        if best[0] <= tol:
            break
    r, i, j, C, lam, mu = best
    return CriticalityCertificate(
        verdict="critical" if r <= tol else "not_critical",
        residual=float(r), witness_index=i, witness_piece=j,
        witness_subgradient=lam @ C, generators=C, hull_coefficients=lam,
        rays=rays, cone_multipliers=mu, tol=tol,
    )


@dataclass
class HullStationarity:
    """``0 ∈ conv(∪_i ∂^C f_i(x)) + N(x; S)`` diagnostic."""

    verdict: str
    residual: float
    weights: np.ndarray
    cone_multipliers: np.ndarray

    @property
    def stationary(self):
        return self.verdict == "stationary"

    def to_dict(self):
        return {"verdict": self.verdict, "residual": self.residual,
                "weights": _as_list(self.weights),
                "cone_multipliers": _as_list(self.cone_multipliers)}


def hull_stationarity(F, S, x, tol=DEFAULT_CRITICALITY_TOL,
                      activity_tol=DEFAULT_ACTIVITY_TOL, active_tol=DEFAULT_ACTIVE_TOL):
    """Clarke-based stationarity across all components (for comparison only)."""
    if not isinstance(F, VectorFunction):
        F = VectorFunction(list(F))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    S = WholeSpace(F.n) if S is None else S
    rays = S.normal_cone(x, active_tol).rays
    G = np.vstack([clarke_subdiff(f, x, activity_tol).generators() for f in F.components])
    res = min_norm_point(G, rays)
    return HullStationarity("stationary" if res.norm <= tol else "not_stationary",
                            res.norm, res.lam, res.mu)


# ---------------------------------------------------------------------------
# Fritz-John


@dataclass
class FritzJohnCertificate:
    alphas: np.ndarray
    betas: np.ndarray
    tau: float
    selections: list
    selected_subgradients: list
    cone_element: np.ndarray
    residual: float
    status: str = "ok"
    active_constraints: list = field(default_factory=list)
    constraint_values: np.ndarray = None

    def recompute_residual(self):
        v = self.tau * self.cone_element
        for a, u in zip(self.alphas, self.selected_subgradients[:len(self.alphas)]):
            v = v + a * u
        for b, u in zip(self.betas, self.selected_subgradients[len(self.alphas):]):
            v = v + b * u
        return float(np.linalg.norm(v))

    def to_dict(self):
        return {
            "status": self.status,
            "alphas": _as_list(self.alphas),
            "betas": _as_list(self.betas),
            "tau": self.tau,
            "selections": [list(s) for s in self.selections],
            "selected_subgradients": [_as_list(u) for u in self.selected_subgradients],
            "cone_element": _as_list(self.cone_element),
            "residual": self.residual,
            "active_constraints": list(self.active_constraints),
            "constraint_values": _as_list(self.constraint_values),
        }


def fritz_john_residual(F, G, C, x, activity_tol=DEFAULT_ACTIVITY_TOL,
                        active_tol=DEFAULT_ACTIVE_TOL, feasibility_tol=1e-8,
                        budget=SELECTION_BUDGET):
    """Best Fritz-John multipliers at ``x``.

    Minimizes ``||sum a_i u_i + sum b_j v_j + w||`` over ``a, b >= 0`` with
    ``sum a + sum b = 1``, ``u_i, v_j`` in one convex piece of the limiting
    subdifferentials, ``b_j = 0`` for inactive constraints and ``w`` in the
    normal cone of ``C`` (the distance-function term, with ``tau = ||w||``).
    For fixed pieces, ``sum a_i u_i`` ranges over the convex hull of the
    union of generators, so every selection is one min-norm solve.
    """
    if not isinstance(F, VectorFunction):
        F = VectorFunction(list(F))
    G = list(G or [])
    x = np.atleast_1d(np.asarray(x, dtype=float))
    C = WholeSpace(F.n) if C is None else C
    try:
        rays = C.normal_cone(x, active_tol).rays
    except InfeasiblePointError:
        raise
    gvals = np.array([g.value(x) for g in G])
    if len(G) and np.any(gvals > feasibility_tol):
        raise InfeasiblePointError(f"constraint violated: max g_j(x) = {gvals.max():.3g}")
    active = [j for j in range(len(G)) if gvals[j] >= -active_tol]
    funcs = list(F.components) + [G[j] for j in active]
    comps = [limiting_subdiff(f, x, activity_tol).components() for f in funcs]
    total = int(np.prod([len(c) for c in comps]))
    m, p, n = F.m, len(G), F.n
    if total > budget:
        return FritzJohnCertificate(
            alphas=np.full(m, np.nan), betas=np.full(p, np.nan), tau=np.nan,
            selections=[], selected_subgradients=[], cone_element=np.full(n, np.nan),
            residual=np.inf, status="inconclusive", active_constraints=active,
            constraint_values=gvals)
    best = None
    for sel in itertools.product(*[range(len(c)) for c in comps]):
        blocks = [comps[t][s] for t, s in enumerate(sel)]
        owners = np.concatenate([[t] * len(b) for t, b in enumerate(blocks)])
        res = min_norm_point(np.vstack(blocks), rays)
        if best is None or res.norm < best[0].norm:
            best = (res, sel, blocks, owners)
        if res.norm <= 1e-15:
            break
    res, sel, blocks, owners = best
    weights = np.array([res.lam[owners == t].sum() for t in range(len(funcs))])
    subgrads = []
    for t, b in enumerate(blocks):
        w = res.lam[owners == t]
        subgrads.append(w @ b / weights[t] if weights[t] > 0 else b[0].copy())
    alphas = weights[:m]
    betas = np.zeros(p)
    betas[active] = weights[m:]
    v_full = [None] * p
    for k, j in enumerate(active):
        v_full[j] = subgrads[m + k]
    for j in range(p):
        if v_full[j] is None:
            v_full[j] = limiting_subdiff(G[j], x, activity_tol).components()[0][0]
    w = res.mu @ rays if len(rays) else np.zeros(n)
    tau = float(np.linalg.norm(w))
    cone_element = w / tau if tau > 0 else np.zeros(n)
    if tau == 0:
        tau = 1.0
    cert = FritzJohnCertificate(
        alphas=alphas, betas=betas, tau=tau, selections=[tuple(sel)],
        selected_subgradients=subgrads[:m] + v_full, cone_element=cone_element,
        residual=0.0, active_constraints=active, constraint_values=gvals)
    cert.residual = cert.recompute_residual()
    return cert


def proximal_step_certificate(F, S, x_prev, x, lam, eps, **kw):
    """Fritz-John certificate of ``x`` for the proximal subproblem anchored at ``x_prev``.

    Objectives are ``f_i + (lam/2) eps_i ||. - x_prev||^2`` and constraints
    ``f_i - f_i(x_prev) <= 0``; see :func:`fritz_john_residual`.
    """
    x_prev = np.atleast_1d(np.asarray(x_prev, dtype=float))
    eps = np.asarray(eps, dtype=float)
    Fk = VectorFunction([f.add_smooth(NormSqShift(x_prev, 0.5 * lam * e))
                         for f, e in zip(F.components, eps)])
    anchor = eval_vector(F, x_prev)
    Gk = [f.shift(-c) for f, c in zip(F.components, anchor)]
    return fritz_john_residual(Fk, Gk, S, x, **kw)


# ---------------------------------------------------------------------------
# positivity


def positivity_margin(F, G, C, x_star, eps, samples=10_000, seed=0):
    """Smallest value of ``max{f_i(x) - f_i(x*) + eps, g_j(x)}`` over samples of ``C``.

    Returns ``(value, witness)``.
    """
    if not isinstance(F, VectorFunction):
        F = VectorFunction(list(F))
    G = list(G or [])
    x_star = np.atleast_1d(np.asarray(x_star, dtype=float))
    rng = np.random.default_rng(seed)
    lo, hi = C.bounding_box()
    n = F.n
    per_axis = max(2, int(np.floor((samples / 2) ** (1.0 / n))))
    axes = [np.linspace(lo[i], hi[i], per_axis) for i in range(n)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
    pts = np.vstack([grid, rng.uniform(lo, hi, size=(samples - len(grid), n)), x_star[None, :]])
    pts = np.array([C.project(p) for p in pts])
    ref = eval_vector(F, x_star)
    best_val, best_x = np.inf, None
    for p in pts:
        vals = list(eval_vector(F, p) - ref + eps) + [g.value(p) for g in G]
        v = max(vals)
        if v < best_val:
            best_val, best_x = v, p
    return float(best_val), best_x


def positivity_check(F, G, C, x_star, eps, samples=10_000, seed=0):
    """``True`` iff the positivity condition holds at every sample.

    A ``False`` answer refutes weak Pareto optimality of ``x_star``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    return positivity_margin(F, G, C, x_star, eps, samples, seed)[0] > 0
