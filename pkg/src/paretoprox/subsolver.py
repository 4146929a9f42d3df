"""Weak Pareto points of the proximal subproblem.

At anchor ``x^k`` the subproblem is the vector problem

    F_k(x) = F(x) + (lam/2) ||x - x^k||^2 eps    over    {x in S : F(x) <= F(x^k)}.

Minimizers of a strictly positive scalarization ``<F_k(x), z>`` over that set
are weak Pareto points, so each start draws ``z`` from the open simplex and
minimizes the scalarization locally.
"""

import itertools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .convexset import Ball, Box, Polyhedron, WholeSpace
from .criticality import fritz_john_residual, proximal_step_certificate
from .funcspace import eval_vector, estimate_lipschitz

__all__ = ["SubproblemSpec", "SubproblemResult", "SubsolverFailure", "solve",
           "dominance_defect", "scalarized_value"]

FEAS_TOL = 1e-10
ANCHOR_STATIONARITY_TOL = 1e-6
MAX_BRANCH_COMBOS = 256
CERTIFIED_TOL = 1e-8


class SubsolverFailure(RuntimeError):
    pass


@dataclass
class SubproblemSpec:
    F: object
    S: object
    anchor: np.ndarray
    lam: float
    eps_vec: np.ndarray
    anchor_values: np.ndarray = None
    c: float = None

    def __post_init__(self):
        self.anchor = np.atleast_1d(np.asarray(self.anchor, dtype=float))
        self.eps_vec = np.atleast_1d(np.asarray(self.eps_vec, dtype=float))
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        if self.eps_vec.size != self.F.m:
            raise ValueError("eps_vec must have one entry per objective")
        if abs(np.linalg.norm(self.eps_vec) - 1.0) > 1e-12:
            raise ValueError("eps_vec must have unit norm")
        lower = self.c if self.c is not None else 0.0
        if np.any(self.eps_vec <= 0) or self.eps_vec.min() < lower:
            raise ValueError("eps_vec entries must be positive and at least c")
        if self.S.distance(self.anchor) > 1e-8:
            raise ValueError("anchor must lie in the feasible set")
        values = eval_vector(self.F, self.anchor)
        if self.anchor_values is None:
            self.anchor_values = values
        else:
            self.anchor_values = np.asarray(self.anchor_values, dtype=float)
            if not np.allclose(self.anchor_values, values, rtol=0, atol=1e-12):
                raise ValueError("anchor_values disagree with F(anchor)")

    def prox_values(self, x):
        d = np.atleast_1d(x) - self.anchor
        return eval_vector(self.F, x) + 0.5 * self.lam * (d @ d) * self.eps_vec


@dataclass
class SubproblemResult:
    point: np.ndarray
    scalarization_weights: np.ndarray
    accepted: bool
    weak_pareto_defect: float
    meta: dict = field(default_factory=dict)


def dominance_defect(spec, candidate):
    """``max_j f_j(anchor) - f_j(candidate) - (lam/2)||candidate - anchor||^2 eps_j``.

    Nonnegative whenever the anchor does not strictly dominate the candidate
    in the proximal objective.
    """
    x = np.atleast_1d(np.asarray(candidate, dtype=float))
    return float(np.max(spec.anchor_values - spec.prox_values(x)))


def scalarized_value(spec, z, x):
    return float(z @ spec.prox_values(x))


def _draw_weights(rng, m):
    if m == 1:
        return np.ones(1)
    z = rng.dirichlet(np.ones(m))
    z = np.maximum(z, 1e-3)
    return z / z.sum()


def _feasible(spec, x):
    if spec.S.distance(x) > 1e-12:
        return False
    return bool(np.all(eval_vector(spec.F, x) <= spec.anchor_values + FEAS_TOL))


def _repair(spec, x, z, phi0):
    """Pull a slightly infeasible ``x`` back toward the anchor."""
    if _feasible(spec, x) and scalarized_value(spec, z, x) <= phi0:
        return x
    lo, hi = 0.0, 1.0
    best = None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        y = spec.S.project(spec.anchor + mid * (x - spec.anchor))
        if _feasible(spec, y) and scalarized_value(spec, z, y) <= phi0:
            best, lo = y, mid
        else:
            hi = mid
    return best


def _set_constraints(S, anchor, s):
    """Constraints of ``S`` in the scaled variable ``x = anchor + s*y``.

    Returns ``(funs, bounds)`` where each fun maps ``y`` to an array of
    values that must be nonnegative together with its Jacobian in ``y``.
    """
    funs, bounds = [], None
    if isinstance(S, Box):
        bounds = list(zip((S.lower - anchor) / s, (S.upper - anchor) / s))
    elif isinstance(S, Ball):
        scale = 2.0 * S.radius * s

        def ball(y):
            d = anchor + s * y - S.center
            return np.array([(S.radius ** 2 - d @ d) / scale])

        def ball_jac(y):
            d = anchor + s * y - S.center
            return (-2.0 * s * d / scale)[None, :]

        funs.append((ball, ball_jac))
    elif isinstance(S, Polyhedron):
        A = S.A / S._row_norms[:, None]
        b = S.b / S._row_norms
        funs.append((lambda y: (b - A @ (anchor + s * y)) / s, lambda y: -A))
    elif not isinstance(S, WholeSpace):
        raise TypeError(f"unsupported set {type(S).__name__}")
    return funs, bounds


def _local_smooth(spec, z, x_init, ftol):
    """Exact piecewise-smooth reformulation solved with SLSQP.

    Max components get an epigraph variable; min components are split by
    enumerating which atom is taken, which is exact because the min over
    branches of the branch problems equals the original minimum.
    Variables are scaled around the anchor so that SLSQP's tolerances are
    relative to the expected step.
    """
    F, n, anchor = spec.F, spec.F.n, spec.anchor
    mu = spec.lam * float(z @ spec.eps_vec)
    comps = [f.normalized() for f in F.components]
    choices = []
    for mode, atoms in comps:
        if mode == "min" and len(atoms) > 1:
            choices.append(list(range(len(atoms))))
        else:
            choices.append([None])
    if int(np.prod([len(c) for c in choices])) > MAX_BRANCH_COMBOS:
        # keep the two lowest atoms at the start point for each min component
        choices = [c if c == [None] else
                   sorted(np.argsort([comps[i][1][k].value(x_init) for k in c])[:2].tolist())
                   for i, c in enumerate(choices)]
    phi0 = scalarized_value(spec, z, anchor)

    best_x, best_phi, tried = None, np.inf, 0
    for combo in itertools.product(*choices):
        tried += 1
        # (component, atoms, epigraph column or None)
        terms, n_t = [], 0
        for i, ((mode, atoms), b) in enumerate(zip(comps, combo)):
            if b is not None:
                terms.append((i, [atoms[b]], None))
            elif len(atoms) == 1:
                terms.append((i, atoms, None))
            else:
                terms.append((i, atoms, n + n_t))
                n_t += 1
        nv = n + n_t

        g0 = mu * (x_init - anchor)
        for i, atoms, col in terms:
            vals = [a.value(x_init) for a in atoms]
            g0 = g0 + z[i] * atoms[int(np.argmax(vals))].grad(x_init)
        s = max(np.linalg.norm(g0) / mu, np.linalg.norm(x_init - anchor),
                1e-12 * (1.0 + np.linalg.norm(anchor)))
        sig = mu * s * s
        t0 = {col: max(a.value(x_init) for a in atoms) for i, atoms, col in terms
              if col is not None}

        def xof(v):
            return anchor + s * v[:n]

        def obj(v):
            x = xof(v)
            d = x - anchor
            val = 0.5 * mu * (d @ d)
            for i, atoms, col in terms:
                val += z[i] * (t0[col] + sig * v[col] if col is not None else atoms[0].value(x))
            return (val - phi0) / sig

        def obj_jac(v):
            x = xof(v)
            g = np.zeros(nv)
            gx = mu * (x - anchor)
            for i, atoms, col in terms:
                if col is None:
                    gx = gx + z[i] * atoms[0].grad(x)
                else:
                    g[col] = z[i]
            g[:n] = gx * s / sig
            return g

        cons = []
        for i, atoms, col in terms:
            cap = spec.anchor_values[i]
            if col is None:
                cons.append(_cap_atom(atoms[0], cap, xof, nv, s, sig))
            else:
                for a in atoms:
                    cons.append(_epigraph(a, t0[col], col, xof, nv, s, sig))
                cons.append(_cap_epigraph(cap, t0[col], col, nv, sig))
        funs, bounds = _set_constraints(spec.S, anchor, s)
        for fun, jac in funs:
            cons.append({"type": "ineq", "fun": (lambda v, fun=fun: fun(v[:n])),
                         "jac": (lambda v, jac=jac: np.hstack(
                             [jac(v[:n]), np.zeros((jac(v[:n]).shape[0], n_t))]))})
        if bounds is not None:
            bounds = bounds + [(None, None)] * n_t
        v0 = np.concatenate([(x_init - anchor) / s, np.zeros(n_t)])
        with warnings.catch_warnings():
            # SLSQP clips trial points to the bounds and says so; harmless here
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(obj, v0, jac=obj_jac, method="SLSQP", bounds=bounds,
                           constraints=cons, options={"ftol": ftol, "maxiter": 500})
        x = _repair(spec, spec.S.project(xof(res.x)), z, phi0)
        if x is None:
            continue
        phi = scalarized_value(spec, z, x)
        if phi < best_phi:
            best_x, best_phi = x, phi
    return best_x, best_phi, tried


def _epigraph(atom, t0, col, xof, nv, s, sig):
    n = len(xof(np.zeros(nv)))

    def fun(v):
        return (t0 + sig * v[col] - atom.value(xof(v))) / sig

    def jac(v):
        g = np.zeros(nv)
        g[:n] = -atom.grad(xof(v)) * s / sig
        g[col] = 1.0
        return g

    return {"type": "ineq", "fun": fun, "jac": jac}


def _cap_epigraph(cap, t0, col, nv, sig):
    def jac(v):
        g = np.zeros(nv)
        g[col] = -1.0
        return g

    return {"type": "ineq", "fun": lambda v: (cap - t0 - sig * v[col]) / sig, "jac": jac}


def _cap_atom(atom, cap, xof, nv, s, sig):
    n = len(xof(np.zeros(nv)))

    def jac(v):
        g = np.zeros(nv)
        g[:n] = -atom.grad(xof(v)) * s / sig
        return g

    return {"type": "ineq", "fun": lambda v: (cap - atom.value(xof(v))) / sig, "jac": jac}


def _select_grad(f, x):
    # lowest-index active atom
    mode, atoms = f.normalized()
    vals = np.array([a.value(x) for a in atoms])
    target = vals.max() if mode == "max" else vals.min()
    return atoms[int(np.flatnonzero(vals == target)[0])].grad(x)


def _local_subgradient(spec, z, x_init, steps, rho0):
    """Projected subgradient with an exact penalty on the descent constraints."""
    phi0 = scalarized_value(spec, z, spec.anchor)
    mu = spec.lam * float(z @ spec.eps_vec)
    rho = rho0
    best_x, best_phi = spec.anchor.copy(), phi0
    for _ in range(6):
        x = spec.S.project(x_init)
        s0 = 1.0 / spec.lam
        violated = False
        for t in range(steps):
            vals = eval_vector(spec.F, x)
            g = mu * (x - spec.anchor)
            for i, f in enumerate(spec.F.components):
                gi = _select_grad(f, x)
                g = g + z[i] * gi
                if vals[i] > spec.anchor_values[i]:
                    g = g + rho * gi
            gn = np.linalg.norm(g)
            if gn == 0:
                break
            x = spec.S.project(x - (s0 / np.sqrt(t + 1.0)) * g / max(gn, 1.0))
            if _feasible(spec, x):
                phi = scalarized_value(spec, z, x)
                if phi < best_phi:
                    best_x, best_phi = x.copy(), phi
            else:
                violated = True
        if not violated or best_phi < phi0:
            break
        rho *= 2.0
    return best_x, best_phi, 1


def solve(spec, starts=3, seed=0, method="smooth", steps=5000, ftol=1e-15):
    """Compute the next proximal iterate.

    Parameters
    ----------
    spec : SubproblemSpec
    starts : int
        Number of scalarization weights. Start 0 begins at the anchor; later
        starts begin at a random point and are also re-solved from the
        anchor with the same weights.
    seed : int
        Start ``i`` uses ``numpy.random.default_rng(seed + i)``.
    method : {"smooth", "subgradient"}
        ``"smooth"`` solves the exact piecewise-smooth reformulation with
        SLSQP; ``"subgradient"`` runs projected subgradient descent with
        steps ``(1/lam)/sqrt(t+1)`` and an exact penalty on ``F <= F(anchor)``.
    steps : int
        Subgradient budget per start.

    Returns
    -------
    SubproblemResult
        The returned point comes from the first start whose point passes the
        Fritz-John test of the subproblem (residual <= 1e-8), or else from
        the start with the smallest residual. ``accepted`` is ``False`` only
        when no start improves on the anchor and the anchor itself fails the
        Fritz-John test.
    """
    if starts < 1:
        raise ValueError("starts must be at least 1")
    lo, hi = spec.S.bounding_box()
    width = np.where(np.isfinite(hi - lo), hi - lo, 2.0)
    rho0 = None
    results = []
    for st in range(starts):
        rng = np.random.default_rng(seed + st)
        z = _draw_weights(rng, spec.F.m)
        inits = [spec.anchor.copy()]
        if st > 0:
            inits.insert(0, spec.S.project(spec.anchor + 0.5 * width * rng.uniform(-1, 1, spec.F.n)))
        phi0 = scalarized_value(spec, z, spec.anchor)
        x, phi, tried = None, np.inf, 0
        for x_init in inits:
            if method == "smooth":
                xi, phii, t = _local_smooth(spec, z, x_init, ftol)
            elif method == "subgradient":
                if rho0 is None:
                    blo = np.where(np.isfinite(lo), lo, spec.anchor - 1.0)
                    bhi = np.where(np.isfinite(hi), hi, spec.anchor + 1.0)
                    L = max(estimate_lipschitz(f, blo, bhi) for f in spec.F.components)
                    rho0 = 10.0 * max(L, 1e-8)
                xi, phii, t = _local_subgradient(spec, z, x_init, steps, rho0)
            else:
                raise ValueError(f"unknown method {method!r}")
            tried += t
            if xi is not None and phii < phi:
                x, phi = xi, phii
        if x is None or not _feasible(spec, x) or phi >= phi0:
            results.append((st, z, None, np.inf, tried, np.inf))
        else:
            res = proximal_step_certificate(spec.F, spec.S, spec.anchor, x, spec.lam,
                                            spec.eps_vec).residual
            results.append((st, z, x, phi - phi0, tried, res))

    ok = [r for r in results if r[2] is not None]
    meta = {"starts": [{"start": r[0], "weights": r[1].tolist(), "improvement": r[3],
                        "branches": r[4], "certificate_residual": r[5]} for r in results]}
    if ok:
        # the first start whose point is certified; otherwise the best certificate
        st, z, x, gain, _, _ = min(ok, key=lambda r: (r[5] > CERTIFIED_TOL, r[5] if r[5] > CERTIFIED_TOL else r[0]))
        meta["chosen_start"] = st
        return SubproblemResult(x, z, True, dominance_defect(spec, x), meta)
    # no start improved: the anchor is the answer if it passes the first-order test
    fj = fritz_john_residual(spec.F, [], spec.S, spec.anchor)
    meta["chosen_start"] = None
    meta["anchor_fj_residual"] = fj.residual
    accepted = fj.residual <= ANCHOR_STATIONARITY_TOL
    return SubproblemResult(spec.anchor.copy(), results[0][1], accepted, 0.0, meta)
