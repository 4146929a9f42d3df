"""Vectorial proximal point driver and convergence diagnostics."""

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .criticality import (
    DEFAULT_CRITICALITY_TOL, fritz_john_residual, hull_stationarity, is_pareto_critical,
    proximal_step_certificate,
)
from .funcspace import eval_vector
from .subsolver import SubproblemSpec, solve

__all__ = ["PpaConfig", "IterateRecord", "Trajectory", "run", "fejer_diagnostics",
           "step_norm_identity_check", "FejerReport", "StepNormReport"]


@dataclass
class PpaConfig:
    """Parameters of the proximal point method.

    ``lam`` is a positive float (constant), a sequence (the last entry is
    repeated) or a callable ``k -> lambda_k``; callables need explicit
    bounds ``a`` and ``b``. ``eps`` follows the same rules with unit-norm
    positive vectors; ``None`` means ``(1/sqrt(m), ..., 1/sqrt(m))``.
    """

    lam: object = 1.0
    a: float = None
    b: float = None
    eps: object = None
    c: float = None
    max_iters: int = 10_000
    step_tol: float = 1e-6
    criticality_tol: float = DEFAULT_CRITICALITY_TOL
    terminal_tol: float = 1e-6
    check_every: int = None
    starts: int = 3
    seed: int = 0
    method: str = "smooth"
    subgradient_steps: int = 5000

    def lambda_at(self, k):
        lam = self.lam
        if callable(lam):
            val = float(lam(k))
        elif np.ndim(lam) == 0:
            val = float(lam)
        else:
            seq = list(lam)
            val = float(seq[min(k, len(seq) - 1)])
        a, b = self.lambda_bounds()
        if not (0 < a <= val <= b):
            raise ValueError(f"lambda_{k} = {val} outside [{a}, {b}]")
        return val

    def lambda_bounds(self):
        if self.a is not None and self.b is not None:
            return float(self.a), float(self.b)
        if callable(self.lam):
            raise ValueError("a callable lambda schedule needs explicit bounds a and b")
        vals = np.atleast_1d(np.asarray(self.lam, dtype=float))
        a = float(vals.min()) if self.a is None else float(self.a)
        b = float(vals.max()) if self.b is None else float(self.b)
        return a, b

    def eps_at(self, k, m):
        eps = self.eps
        if eps is None:
            val = np.full(m, 1.0 / np.sqrt(m))
        elif callable(eps):
            val = np.asarray(eps(k), dtype=float)
        else:
            arr = np.asarray(eps, dtype=float)
            val = arr if arr.ndim == 1 else arr[min(k, len(arr) - 1)]
        if val.shape != (m,):
            raise ValueError(f"eps_{k} must have {m} entries")
        if abs(np.linalg.norm(val) - 1.0) > 1e-12:
            raise ValueError(f"eps_{k} must have unit norm")
        if val.min() < self.eps_floor(m) - 1e-15:
            raise ValueError(f"eps_{k} has an entry below c")
        return val

    def eps_floor(self, m):
        if self.c is not None:
            if self.c > 1.0 / np.sqrt(m) + 1e-15:
                raise ValueError("c cannot exceed 1/sqrt(m)")
            return float(self.c)
        if self.eps is None:
            return 1.0 / np.sqrt(m)
        if callable(self.eps):
            raise ValueError("a callable eps schedule needs an explicit floor c")
        return float(np.min(self.eps))

    @classmethod
    def from_dict(cls, d):
        names = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        if d.get("lam") == "callable" or d.get("eps") == "callable":
            raise ValueError("callable schedules cannot be restored from a file")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        for key in ("lam", "eps"):
            v = d[key]
            if callable(v):
                d[key] = "callable"
            elif v is not None and np.ndim(v) > 0:
                d[key] = np.asarray(v, dtype=float).tolist()
        return d


@dataclass
class IterateRecord:
    k: int
    x: np.ndarray
    F_values: np.ndarray
    step_norm: float = 0.0
    dominance_defect: float = 0.0
    fj_residual: float = float("nan")
    subsolver_meta: dict = field(default_factory=dict)

    def to_dict(self):
        fj = None if np.isnan(self.fj_residual) else self.fj_residual
        return {"k": self.k, "x": self.x.tolist(), "F_values": self.F_values.tolist(),
                "step_norm": self.step_norm, "dominance_defect": self.dominance_defect,
                "fj_residual": fj, "subsolver_meta": self.subsolver_meta}


@dataclass
class Trajectory:
    iterates: list
    termination: str
    config: PpaConfig
    F: object = None
    S: object = None
    final_criticality: object = None
    final_fritz_john: object = None
    final_step_certificate: object = None
    final_hull_stationarity: object = None

    @property
    def xs(self):
        return np.array([r.x for r in self.iterates])

    @property
    def values(self):
        return np.array([r.F_values for r in self.iterates])

    @property
    def final(self):
        return self.iterates[-1]

    def to_dict(self):
        def cert(c):
            return None if c is None else c.to_dict()

        return {
            "termination": self.termination,
            "config": self.config.to_dict(),
            "iterates": [r.to_dict() for r in self.iterates],
            "final_criticality": cert(self.final_criticality),
            "final_fritz_john": cert(self.final_fritz_john),
            "final_step_certificate": cert(self.final_step_certificate),
            "final_hull_stationarity": cert(self.final_hull_stationarity),
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    def csv_header(self):
        n, m = len(self.iterates[0].x), len(self.iterates[0].F_values)
        return (["k"] + [f"x{j}" for j in range(n)] + [f"F{i}" for i in range(m)]
                + ["step_norm", "dominance_defect", "fj_residual"])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.csv_header())
        for r in self.iterates:
            row = [r.k] + [format(float(v), ".17g") for v in r.x] + [format(float(v), ".17g") for v in r.F_values]
            row += [format(float(r.step_norm), ".17g"), format(float(r.dominance_defect), ".17g"),
                    format(float(r.fj_residual), ".17g")]
            w.writerow(row)
        return buf.getvalue()


def _check_due(cfg, k, n):
    every = cfg.check_every
    if every is None:
        every = 1 if n <= 4 else 10
    return every > 0 and k % every == 0


def run(F, S, x0, cfg=None):
    """Run the proximal point method from ``x0``.

    Stops when the current iterate is Pareto critical, when a step is at most
    ``step_tol``, after ``max_iters`` steps, or when the subproblem solver
    fails. The last iterate carries criticality and Fritz-John certificates,
    decided at ``max(criticality_tol, terminal_tol)``.
    """
    cfg = PpaConfig() if cfg is None else cfg
    x = np.atleast_1d(np.asarray(x0, dtype=float))
    if x.size != F.n:
        raise ValueError(f"x0 has dimension {x.size}, F expects {F.n}")
    if S.distance(x) > 1e-8:
        raise ValueError("x0 must lie in the feasible set")
    m = F.m
    a, b = cfg.lambda_bounds()
    if not (0 < a <= b):
        raise ValueError("lambda bounds must satisfy 0 < a <= b")
    c = cfg.eps_floor(m)
    if not c > 0:
        raise ValueError("eps floor c must be positive")

    records = [IterateRecord(0, x.copy(), eval_vector(F, x))]
    termination = "max_iters"
    last_cert = None
    for k in range(cfg.max_iters):
        if _check_due(cfg, k, F.n):
            crit = is_pareto_critical(F, S, x, tol=cfg.criticality_tol)
            if crit.critical:
                termination = "critical_point"
                break
        lam, eps = cfg.lambda_at(k), cfg.eps_at(k, m)
        spec = SubproblemSpec(F, S, x, lam, eps, anchor_values=records[-1].F_values, c=c)
        res = solve(spec, starts=cfg.starts, seed=cfg.seed + 1000 * k, method=cfg.method,
                    steps=cfg.subgradient_steps)
        if not res.accepted:
            records[-1].subsolver_meta["failure"] = res.meta
            termination = "subsolver_failure"
            break
        x_new = res.point
        cert = proximal_step_certificate(F, S, x, x_new, lam, eps)
        alpha = cert.alphas
        meta = dict(res.meta)
        meta.update({
            "lambda": lam, "eps": eps.tolist(), "weights": res.scalarization_weights.tolist(),
            "fj_alphas": alpha.tolist(), "fj_betas": cert.betas.tolist(), "fj_tau": cert.tau,
            "gamma": lam * float(eps @ alpha),
            "theta": cfg.lambda_at(k + 1) * float(eps @ alpha),
        })
        rec = IterateRecord(k + 1, x_new.copy(), eval_vector(F, x_new),
                            step_norm=float(np.linalg.norm(x_new - x)),
                            dominance_defect=res.weak_pareto_defect,
                            fj_residual=cert.residual, subsolver_meta=meta)
        records.append(rec)
        last_cert = cert
        x = x_new
        if rec.step_norm <= cfg.step_tol:
            termination = "step_tol"
            break

    traj = Trajectory(records, termination, cfg, F=F, S=S)
    # the terminal certificate uses the looser tolerance that matches step_tol
    tol = max(cfg.criticality_tol, cfg.terminal_tol)
    traj.final_criticality = is_pareto_critical(F, S, x, tol=tol)
    traj.final_fritz_john = fritz_john_residual(F, [], S, x)
    traj.final_step_certificate = last_cert
    traj.final_hull_stationarity = hull_stationarity(F, S, x, tol=tol)
    return traj


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class FejerReport:
    distances: dict
    violations: dict
    excluded: dict

    @property
    def max_violation(self):
        return max(self.violations.values(), default=-np.inf)


def fejer_diagnostics(traj, reference_points, F=None, S=None, tol=1e-9):
    """Distances from the iterates to each reference point and the worst increase.

    Reference points must satisfy ``F(x*) <= F(x^k)`` for every recorded
    iterate; the others are reported under ``excluded``.
    """
    F = traj.F if F is None else F
    S = traj.S if S is None else S
    xs, vals = traj.xs, traj.values
    distances, violations, excluded = {}, {}, {}
    for idx, ref in enumerate(reference_points):
        ref = np.atleast_1d(np.asarray(ref, dtype=float))
        if S is not None and S.distance(ref) > 1e-8:
            excluded[idx] = "outside the feasible set"
            continue
        fr = eval_vector(F, ref)
        if np.any(fr > vals + tol):
            worst = int(np.argmax(np.max(fr - vals, axis=1)))
            excluded[idx] = f"F(ref) not below F(x^{worst})"
            continue
        d = np.linalg.norm(xs - ref, axis=1)
        distances[idx] = d
        violations[idx] = float(np.max(np.diff(d))) if len(d) > 1 else -np.inf
    return FejerReport(distances, violations, excluded)


@dataclass
class StepNormReport:
    squared_margins: np.ndarray
    unsquared_margins: np.ndarray
    holds: bool
    tail_mean_step: float
    steps_vanish: bool


def step_norm_identity_check(traj, tol=1e-9):
    """Check ``(a c / 2) ||x^k - x^{k-1}||^2 <= ||F(x^{k-1}) - F(x^k)||`` per step.

    The unsquared variant is recorded alongside for comparison.
    """
    cfg = traj.config
    a, _ = cfg.lambda_bounds()
    c = cfg.eps_floor(traj.values.shape[1])
    steps = np.array([r.step_norm for r in traj.iterates[1:]])
    drops = np.linalg.norm(np.diff(traj.values, axis=0), axis=1)
    sq = drops - 0.5 * a * c * steps ** 2
    unsq = drops - 0.5 * a * c * steps
    if len(steps) == 0:
        return StepNormReport(sq, unsq, True, 0.0, True)
    q = max(1, int(np.ceil(len(steps) / 4)))
    tail = float(np.mean(steps[-q:]))
    return StepNormReport(sq, unsq, bool(np.all(sq >= -tol)), tail,
                          tail < 10 * cfg.step_tol or traj.termination == "critical_point")
