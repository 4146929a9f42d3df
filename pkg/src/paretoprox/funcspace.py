"""Structured locally Lipschitz functions with exact limiting subdifferentials.

Scalar functions are built from smooth atoms through a closed grammar::

    Smooth(atom) | MaxOf([atoms]) | MinOf([atoms]) | ExpOf(inner)

``ExpOf`` is pushed through to the atoms (``exp(max a_j) = max exp(a_j)``),
so every function normalizes to a max or a min of smooth atoms and the
limiting (Mordukhovich) subdifferential has a finite representation.
"""

from dataclasses import dataclass, field

import numpy as np

from .minnorm import min_norm_point

__all__ = [
    "SmoothAtom", "Affine", "Quadratic", "NormSqShift", "ExpAtom", "Polynomial",
    "SumAtom", "CustomAtom", "ScalarFunction", "Smooth", "MaxOf", "MinOf", "ExpOf",
    "ConvexPiece", "SubdiffSet", "VectorFunction", "eval_vector", "limiting_subdiff",
    "clarke_subdiff", "frechet_subdiff", "exp_transform", "hull_vertices",
    "atom_from_dict", "function_from_dict", "estimate_lipschitz",
    "DEFAULT_ACTIVITY_TOL",
]

DEFAULT_ACTIVITY_TOL = 1e-9


def _vec(x):
    return np.atleast_1d(np.asarray(x, dtype=float))


# ---------------------------------------------------------------------------
# smooth atoms


class SmoothAtom:
    """A C^1 scalar map with an analytic gradient."""

    descriptor = "abstract"
    n = None

    def value(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)

    def __add__(self, other):
        return SumAtom([self, other])

    def to_dict(self):
        raise NotImplementedError


@dataclass(eq=False)
class Affine(SmoothAtom):
    """``a.x + c``"""

    a: np.ndarray
    c: float = 0.0
    descriptor = "affine"

    def __post_init__(self):
        self.a = _vec(self.a)
        self.c = float(self.c)
        self.n = self.a.size

    def value(self, x):
        return float(self.a @ _vec(x) + self.c)

    def grad(self, x):
        return self.a.copy()

    def to_dict(self):
        return {"type": "affine", "a": self.a.tolist(), "c": self.c}


@dataclass(eq=False)
class Quadratic(SmoothAtom):
    """``x^T Q x + b.x + c`` (no factor one half)."""

    Q: np.ndarray
    b: np.ndarray = None
    c: float = 0.0
    descriptor = "quadratic"

    def __post_init__(self):
        self.Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        if self.Q.shape[0] != self.Q.shape[1]:
            raise ValueError("Q must be square")
        self.n = self.Q.shape[0]
        self.b = np.zeros(self.n) if self.b is None else _vec(self.b)
        if self.b.size != self.n:
            raise ValueError("b has the wrong length")
        self.c = float(self.c)

    def value(self, x):
        x = _vec(x)
        return float(x @ self.Q @ x + self.b @ x + self.c)

    def grad(self, x):
        x = _vec(x)
        return (self.Q + self.Q.T) @ x + self.b

    def to_dict(self):
        return {"type": "quadratic", "Q": self.Q.tolist(), "b": self.b.tolist(), "c": self.c}


@dataclass(eq=False)
class NormSqShift(SmoothAtom):
    """``weight * ||x - center||^2 + offset``"""

    center: np.ndarray
    weight: float = 1.0
    offset: float = 0.0
    descriptor = "norm_sq_shift"

    def __post_init__(self):
        self.center = _vec(self.center)
        self.weight = float(self.weight)
        self.offset = float(self.offset)
        self.n = self.center.size

    def value(self, x):
        d = _vec(x) - self.center
        return float(self.weight * (d @ d) + self.offset)

    def grad(self, x):
        return 2.0 * self.weight * (_vec(x) - self.center)

    def to_dict(self):
        return {"type": "norm_sq_shift", "center": self.center.tolist(),
                "weight": self.weight, "offset": self.offset}


@dataclass(eq=False)
class ExpAtom(SmoothAtom):
    """``exp(inner(x))``"""

    inner: SmoothAtom
    descriptor = "exp_compose"

    def __post_init__(self):
        self.n = self.inner.n

    def value(self, x):
        return float(np.exp(self.inner.value(x)))

    def grad(self, x):
        return np.exp(self.inner.value(x)) * self.inner.grad(x)

    def to_dict(self):
        return {"type": "exp", "inner": self.inner.to_dict()}


@dataclass(eq=False)
class Polynomial(SmoothAtom):
    """``sum_t coefs[t] * prod_j x_j ** powers[t, j]``"""

    coefs: np.ndarray
    powers: np.ndarray
    descriptor = "custom_polynomial"

    def __post_init__(self):
        self.coefs = _vec(self.coefs)
        self.powers = np.atleast_2d(np.asarray(self.powers, dtype=int))
        if self.powers.shape[0] != self.coefs.size:
            raise ValueError("one exponent row per coefficient")
        if np.any(self.powers < 0):
            raise ValueError("exponents must be nonnegative")
        self.n = self.powers.shape[1]

    def value(self, x):
        x = _vec(x)
        return float(self.coefs @ np.prod(x[None, :] ** self.powers, axis=1))

    def grad(self, x):
        x = _vec(x)
        g = np.zeros(self.n)
        for coef, p in zip(self.coefs, self.powers):
            for j in range(self.n):
                if p[j] == 0:
                    continue
                q = p.copy()
                q[j] -= 1
                g[j] += coef * p[j] * np.prod(x ** q)
        return g

    def to_dict(self):
        return {"type": "polynomial", "coefs": self.coefs.tolist(), "powers": self.powers.tolist()}


@dataclass(eq=False)
class SumAtom(SmoothAtom):
    terms: list
    descriptor = "sum"

    def __post_init__(self):
        flat = []
        for t in self.terms:
            flat.extend(t.terms if isinstance(t, SumAtom) else [t])
        self.terms = flat
        dims = {t.n for t in self.terms}
        if len(dims) != 1:
            raise ValueError(f"dimension mismatch among summed atoms: {sorted(dims)}")
        self.n = dims.pop()

    def value(self, x):
        return float(sum(t.value(x) for t in self.terms))

    def grad(self, x):
        return sum(t.grad(x) for t in self.terms)

    def to_dict(self):
        return {"type": "sum", "terms": [t.to_dict() for t in self.terms]}


@dataclass(eq=False)
class CustomAtom(SmoothAtom):
    """User-supplied value and gradient callables (not serializable)."""

    fun: object
    jac: object
    n: int = 1
    descriptor = "custom"

    def value(self, x):
        return float(self.fun(_vec(x)))

    def grad(self, x):
        return _vec(self.jac(_vec(x)))

    def to_dict(self):
        raise TypeError("custom atoms cannot be serialized")


def atom_from_dict(d):
    t = d["type"]
    if t == "affine":
        return Affine(d["a"], d.get("c", 0.0))
    if t == "quadratic":
        return Quadratic(d["Q"], d.get("b"), d.get("c", 0.0))
    if t == "norm_sq_shift":
        return NormSqShift(d["center"], d.get("weight", 1.0), d.get("offset", 0.0))
    if t == "exp":
        return ExpAtom(atom_from_dict(d["inner"]))
    if t == "polynomial":
        return Polynomial(d["coefs"], d["powers"])
    if t == "sum":
        return SumAtom([atom_from_dict(s) for s in d["terms"]])
    raise ValueError(f"unknown atom type {t!r}")


# ---------------------------------------------------------------------------
# subdifferential representation


@dataclass(eq=False)
class ConvexPiece:
    generators: np.ndarray
    hull: bool = True

    def __post_init__(self):
        self.generators = np.atleast_2d(np.asarray(self.generators, dtype=float))
        if self.generators.shape[0] == 0:
            raise ValueError("empty generator piece")
        if not np.all(np.isfinite(self.generators)):
            raise ValueError("non-finite subgradient generator")

    def components(self):
        """Convex components: the hull itself, or each generator alone."""
        if self.hull or len(self.generators) == 1:
            return [self.generators]
        return [g[None, :] for g in self.generators]


@dataclass(eq=False)
class SubdiffSet:
    """Union over pieces of (hull of generators | discrete generators).

    ``flags`` records cases where the finite representation is not known to
    be exact (for instance a dropped non-vertex active gradient in n > 1).
    """

    pieces: list
    flags: list = field(default_factory=list)

    @property
    def is_empty(self):
        return len(self.pieces) == 0

    def components(self):
        out = []
        for p in self.pieces:
            out.extend(p.components())
        return out

    def generators(self):
        if self.is_empty:
            return np.zeros((0, 0))
        return np.vstack([p.generators for p in self.pieces])

    def distance(self, v):
        """Euclidean distance from ``v`` to the represented set."""
        if self.is_empty:
            return np.inf
        v = _vec(v)
        return min(min_norm_point(C - v).norm for C in self.components())

    def contains(self, v, tol=1e-8):
        return self.distance(v) <= tol

    def scaled(self, factor):
        return SubdiffSet([ConvexPiece(factor * p.generators, p.hull) for p in self.pieces],
                          list(self.flags))

    def shifted(self, v):
        v = _vec(v)
        return SubdiffSet([ConvexPiece(p.generators + v, p.hull) for p in self.pieces],
                          list(self.flags))


def _unique_rows(G, tol=1e-12):
    out = []
    for g in G:
        if not any(np.max(np.abs(g - h)) <= tol * max(1.0, np.max(np.abs(h))) for h in out):
            out.append(g)
    return np.array(out)


def hull_vertices(G, tol=1e-12):
    """Rows of ``G`` that are extreme points of ``conv(G)`` (duplicates merged)."""
    G = _unique_rows(np.atleast_2d(np.asarray(G, dtype=float)), tol)
    if len(G) <= 2:
        return G
    keep = []
    for i in range(len(G)):
        others = np.delete(G, i, axis=0)
        d = min_norm_point(others - G[i]).norm
        if d > tol * max(1.0, float(np.max(np.abs(G)))):
            keep.append(i)
    return G[keep]


# ---------------------------------------------------------------------------
# scalar functions


class ScalarFunction:
    """Base of the scalar grammar.

    Attributes
    ----------
    lipschitz_bound : float or None
        Lipschitz constant on the problem box, if known.
    """

    kind = "abstract"
    lipschitz_bound = None

    def normalized(self):
        """Return ``(mode, atoms)`` with ``mode`` in ``{"max", "min"}``."""
        raise NotImplementedError

    @property
    def n(self):
        return self.normalized()[1][0].n

    def value(self, x):
        mode, atoms = self.normalized()
        vals = [a.value(x) for a in atoms]
        return max(vals) if mode == "max" else min(vals)

    def __call__(self, x):
        return self.value(x)

    def active_atoms(self, x, activity_tol=DEFAULT_ACTIVITY_TOL):
        mode, atoms = self.normalized()
        vals = np.array([a.value(x) for a in atoms])
        best = vals.max() if mode == "max" else vals.min()
        return [i for i, v in enumerate(vals) if abs(v - best) <= activity_tol]

    def add_smooth(self, atom):
        """``self + atom`` kept inside the grammar."""
        mode, atoms = self.normalized()
        new = [SumAtom([a, atom]) for a in atoms]
        if len(new) == 1:
            return Smooth(new[0], lipschitz_bound=None)
        return (MaxOf if mode == "max" else MinOf)(new)

    def shift(self, c):
        """``self + c`` for a scalar constant ``c``."""
        return self.add_smooth(Affine(np.zeros(self.n), c))

    def to_dict(self):
        raise NotImplementedError

    def _meta(self, d):
        if self.lipschitz_bound is not None:
            d["lipschitz_bound"] = self.lipschitz_bound
        return d


def _check_atoms(atoms):
    atoms = list(atoms)
    if not atoms:
        raise ValueError("atom list must be nonempty")
    dims = {a.n for a in atoms}
    if len(dims) != 1:
        raise ValueError(f"atoms disagree on dimension: {sorted(dims)}")
    return atoms


class Smooth(ScalarFunction):
    kind = "smooth"

    def __init__(self, atom, lipschitz_bound=None):
        self.atom = atom
        self.lipschitz_bound = lipschitz_bound

    def normalized(self):
        return "max", [self.atom]

    def to_dict(self):
        return self._meta({"kind": "smooth", "atom": self.atom.to_dict()})

    def __repr__(self):
        return f"Smooth({self.atom!r})"


class MaxOf(ScalarFunction):
    kind = "max"

    def __init__(self, atoms, lipschitz_bound=None):
        self.atoms = _check_atoms(atoms)
        self.lipschitz_bound = lipschitz_bound

    def normalized(self):
        return "max", self.atoms

    def to_dict(self):
        return self._meta({"kind": "max", "atoms": [a.to_dict() for a in self.atoms]})

    def __repr__(self):
        return f"MaxOf({self.atoms!r})"


class MinOf(ScalarFunction):
    kind = "min"

    def __init__(self, atoms, lipschitz_bound=None):
        self.atoms = _check_atoms(atoms)
        self.lipschitz_bound = lipschitz_bound

    def normalized(self):
        return "min", self.atoms

    def to_dict(self):
        return self._meta({"kind": "min", "atoms": [a.to_dict() for a in self.atoms]})

    def __repr__(self):
        return f"MinOf({self.atoms!r})"


class ExpOf(ScalarFunction):
    """``exp(inner)``; exp is increasing so it commutes with max and min."""

    kind = "exp"

    def __init__(self, inner, lipschitz_bound=None):
        if not isinstance(inner, ScalarFunction):
            raise TypeError("ExpOf wraps a ScalarFunction")
        self.inner = inner
        self.lipschitz_bound = lipschitz_bound

    def normalized(self):
        mode, atoms = self.inner.normalized()
        return mode, [ExpAtom(a) for a in atoms]

    def to_dict(self):
        return self._meta({"kind": "exp", "inner": self.inner.to_dict()})

    def __repr__(self):
        return f"ExpOf({self.inner!r})"


def function_from_dict(d):
    kind = d.get("kind")
    lip = d.get("lipschitz_bound")
    if kind == "smooth":
        return Smooth(atom_from_dict(d["atom"]), lipschitz_bound=lip)
    if kind == "max":
        return MaxOf([atom_from_dict(a) for a in d["atoms"]], lipschitz_bound=lip)
    if kind == "min":
        return MinOf([atom_from_dict(a) for a in d["atoms"]], lipschitz_bound=lip)
    if kind == "exp":
        return ExpOf(function_from_dict(d["inner"]), lipschitz_bound=lip)
    raise ValueError(f"unknown function kind {kind!r}")


# ---------------------------------------------------------------------------
# subdifferential oracles


def _check_point(f, x):
    x = _vec(x)
    if x.size != f.n:
        raise ValueError(f"point has dimension {x.size}, function expects {f.n}")
    if not np.all(np.isfinite(x)):
        raise ValueError("point must be finite")
    return x


def limiting_subdiff(f, x, activity_tol=DEFAULT_ACTIVITY_TOL):
    """Exact limiting subdifferential of a structured function at ``x``.

    For a max of C^1 atoms the set is the convex hull of the active
    gradients (one hull piece). For a min it is the discrete set of active
    gradients that are extreme points of their hull; the others are never
    the strict minimum to first order. Each kept gradient becomes its own
    singleton piece.
    """
    if activity_tol <= 0:
        raise ValueError("activity_tol must be positive")
    if not isinstance(f, ScalarFunction):
        raise TypeError(f"unsupported function type {type(f).__name__}")
    x = _check_point(f, x)
    mode, atoms = f.normalized()
    active = f.active_atoms(x, activity_tol)
    G = np.array([atoms[i].grad(x) for i in active])
    flags = []
    if mode == "max":
        return SubdiffSet([ConvexPiece(_unique_rows(G), hull=True)], flags)
    U = _unique_rows(G)
    if len(U) < len(G):
        flags.append("tangential")
    V = hull_vertices(U)
    if len(V) < len(U) and x.size > 1:
        flags.append("second_order")
    return SubdiffSet([ConvexPiece(v[None, :], hull=False) for v in V], flags)


def clarke_subdiff(f, x, activity_tol=DEFAULT_ACTIVITY_TOL):
    """Clarke generalized gradient: one hull piece over all limiting generators."""
    lim = limiting_subdiff(f, x, activity_tol)
    return SubdiffSet([ConvexPiece(hull_vertices(lim.generators()), hull=True)], list(lim.flags))


def frechet_subdiff(f, x, activity_tol=DEFAULT_ACTIVITY_TOL):
    """Regular subdifferential; empty at min-kinks with distinct active gradients."""
    x = _check_point(f, x)
    mode, atoms = f.normalized()
    G = _unique_rows(np.array([atoms[i].grad(x) for i in f.active_atoms(x, activity_tol)]))
    if mode == "max" or len(G) == 1:
        return SubdiffSet([ConvexPiece(G, hull=True)])
    return SubdiffSet([])


# ---------------------------------------------------------------------------
# vector functions


class VectorFunction:
    """``F = (f_1, ..., f_m)`` with components sharing the dimension ``n``."""

    def __init__(self, components):
        components = list(components)
        if not components:
            raise ValueError("a vector function needs at least one component")
        for c in components:
            if not isinstance(c, ScalarFunction):
                raise TypeError("components must be ScalarFunction instances")
        dims = {c.n for c in components}
        if len(dims) != 1:
            raise ValueError(f"components disagree on dimension: {sorted(dims)}")
        self.components = components

    @property
    def m(self):
        return len(self.components)

    @property
    def n(self):
        return self.components[0].n

    def __call__(self, x):
        return eval_vector(self, x)

    def __getitem__(self, i):
        return self.components[i]

    def __len__(self):
        return self.m

    def to_dict(self):
        return [c.to_dict() for c in self.components]

    @classmethod
    def from_dict(cls, items):
        return cls([function_from_dict(d) for d in items])

    def __repr__(self):
        return f"VectorFunction({self.components!r})"


def eval_vector(F, x):
    x = _vec(x)
    if x.size != F.n:
        raise ValueError(f"point has dimension {x.size}, F expects {F.n}")
    return np.array([f.value(x) for f in F.components])


def exp_transform(F):
    """Componentwise exponential; weak Pareto sets are unchanged."""
    return VectorFunction([ExpOf(f) for f in F.components])


def estimate_lipschitz(f, lower, upper, samples=256, seed=0):
    """1.5 times the largest sampled gradient norm over a box."""
    if f.lipschitz_bound is not None:
        return float(f.lipschitz_bound)
    lower, upper = _vec(lower), _vec(upper)
    rng = np.random.default_rng(seed)
    mode, atoms = f.normalized()
    pts = rng.uniform(lower, upper, size=(samples, lower.size))
    best = 0.0
    for x in pts:
        for a in atoms:
            best = max(best, float(np.linalg.norm(a.grad(x))))
    return 1.5 * best
