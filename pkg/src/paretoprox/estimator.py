"""scikit-learn style wrapper around the proximal point driver."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .criticality import is_pareto_critical
from .ppa import PpaConfig, run


class ProximalPointMOO(TransformerMixin, BaseEstimator):
    """Multiobjective proximal point method as an estimator.

    Rows of ``X`` are starting points. ``fit`` runs the method from each row,
    ``transform`` maps rows to terminal points and ``predict`` decides
    Pareto criticality of the rows themselves.

    Parameters
    ----------
    objective : VectorFunction
    feasible_set : ConvexSet
    lam : float
        Constant proximal parameter.
    eps : array-like or None
        Constant weight vector (unit norm); ``None`` gives equal weights.
    step_tol, max_iters, criticality_tol, starts, seed, method
        Forwarded to :class:`paretoprox.ppa.PpaConfig`.

    Attributes
    ----------
    trajectories_ : list of Trajectory
    terminal_points_ : ndarray of shape (n_samples, n_features)
    critical_ : ndarray of bool
        Criticality verdict at each terminal point.
    n_features_in_ : int
    """

    def __init__(self, objective=None, feasible_set=None, lam=1.0, eps=None, step_tol=1e-6,
                 max_iters=10_000, criticality_tol=1e-8, starts=3, seed=0, method="smooth"):
        self.objective = objective
        self.feasible_set = feasible_set
        self.lam = lam
        self.eps = eps
        self.step_tol = step_tol
        self.max_iters = max_iters
        self.criticality_tol = criticality_tol
        self.starts = starts
        self.seed = seed
        self.method = method

    def _config(self):
        return PpaConfig(lam=self.lam, eps=self.eps, step_tol=self.step_tol,
                         max_iters=self.max_iters, criticality_tol=self.criticality_tol,
                         starts=self.starts, seed=self.seed, method=self.method)

    def _validate(self, X, reset):
        if self.objective is None or self.feasible_set is None:
            raise ValueError("objective and feasible_set must be set")
        X = check_array(X, ensure_2d=True, dtype=float)
        if reset:
            self.n_features_in_ = X.shape[1]
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        if X.shape[1] != self.objective.n:
            raise ValueError(f"X has {X.shape[1]} features, objective expects {self.objective.n}")
        return X

    def _run_all(self, X):
        cfg = self._config()
        return [run(self.objective, self.feasible_set, x, cfg) for x in X]

    def fit(self, X, y=None):
        X = self._validate(X, reset=True)
        self.trajectories_ = self._run_all(X)
        self.terminal_points_ = np.array([t.final.x for t in self.trajectories_])
        self.critical_ = np.array([t.final_criticality.critical for t in self.trajectories_])
        return self

    def transform(self, X):
        """Terminal points of runs started at the rows of ``X``."""
        check_is_fitted(self, "trajectories_")
        X = self._validate(X, reset=False)
        return np.array([t.final.x for t in self._run_all(X)])

    def predict(self, X):
        """``True`` where a row of ``X`` is Pareto critical."""
        check_is_fitted(self, "trajectories_")
        X = self._validate(X, reset=False)
        tol = max(self.criticality_tol, 1e-6)
        return np.array([is_pareto_critical(self.objective, self.feasible_set, x, tol=tol).critical
                         for x in X])
