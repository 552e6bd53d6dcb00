"""scikit-learn style wrappers.

``fit`` takes the points of interest as ``X`` (shape ``(n_points, d)``) and
their weights as ``sample_weight``; ``predict`` takes times and returns
positions along the fitted path.

>>> planner = MemoryPathPlanner(x0=[0.0], xf=[2.0], length_scale=0.5)
>>> planner.fit([[1.0]]).K_                              # doctest: +SKIP
array([0.50...])
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InputError
from .functional import evaluate_objective
from .model import (
    InfoModel,
    KernelKind,
    KParameter,
    MemoryProblem,
    PointOfInterest,
    RiskModel,
    TransformKind,
)
from .oracle import discrete_objective, optimize_discrete
from .solver import fixed_point_K, objective_of_K, optimize_K, shoot


class _PathPlannerBase(BaseEstimator):
    def _problem(self, X, sample_weight=None):
        X = check_array(X, dtype=float, ensure_2d=True)
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if X.shape[1] != x0.size:
            raise InputError(f"points are {X.shape[1]}-D but x0 is {x0.size}-D")
        w = np.ones(X.shape[0]) if sample_weight is None else np.asarray(sample_weight, dtype=float)
        if w.shape != (X.shape[0],):
            raise InputError("sample_weight must have one entry per point")
        info = InfoModel(
            [PointOfInterest(y, nu) for y, nu in zip(X, w)],
            length_scale=self.length_scale, rate=self.rate,
            transform_kind=TransformKind.SATURATING, kernel_kind=KernelKind.GAUSSIAN,
        )
        return MemoryProblem(info, RiskModel(self.mass), self.horizon, x0, self.xf)

    def _times(self, t):
        t = np.asarray(t, dtype=float)
        if t.ndim > 1:
            t = check_array(t, dtype=float).ravel()
        if np.any(t < 0) or np.any(t > self.horizon):
            raise InputError(f"times must lie in [0, {self.horizon}]")
        return t

    def score(self, X, sample_weight=None):
        """Objective of the fitted path under the information field ``X``."""
        check_is_fitted(self, "trajectory_")
        return evaluate_objective(self._problem(X, sample_weight), self.trajectory_)


class MemoryPathPlanner(_PathPlannerBase):
    """Path planner solving the memory Euler-Lagrange equation.

    Parameters
    ----------
    x0, xf : array-like
        Fixed endpoints.
    horizon, mass, length_scale, rate : float
        Problem data (saturating transform, Gaussian kernel).
    method : {"optimize", "fixed_point"}
        How the memory constant is chosen.
    steps, tol, grid, refine_tol, max_fev
        Solver controls, see :func:`melpath.solver.optimize_K`.

    Attributes
    ----------
    K_ : ndarray of shape (n_points,)
    v0_ : ndarray of shape (d,)
    trajectory_ : Trajectory
    objective_ : float
    residual_ : ndarray of shape (n_points,)
    """

    def __init__(self, x0=(0.0,), xf=(1.0,), horizon=1.0, mass=0.1, length_scale=1.0,
                 rate=1.0, method="optimize", steps=1000, tol=1e-10, grid=64,
                 refine_tol=1e-6, max_fev=None):
        self.x0 = x0
        self.xf = xf
        self.horizon = horizon
        self.mass = mass
        self.length_scale = length_scale
        self.rate = rate
        self.method = method
        self.steps = steps
        self.tol = tol
        self.grid = grid
        self.refine_tol = refine_tol
        self.max_fev = max_fev

    def fit(self, X, y=None, sample_weight=None):
        problem = self._problem(X, sample_weight)
        if self.method == "optimize":
            K, _ = optimize_K(problem, steps=self.steps, grid=self.grid,
                              refine_tol=self.refine_tol, tol=self.tol, max_fev=self.max_fev)
        elif self.method == "fixed_point":
            K0 = KParameter.for_problem(problem, np.full(problem.info.n_points, 0.5 * self.rate))
            K = fixed_point_K(problem, K0, steps=self.steps, shoot_tol=self.tol)
        else:
            raise InputError(f"unknown method {self.method!r}")
        rec = objective_of_K(problem, K, self.steps, self.tol)
        shot = shoot(problem, K, self.steps, self.tol, v0_guess=rec.v0)
        self.problem_ = problem
        self.K_ = K.values.copy()
        self.v0_ = shot.v0
        self.trajectory_ = shot.trajectory
        self.objective_ = rec.objective
        self.residual_ = rec.residual
        self.endpoint_error_ = shot.endpoint_error
        self.n_features_in_ = problem.dim
        return self

    def predict(self, t):
        """Positions at times ``t``, shape ``(len(t), d)``.

        Cubic Hermite interpolation through the RK4 nodes and velocities.
        """
        check_is_fitted(self, "trajectory_")
        tr = self.trajectory_
        spline = CubicHermiteSpline(tr.times, tr.positions, tr.velocities, axis=0)
        return spline(self._times(t))


class DiscretePathPlanner(_PathPlannerBase):
    """Direct gradient ascent on the discretised objective (the oracle)."""

    def __init__(self, x0=(0.0,), xf=(1.0,), horizon=1.0, mass=0.1, length_scale=1.0,
                 rate=1.0, n_nodes=100, gtol=1e-8, max_iter=200_000):
        self.x0 = x0
        self.xf = xf
        self.horizon = horizon
        self.mass = mass
        self.length_scale = length_scale
        self.rate = rate
        self.n_nodes = n_nodes
        self.gtol = gtol
        self.max_iter = max_iter

    def fit(self, X, y=None, sample_weight=None):
        problem = self._problem(X, sample_weight)
        path = optimize_discrete(problem, self.n_nodes, self.max_iter, self.gtol)
        self.problem_ = problem
        self.path_ = path
        self.trajectory_ = path.to_trajectory()
        self.objective_ = discrete_objective(problem, path)
        self.n_features_in_ = problem.dim
        return self

    def predict(self, t):
        """Piecewise-linear positions at times ``t``."""
        check_is_fitted(self, "path_")
        t = self._times(t)
        nodes, times = self.path_.nodes, self.trajectory_.times
        return np.column_stack([np.interp(t, times, nodes[:, j]) for j in range(nodes.shape[1])])
