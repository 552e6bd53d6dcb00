"""Brute-force direct optimisation of the discretised functional.

The path is represented by its node values ``x_0..x_N`` (endpoints fixed)
and the objective is

    sum_i nu_i G( sum_{j=1}^{N-1} alpha_i(x_j) dt ) - m/(2 dt) sum_{j=0}^{N-1} |x_{j+1} - x_j|^2

i.e. a rectangle rule over the free nodes for the information and forward
differences for the kinetic risk.  Maximised by plain gradient ascent with
Armijo backtracking; this is deliberately independent of the shooting
machinery so the two can calibrate one another.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import InputError, StallError
from .functional import Trajectory
from .model import G_eval, alpha_eval, beta_eval, grad_alpha

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DiscretePath:
    """Free interior nodes plus fixed endpoints on a uniform grid."""

    interior: np.ndarray
    x0: np.ndarray
    xf: np.ndarray
    dt: float

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        interior = np.asarray(self.interior, dtype=float).reshape(-1, x0.size)
        if interior.shape[0] < 1:
            raise InputError("a discrete path needs N >= 2")
        object.__setattr__(self, "interior", interior)
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xf", np.atleast_1d(np.asarray(self.xf, dtype=float)))

    @property
    def N(self):
        return self.interior.shape[0] + 1

    @property
    def nodes(self):
        return np.vstack([self.x0, self.interior, self.xf])

    def with_interior(self, interior):
        return DiscretePath(interior, self.x0, self.xf, self.dt)

    @classmethod
    def straight(cls, problem, N):
        if N < 2:
            raise InputError("N must be at least 2")
        s = np.linspace(0.0, 1.0, N + 1)[1:-1, None]
        interior = problem.x0 + s * (problem.xf - problem.x0)
        return cls(interior, problem.x0, problem.xf, problem.horizon / N)

    def to_trajectory(self):
        """Trajectory with forward-difference velocities."""
        return Trajectory.from_positions(self.nodes, self.dt * self.N)


def _check(problem, path):
    if path.x0.size != problem.dim:
        raise InputError("path dimension does not match problem")
    if not (np.allclose(path.x0, problem.x0) and np.allclose(path.xf, problem.xf)):
        raise InputError("path endpoints differ from the problem's")


def discrete_objective(problem, path):
    _check(problem, path)
    info = problem.info
    z = alpha_eval(info, None, path.interior).sum(axis=0) * path.dt
    inc = np.diff(path.nodes, axis=0)
    risk = problem.mass / (2.0 * path.dt) * np.sum(inc * inc)
    return float(np.sum(info.weights * G_eval(info, z)) - risk)


def discrete_gradient(problem, path):
    """Exact gradient of :func:`discrete_objective` w.r.t. the interior nodes."""
    _check(problem, path)
    info = problem.info
    dt = path.dt
    z = alpha_eval(info, None, path.interior).sum(axis=0) * dt
    scale = info.weights * beta_eval(info, z) * dt
    g_info = np.einsum("i,jid->jd", scale, grad_alpha(info, None, path.interior))
    x = path.nodes
    g_risk = -(problem.mass / dt) * (2.0 * x[1:-1] - x[:-2] - x[2:])
    return g_info + g_risk


def optimize_discrete(problem, N=100, max_iter=200_000, gtol=1e-8, init=None,
                      armijo=1e-4, shrink=0.5):
    """Gradient ascent from the straight line (or ``init``) until the largest
    per-node gradient norm drops below ``gtol``.

    Raises
    ------
    StallError
        If backtracking cannot find an ascent step; carries the iterate.
    """
    if N < 4:
        raise InputError("N must be at least 4")
    path = DiscretePath.straight(problem, N) if init is None else init
    f = discrete_objective(problem, path)
    g = discrete_gradient(problem, path)
    step = path.dt / problem.mass
    for it in range(max_iter):
        gnorm = np.max(np.linalg.norm(g, axis=1))
        if gnorm <= gtol:
            logger.info("oracle converged in %d iterations", it)
            return path
        g2 = float(np.sum(g * g))
        step *= 2.0
        while True:
            trial = path.with_interior(path.interior + step * g)
            ft = discrete_objective(problem, trial)
            if ft >= f + armijo * step * g2:
                break
            step *= shrink
            if step < 1e-300 or step * np.sqrt(g2) < 1e-18 * (1.0 + np.max(np.abs(path.interior))):
                raise StallError(f"line search stalled at iteration {it} (|g|={gnorm:.3e})", path=path)
        path, f = trial, ft
        g = discrete_gradient(problem, path)
    logger.warning("oracle hit max_iter=%d with |g|=%.3e", max_iter, np.max(np.linalg.norm(g, axis=1)))
    return path
