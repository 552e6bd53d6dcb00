"""Quadrature of the risk-adjusted information functional along sampled paths.

All integrals use the composite trapezoid rule on the trajectory's own
uniform grid.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .exceptions import InputError
from .model import (
    SQRT_EPS,
    G_eval,
    TransformKind,
    alpha_eval,
    internal_K,
    memory_constant,
)


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Positions and velocities sampled on ``t_j = j * dt``, ``j = 0..N``."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    dt: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        x = np.asarray(self.positions, dtype=float)
        v = np.asarray(self.velocities, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if v.ndim == 1:
            v = v[:, None]
        if t.ndim != 1 or t.size < 2:
            raise InputError("trajectory needs at least two grid nodes")
        if x.shape[0] != t.size or v.shape != x.shape:
            raise InputError(
                f"inconsistent trajectory shapes: t{t.shape}, x{x.shape}, v{v.shape}"
            )
        if not self.dt > 0:
            raise InputError("dt must be positive")
        if np.max(np.abs(np.diff(t) - self.dt)) > 1e-12 * max(1.0, t[-1]):
            raise InputError("trajectory grid is not uniform")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "velocities", v)
        object.__setattr__(self, "dt", float(self.dt))

    @classmethod
    def from_positions(cls, positions, horizon):
        """Wrap a node sequence, estimating velocities by finite differences.

        Forward differences are used everywhere except the last node, which
        repeats the final backward difference.
        """
        x = np.asarray(positions, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        n = x.shape[0] - 1
        if n < 1:
            raise InputError("need at least two nodes")
        dt = horizon / n
        v = np.empty_like(x)
        v[:-1] = np.diff(x, axis=0) / dt
        v[-1] = v[-2]
        return cls(np.linspace(0.0, horizon, n + 1), x, v, dt)

    @property
    def n_steps(self):
        return self.times.size - 1

    @property
    def dim(self):
        return self.positions.shape[1]

    def reversed(self):
        """Time-reversed path: same nodes in reverse order, negated velocities."""
        return Trajectory(self.times, self.positions[::-1], -self.velocities[::-1], self.dt)


@dataclass(frozen=True, eq=False)
class AccumulationProfile:
    """Running information ``A``, risk-adjusted ``A_R`` and ``K_t`` per node."""

    times: np.ndarray
    A: np.ndarray
    A_R: np.ndarray
    K_t: np.ndarray

    def rows(self):
        return np.column_stack([self.times, self.A, self.A_R, self.K_t])

    def header(self):
        return ["t", "A", "A_R"] + [f"K_{i + 1}" for i in range(self.K_t.shape[1])]


def _check(problem, traj):
    if traj is None or traj.times.size < 2:
        raise InputError("empty trajectory")
    if traj.dim != problem.dim:
        raise InputError(f"trajectory is {traj.dim}-D, problem is {problem.dim}-D")


def accumulate_alpha(problem, traj):
    """Trapezoid integral of each ``alpha_i`` over the whole path."""
    _check(problem, traj)
    alpha = alpha_eval(problem.info, traj.times[:, None], traj.positions)
    return np.trapezoid(alpha, dx=traj.dt, axis=0)


def risk_integral(problem, traj):
    kinetic = 0.5 * problem.mass * np.sum(traj.velocities**2, axis=1)
    return float(np.trapezoid(kinetic, dx=traj.dt))


def information_term(problem, z):
    info = problem.info
    return float(np.sum(info.weights * G_eval(info, z)))


def evaluate_objective(problem, traj):
    """Risk-adjusted information ``sum_i nu_i G(int alpha_i) - int m|v|^2/2``."""
    z = accumulate_alpha(problem, traj)
    return information_term(problem, z) - risk_integral(problem, traj)


def accumulation_profile(problem, traj):
    """Prefix-integral diagnostics along ``traj``.

    For the square-root transform ``K_t`` is undefined until some
    information has been gathered; those entries are NaN.
    """
    _check(problem, traj)
    info = problem.info
    alpha = alpha_eval(info, traj.times[:, None], traj.positions)
    z = cumulative_trapezoid(alpha, dx=traj.dt, axis=0, initial=0.0)
    A = np.sum(info.weights * G_eval(info, z, strict=False), axis=1)
    kinetic = 0.5 * problem.mass * np.sum(traj.velocities**2, axis=1)
    risk = cumulative_trapezoid(kinetic, dx=traj.dt, initial=0.0)
    K_t = memory_constant(info, z, strict=False)
    if info.transform_kind is TransformKind.SQUARE_ROOT:
        K_t = np.where(z < SQRT_EPS, np.nan, K_t)
    return AccumulationProfile(traj.times.copy(), A, A - risk, K_t)


def modified_energy(problem, traj, K):
    """``m|v|^2/2 + sum_i nu_i K_int,i alpha_i(x)`` at every grid node.

    Conserved by the exact frozen-``K`` flow when alpha is autonomous.
    """
    _check(problem, traj)
    info = problem.info
    k_int = internal_K(info, K)
    alpha = alpha_eval(info, traj.times[:, None], traj.positions)
    kinetic = 0.5 * problem.mass * np.sum(traj.velocities**2, axis=1)
    return kinetic + alpha @ (info.weights * k_int)

