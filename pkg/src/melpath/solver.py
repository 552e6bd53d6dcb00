"""Memory Euler-Lagrange solver.

For a frozen memory constant ``K`` the extremals obey the ordinary ODE
``m x'' = -sum_i nu_i K_int,i grad alpha_i(x)``.  The boundary problem is
solved by single shooting on the initial velocity, and ``K`` itself is
found either by maximising the objective of the shot trajectory over the
admissible box or by iterating the self-consistency map
``K <- G'(int alpha)``.
"""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .exceptions import (
    ConvergenceError,
    DivergenceError,
    InputError,
    OptimizationError,
    ShootingError,
)
from .functional import Trajectory, accumulate_alpha, evaluate_objective
from .model import (
    KernelKind,
    KParameter,
    grad_alpha,
    internal_K,
    memory_constant,
)

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 1000
DEFAULT_TOL = 1e-10
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class ShootingResult:
    trajectory: Trajectory
    v0: np.ndarray
    endpoint_error: float
    iterations: int
    K: KParameter = None


@dataclass(frozen=True, eq=False)
class SweepRecord:
    """One evaluation of the objective as a function of the memory constant.

    ``residual`` is ``K - G'(int alpha)`` per component in the reported sign;
    it vanishes exactly at self-consistent constants.
    """

    K: np.ndarray
    objective: float
    residual: np.ndarray
    v0: np.ndarray = field(default=None, repr=False)
    endpoint_error: float = float("nan")

    @property
    def ok(self):
        return bool(np.isfinite(self.objective))


def _threads():
    try:
        return max(1, int(os.environ.get("MELPATH_THREADS", "1")))
    except ValueError:
        return 1


def _as_K(problem, K):
    if isinstance(K, KParameter):
        if len(K) != problem.info.n_points:
            raise InputError(
                f"K has {len(K)} components, problem has {problem.info.n_points} points"
            )
        return K
    return KParameter.for_problem(problem, K)


def _coef(problem, K):
    info = problem.info
    return np.ascontiguousarray(info.weights * internal_K(info, K) / problem.mass)


def _kind(problem):
    return _kernels.GAUSSIAN if problem.info.kernel_kind is KernelKind.GAUSSIAN else _kernels.QUADRATIC


def mel_rhs(problem, K, t, x, v):
    """Acceleration of the frozen-``K`` memory equation at state (x, v)."""
    K = _as_K(problem, K)
    g = grad_alpha(problem.info, t, np.asarray(x, dtype=float))
    return -(_coef(problem, K) @ g)


def integrate(problem, K, v0, steps=DEFAULT_STEPS):
    """RK4 from ``(x0, v0)`` over ``[0, T]`` with ``steps`` uniform steps."""
    if steps < 2:
        raise InputError("steps must be at least 2")
    K = _as_K(problem, K)
    info = problem.info
    v0 = np.asarray(v0, dtype=float).reshape(problem.dim)
    dt = problem.horizon / steps
    X, V, bad = _kernels.rk4_path(
        problem.x0.copy(), v0.copy(), info.centers, _coef(problem, K),
        info.length_scale, info.stiffness, _kind(problem), dt, steps,
    )
    if bad >= 0:
        raise DivergenceError(f"non-finite state at step {bad}", step=bad)
    return Trajectory(np.linspace(0.0, problem.horizon, steps + 1), X, V, dt)


class _EndpointMap:
    """``v0 -> x(T; v0) - xf`` for a fixed problem, ``K`` and grid."""

    def __init__(self, problem, K, steps):
        info = problem.info
        self.args = (info.centers, _coef(problem, K), info.length_scale,
                     info.stiffness, _kind(problem), problem.horizon / steps, steps)
        self.x0 = problem.x0
        self.xf = problem.xf

    def __call__(self, v0):
        return _kernels.rk4_endpoint(self.x0.copy(), np.array(v0, dtype=float), *self.args) - self.xf


def _newton(fmap, v0, tol, max_iter):
    """Damped Newton with a forward-difference Jacobian; returns (v0, |r|, iters, ok)."""
    v = np.array(v0, dtype=float)
    d = v.size
    r = fmap(v)
    nr = float(np.linalg.norm(r)) if np.all(np.isfinite(r)) else np.inf
    best = (v.copy(), nr)
    for it in range(1, max_iter + 1):
        if nr <= tol:
            return v, nr, it - 1, True
        h = 1e-6 * (1.0 + np.linalg.norm(v))
        J = np.empty((d, d))
        for j in range(d):
            e = v.copy()
            e[j] += h
            J[:, j] = (fmap(e) - r) / h
        if not np.all(np.isfinite(J)):
            break
        step = np.linalg.lstsq(J, -r, rcond=None)[0]
        s = 1.0
        while s > 1e-10:
            trial = v + s * step
            rt = fmap(trial)
            nt = float(np.linalg.norm(rt)) if np.all(np.isfinite(rt)) else np.inf
            if nt < (1.0 - 1e-4 * s) * nr:
                break
            s *= 0.5
        else:
            break
        v, r, nr = trial, rt, nt
        if nr < best[1]:
            best = (v.copy(), nr)
    if nr <= tol:
        return v, nr, max_iter, True
    return best[0], best[1], max_iter, False


def shoot(problem, K, steps=DEFAULT_STEPS, tol=DEFAULT_TOL, max_iter=50,
          v0_guess=None, homotopy=True):
    """Find the initial velocity whose RK4 trajectory ends at ``xf``.

    Starts from ``v0_guess`` (default: straight-line velocity).  If damped
    Newton fails from there and ``homotopy`` is set, the solve is repeated
    by continuation in ``K`` from zero, where the straight line is exact.
    """
    if not tol > 0:
        raise InputError("tol must be positive")
    K = _as_K(problem, K)
    straight = (problem.xf - problem.x0) / problem.horizon
    guess = straight if v0_guess is None else np.asarray(v0_guess, dtype=float)
    v0, err, iters, ok = _newton(_EndpointMap(problem, K, steps), guess, tol, max_iter)
    if not ok and homotopy and np.any(K.values != 0):
        v0, err, iters, ok = _continuation(problem, K, steps, tol, max_iter, straight)
    if not ok:
        raise ShootingError(
            f"shooting did not converge for K={K.values}: endpoint error {err:.3e}",
            best_residual=err, best_v0=v0,
        )
    traj = integrate(problem, K, v0, steps)
    err = float(np.linalg.norm(traj.positions[-1] - problem.xf))
    return ShootingResult(traj, v0, err, iters, K)


def _continuation(problem, K, steps, tol, max_iter, v0):
    s, ds, total = 0.0, 0.1, 0
    err = np.inf
    while s < 1.0:
        s_next = min(1.0, s + ds)
        # intermediate constants may leave the admissible box
        kp = KParameter(s_next * K.values, -np.inf, np.inf)
        v_new, err, iters, ok = _newton(_EndpointMap(problem, kp, steps), v0, tol, max_iter)
        total += iters
        if ok:
            s, v0 = s_next, v_new
            ds = min(0.25, ds * 1.5)
        else:
            ds *= 0.5
            if ds < 1e-4:
                return v0, err, total, False
    return v0, err, total, True


def _record(problem, K, shot):
    z = accumulate_alpha(problem, shot.trajectory)
    objective = evaluate_objective(problem, shot.trajectory)
    residual = K.values - memory_constant(problem.info, z)
    return SweepRecord(K.values.copy(), objective, residual, shot.v0, shot.endpoint_error)


def objective_of_K(problem, K, steps=DEFAULT_STEPS, tol=DEFAULT_TOL, v0_guess=None):
    """Shoot at ``K`` and report the objective and self-consistency residual."""
    K = _as_K(problem, K)
    return _record(problem, K, shoot(problem, K, steps, tol, v0_guess=v0_guess))


def _failed(K, n):
    return SweepRecord(np.asarray(K, dtype=float).copy(), float("nan"), np.full(n, np.nan))


def sweep_K(problem, values, steps=DEFAULT_STEPS, tol=DEFAULT_TOL, box=None, threads=None):
    """Evaluate :func:`objective_of_K` at each entry of ``values``.

    Each point is shot independently from the straight-line guess, so the
    result does not depend on evaluation order or thread count.  Failed
    shots yield records with NaN objective.
    """
    n = problem.info.n_points
    base = KParameter.for_problem(problem, box=box)

    def one(v):
        kp = base.with_values(np.broadcast_to(np.asarray(v, dtype=float), (n,)))
        try:
            return objective_of_K(problem, kp, steps, tol)
        except (ShootingError, DivergenceError) as exc:
            logger.warning("sweep point K=%s failed: %s", kp.values, exc)
            return _failed(kp.values, n)

    threads = _threads() if threads is None else threads
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, values))
    return [one(v) for v in values]


def golden_section_max(f, a, b, tol):
    """Maximise a unimodal ``f`` on ``[a, b]`` until the bracket is <= ``tol`` wide."""
    c = b - INVPHI * (b - a)
    d = a + INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _box(problem, box):
    if box is None:
        box = problem.info.default_box()
    if box is None:
        raise InputError("square-root transforms need an explicit K bracket")
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (problem.info.n_points,)) for b in box)
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise InputError("K box must be finite")
    return lo, hi


def optimize_K(problem, steps=DEFAULT_STEPS, grid=64, refine_tol=1e-6, box=None,
               tol=DEFAULT_TOL, K0=None, max_fev=None, threads=None):
    """Maximise the shot objective over the admissible ``K`` box.

    Scalar problems: grid scan with ``grid`` points, then golden-section
    refinement around the best grid point.  Problems with several points of
    interest: bounded Nelder-Mead started at ``K0`` (default: box centre).

    Returns
    -------
    (KParameter, SweepRecord)
    """
    lo, hi = _box(problem, box)
    n = problem.info.n_points
    if np.all(lo == hi):
        K = KParameter(lo, lo, hi)
        return K, objective_of_K(problem, K, steps, tol)
    if n == 1:
        return _optimize_scalar(problem, steps, grid, refine_tol, lo, hi, tol, threads)
    return _optimize_vector(problem, steps, refine_tol, lo, hi, tol, K0, max_fev)


def _optimize_scalar(problem, steps, grid, refine_tol, lo, hi, tol, threads):
    ks = np.linspace(lo[0], hi[0], max(grid, 3))
    records = sweep_K(problem, ks, steps, tol, box=(lo, hi), threads=threads)
    obj = np.array([r.objective for r in records])
    if not np.any(np.isfinite(obj)):
        raise OptimizationError("no grid point could be shot")
    i = int(np.nanargmax(obj))
    a, b = ks[max(i - 1, 0)], ks[min(i + 1, ks.size - 1)]
    warm = {"v0": records[i].v0}

    def M(k):
        try:
            rec = objective_of_K(problem, KParameter([k], lo, hi), steps, tol, warm["v0"])
        except (ShootingError, DivergenceError):
            return -np.inf
        warm["v0"] = rec.v0
        return rec.objective

    k_best, f_best = golden_section_max(M, a, b, refine_tol)
    best = KParameter([k_best], lo, hi)
    if not f_best >= obj[i]:
        best = KParameter([ks[i]], lo, hi)
    return best, objective_of_K(problem, best, steps, tol, warm["v0"])


def _optimize_vector(problem, steps, refine_tol, lo, hi, tol, K0, max_fev):
    n = lo.size
    start = 0.5 * (lo + hi) if K0 is None else np.asarray(
        K0.values if isinstance(K0, KParameter) else K0, dtype=float)
    warm = {"v0": None}
    n_fail = [0]

    def negM(k):
        kp = KParameter(np.clip(k, lo, hi), lo, hi)
        try:
            rec = objective_of_K(problem, kp, steps, tol, warm["v0"])
        except (ShootingError, DivergenceError):
            n_fail[0] += 1
            return np.inf
        warm["v0"] = rec.v0
        return -rec.objective

    res = minimize(
        negM, start, method="Nelder-Mead", bounds=list(zip(lo, hi)),
        options={"xatol": refine_tol, "fatol": 1e-14,
                 "maxfev": max_fev or 1000 * n, "adaptive": False},
    )
    if not np.isfinite(res.fun):
        raise OptimizationError("Nelder-Mead found no point that could be shot")
    logger.info("Nelder-Mead: %d evaluations, %d failed shots, %s", res.nfev, n_fail[0], res.message)
    best = KParameter(np.clip(res.x, lo, hi), lo, hi)
    return best, objective_of_K(problem, best, steps, tol, warm["v0"])


def fixed_point_K(problem, K0, damping=0.5, steps=DEFAULT_STEPS, tol=1e-10,
                  max_iter=500, shoot_tol=DEFAULT_TOL):
    """Damped iteration ``K <- (1-d) K + d G'(int alpha)`` projected to the box."""
    if not 0.0 < damping <= 1.0:
        raise InputError("damping must lie in (0, 1]")
    K = _as_K(problem, K0)
    v0 = None
    for it in range(1, max_iter + 1):
        shot = shoot(problem, K, steps, shoot_tol, v0_guess=v0)
        v0 = shot.v0
        target = memory_constant(problem.info, accumulate_alpha(problem, shot.trajectory))
        new = K.project((1.0 - damping) * K.values + damping * target)
        delta = np.max(np.abs(new.values - K.values))
        K = new
        if delta <= tol:
            logger.info("fixed point reached after %d iterations", it)
            return K
    raise ConvergenceError(f"fixed-point iteration did not converge in {max_iter} steps", last=K)


def tail_K(problem, traj, t_star):
    """Memory constant of the tail ``[t*, T]``: ``G'(int_{t*}^T alpha)``.

    ``t_star`` snaps to the nearest grid node.
    """
    T = traj.times[-1]
    if not 0.0 < t_star < T:
        raise InputError(f"t_star must lie in (0, {T}), got {t_star}")
    j = int(round(t_star / traj.dt))
    j = min(max(j, 0), traj.n_steps - 1)
    tail = Trajectory(traj.times[j:] - traj.times[j], traj.positions[j:],
                      traj.velocities[j:], traj.dt)
    return memory_constant(problem.info, accumulate_alpha(problem, tail))
