"""Closed-form machinery for the square-root ("catenary") example.

Minimise ``(m/2) int x'^2 + (int (k/2) x^2)^(1/2)`` on [0, 1] with
``x(0) = 0``, ``x(1) = 1``.  For a frozen constant ``K`` the memory equation
is ``m x'' = K k x`` with solution ``sinh(b t) / sinh(b)``, ``b = sqrt(K k / m)``,
and the self-consistent ``K`` satisfies ``K = (1/2) (int (k/2) x_K^2)^(-1/2)``.

The module also builds the phase-space time-1 map whose constant is chosen
point-wise so that the unit-time flow is self-consistent, and measures
whether it preserves area.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.optimize import brentq

from . import _kernels
from .exceptions import BracketError, DomainError, InputError
from .model import (
    SQRT_EPS,
    InfoModel,
    KernelKind,
    MemoryProblem,
    PointOfInterest,
    RiskModel,
    TransformKind,
)
from .solver import golden_section_max

LAMBDA_BRACKET = (1e-3, 1e3)
QUAD_NODES = 20_001


@dataclass(frozen=True)
class CatenaryConfig:
    m: float = 0.1
    k: float = 1.0
    T: float = 1.0
    x0: float = 0.0
    xf: float = 1.0

    def __post_init__(self):
        if not (self.m > 0 and self.k > 0):
            raise InputError("m and k must be positive")

    def problem(self):
        """The same instance expressed for the generic shooting solver."""
        info = InfoModel(
            [PointOfInterest([0.0], 1.0)],
            transform_kind=TransformKind.SQUARE_ROOT,
            transform_sign=-1.0,
            kernel_kind=KernelKind.QUADRATIC,
            stiffness=self.k,
        )
        return MemoryProblem(info, RiskModel(self.m), self.T, [self.x0], [self.xf])


@dataclass(frozen=True)
class PhasePoint:
    x: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.x) and np.isfinite(self.p)):
            raise InputError("phase point must be finite")


def _b(config, K):
    if not K > 0:
        raise InputError(f"K must be positive, got {K}")
    return np.sqrt(K * config.k / config.m)


def closed_form(config, K, t):
    b = _b(config, K)
    return np.sinh(b * np.asarray(t, dtype=float)) / np.sinh(b)


def closed_form_velocity(config, K, t):
    b = _b(config, K)
    return b * np.cosh(b * np.asarray(t, dtype=float)) / np.sinh(b)


def _grid(n):
    return np.linspace(0.0, 1.0, n)


def kinetic_part(config, K, n=QUAD_NODES):
    t = _grid(n)
    return 0.5 * config.m * simpson(closed_form_velocity(config, K, t) ** 2, x=t)


def alpha_integral(config, K, n=QUAD_NODES):
    """``int_0^1 (k/2) x_K(t)^2 dt`` by composite Simpson on ``n`` nodes."""
    t = _grid(n)
    return 0.5 * config.k * simpson(closed_form(config, K, t) ** 2, x=t)


def reduced_objective(config, K, n=QUAD_NODES):
    """The functional evaluated on the frozen-``K`` solution (quadrature)."""
    t = _grid(n)
    x = closed_form(config, K, t)
    v = closed_form_velocity(config, K, t)
    integrand_risk = 0.5 * config.m * v**2
    integrand_alpha = 0.5 * config.k * x**2
    return simpson(integrand_risk, x=t) + np.sqrt(simpson(integrand_alpha, x=t))


def fixed_point_map(config, K, n=QUAD_NODES):
    return 0.5 / np.sqrt(alpha_integral(config, K, n))


def printed_reduced_objective(config, K):
    """Transcribed closed form of the reduced objective; diagnostic only."""
    b = _b(config, K)
    A = config.m * b * np.sinh(2 * b)
    s2 = np.sinh(b) ** 2
    return (2 * K * config.k + A) / (8 * s2) + np.sqrt((A - 2 * K * config.k) / (8 * K * s2))


def printed_fixed_point_map(config, K):
    b = _b(config, K)
    A = config.m * b * np.sinh(2 * b)
    return 0.5 * ((A - 2 * K * config.k) / (8 * K * np.sinh(b) ** 2)) ** -0.5


def extremizer(config, bracket=(1.6, 2.6), tol=1e-9):
    """Minimiser of :func:`reduced_objective` inside ``bracket``."""
    k, _ = golden_section_max(lambda K: -reduced_objective(config, K), *bracket, tol)
    return k


def fixed_point(config, K0=1.0, damping=0.5, tol=1e-12, max_iter=1000):
    """Damped iteration of :func:`fixed_point_map` from ``K0``."""
    K = K0
    for _ in range(max_iter):
        new = (1 - damping) * K + damping * fixed_point_map(config, K)
        if abs(new - K) <= tol:
            return new
        K = new
    raise BracketError(f"fixed-point iteration stalled at K={K}")


# -- time-1 map ---------------------------------------------------------------

def frozen_flow(config, point, K, steps=1000):
    """RK4 trajectory of ``m x'' = K k x`` from ``point`` over unit time.

    Returns (t, x, p) arrays.
    """
    coef = np.array([-K / config.m])
    X, V, bad = _kernels.rk4_path(
        np.array([point.x]), np.array([point.p / config.m]), np.zeros((1, 1)), coef,
        1.0, config.k, _kernels.QUADRATIC, 1.0 / steps, steps,
    )
    if bad >= 0:
        raise DomainError(f"frozen flow diverged at step {bad}")
    return np.linspace(0.0, 1.0, steps + 1), X[:, 0], config.m * V[:, 0]


def flow_alpha_integral(config, point, K, steps=1000):
    """Trapezoid integral of ``(k/2) x^2`` along the unit-time frozen flow."""
    t, x, _ = frozen_flow(config, point, K, steps)
    return np.trapezoid(0.5 * config.k * x**2, x=t)


def _lambda_residual(config, point, K, steps):
    z = flow_alpha_integral(config, point, K, steps)
    if not z >= SQRT_EPS:
        raise DomainError(f"flow from ({point.x}, {point.p}) gathers no information")
    return K - 0.5 / np.sqrt(z)


def lambda_of(config, point, bracket=LAMBDA_BRACKET, steps=1000, rtol=1e-10, n_scan=64):
    """Constant ``K`` that makes the unit-time frozen flow from ``point`` self-consistent.

    A geometric scan over ``bracket`` locates the first sign change of
    ``K - (1/2)(int alpha)^(-1/2)``; bisection then refines it until the
    residual is below ``rtol``.
    """
    if point.x == 0.0 and point.p == 0.0:
        raise DomainError("the rest point at the origin never gathers information")
    lo, hi = bracket
    ks = np.geomspace(lo, hi, n_scan)
    a, ra = ks[0], _lambda_residual(config, point, ks[0], steps)
    for b in ks[1:]:
        rb = _lambda_residual(config, point, b, steps)
        if np.sign(ra) != np.sign(rb):
            break
        a, ra = b, rb
    else:
        raise BracketError(f"no sign change of the self-consistency residual in {bracket}")
    if ra == 0:
        return a
    for _ in range(200):
        mid = 0.5 * (a + b)
        rm = _lambda_residual(config, point, mid, steps)
        if abs(rm) <= rtol or mid in (a, b):
            return mid
        if np.sign(rm) == np.sign(ra):
            a, ra = mid, rm
        else:
            b = mid
    return 0.5 * (a + b)


def lambda_exact(config, point, bracket=LAMBDA_BRACKET):
    """Same root as :func:`lambda_of` using the exact integral of the linear flow."""
    lam = _kernels.lambda_closed(float(point.x), float(point.p), config.m, config.k, *bracket)
    if not np.isfinite(lam):
        raise DomainError(f"Lambda undefined at ({point.x}, {point.p})")
    return lam


def printed_C(config, x, p, K):
    b = _b(config, K)
    m, k = config.m, config.k
    s2b = np.sinh(2 * b)
    return (2 * p * x / K * np.sinh(b) ** 2 + k * x**2 + k * x**2 / (2 * b) * s2b
            - p**2 / (K * m) + p**2 / (2 * b * K * m) * s2b)


def lambda_printed(config, point, bracket=LAMBDA_BRACKET):
    """Root of ``K^2 C(x, p, K) = 1`` with the transcribed ``C``; diagnostic only."""
    f = lambda K: K * K * printed_C(config, point.x, point.p, K) - 1.0  # noqa: E731
    ks = np.geomspace(*bracket, 64)
    vals = np.array([f(K) for K in ks])
    idx = np.nonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))[0]
    if idx.size == 0:
        raise BracketError("no sign change for the transcribed C")
    i = idx[0]
    return brentq(f, ks[i], ks[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)


def time1_map(config, point, mode="along_flow", K=None, steps=1000):
    """Unit-time phase map.

    ``K`` given: flow with that constant (area preserving control).
    ``mode="along_flow"``: the vector field ``(p/m, Lambda(x, p) k x)`` with
    ``Lambda`` re-evaluated at every RK4 stage.
    ``mode="frozen"``: ``Lambda`` evaluated once at ``point`` and held fixed.
    """
    if K is None and mode == "frozen":
        K = lambda_of(config, point)
    if K is not None:
        _, x, p = frozen_flow(config, point, K, steps)
        return PhasePoint(x[-1], p[-1])
    if mode != "along_flow":
        raise InputError(f"unknown time-1 map mode {mode!r}")
    lambda_exact(config, point)
    x, p = _kernels.rk4_lambda_flow(float(point.x), float(point.p), config.m, config.k,
                                    *LAMBDA_BRACKET, 1.0 / steps, steps)
    if not np.isfinite(x):
        raise DomainError(f"Lambda flow from ({point.x}, {point.p}) left the domain")
    return PhasePoint(x, p)


def jacobian_det(config, point, h=1e-3, **kw):
    """Determinant of the central-difference Jacobian of :func:`time1_map`."""
    def phi(dx, dp):
        q = time1_map(config, PhasePoint(point.x + dx, point.p + dp), **kw)
        return np.array([q.x, q.p])

    col_x = (phi(h, 0.0) - phi(-h, 0.0)) / (2 * h)
    col_p = (phi(0.0, h) - phi(0.0, -h)) / (2 * h)
    return col_x[0] * col_p[1] - col_x[1] * col_p[0]


def jacobian_grid(config, xs, ps, h=1e-3, mode="along_flow", K=None):
    """Rows ``(x, p, Lambda, J)`` over the tensor grid; failed cells are dropped.

    Returns (rows, n_missing).
    """
    rows, missing = [], 0
    for x in xs:
        for p in ps:
            pt = PhasePoint(float(x), float(p))
            try:
                lam = lambda_of(config, pt) if K is None else float(K)
                J = jacobian_det(config, pt, h, mode=mode, K=K)
            except (DomainError, BracketError):
                missing += 1
                continue
            rows.append((pt.x, pt.p, lam, J))
    return np.array(rows, dtype=float).reshape(-1, 4), missing
