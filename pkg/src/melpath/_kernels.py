"""Compiled RK4 loops for the memory equation of motion.

The acceleration is ``a(x) = -sum_i c_i grad alpha_i(x)`` with
``c_i = nu_i K_int,i / m`` already folded in by the caller.
"""
import numpy as np
from numba import njit

GAUSSIAN = 0
QUADRATIC = 1


@njit(cache=True, nogil=True)
def _accel(x, centers, coef, length_scale, stiffness, kind, out):
    d = x.shape[0]
    for j in range(d):
        out[j] = 0.0
    for i in range(centers.shape[0]):
        if coef[i] == 0.0:
            continue
        if kind == GAUSSIAN:
            ell2 = length_scale * length_scale
            r2 = 0.0
            for j in range(d):
                r2 += (x[j] - centers[i, j]) ** 2
            g = coef[i] * np.exp(-r2 / (2.0 * ell2)) / ell2
            for j in range(d):
                # grad alpha = (y - x) k / ell^2, so -c grad alpha = c (x - y) k / ell^2
                out[j] += g * (x[j] - centers[i, j])
        else:
            for j in range(d):
                out[j] -= coef[i] * stiffness * (x[j] - centers[i, j])


@njit(cache=True, nogil=True)
def rk4_path(x0, v0, centers, coef, length_scale, stiffness, kind, dt, n):
    """Classical RK4 on (x' = v, v' = a(x)); returns (X, V, bad_step).

    ``bad_step`` is -1 on success, otherwise the first step whose state is
    not finite (the remaining rows are left as NaN).
    """
    d = x0.shape[0]
    X = np.full((n + 1, d), np.nan)
    V = np.full((n + 1, d), np.nan)
    a1 = np.empty(d)
    a2 = np.empty(d)
    a3 = np.empty(d)
    a4 = np.empty(d)
    tmp = np.empty(d)
    x = x0.copy()
    v = v0.copy()
    X[0] = x
    V[0] = v
    half = 0.5 * dt
    for s in range(n):
        _accel(x, centers, coef, length_scale, stiffness, kind, a1)
        for j in range(d):
            tmp[j] = x[j] + half * v[j]
        _accel(tmp, centers, coef, length_scale, stiffness, kind, a2)
        for j in range(d):
            tmp[j] = x[j] + half * (v[j] + half * a1[j])
        _accel(tmp, centers, coef, length_scale, stiffness, kind, a3)
        for j in range(d):
            tmp[j] = x[j] + dt * (v[j] + half * a2[j])
        _accel(tmp, centers, coef, length_scale, stiffness, kind, a4)
        ok = True
        for j in range(d):
            x[j] += dt * v[j] + dt * dt / 6.0 * (a1[j] + a2[j] + a3[j])
            v[j] += dt / 6.0 * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j])
            if not (np.isfinite(x[j]) and np.isfinite(v[j])):
                ok = False
        if not ok:
            return X, V, s + 1
        X[s + 1] = x
        V[s + 1] = v
    return X, V, -1


@njit(cache=True, nogil=True)
def rk4_endpoint(x0, v0, centers, coef, length_scale, stiffness, kind, dt, n):
    """Like :func:`rk4_path` but only returns the final position."""
    d = x0.shape[0]
    a1 = np.empty(d)
    a2 = np.empty(d)
    a3 = np.empty(d)
    a4 = np.empty(d)
    tmp = np.empty(d)
    x = x0.copy()
    v = v0.copy()
    half = 0.5 * dt
    for s in range(n):
        _accel(x, centers, coef, length_scale, stiffness, kind, a1)
        for j in range(d):
            tmp[j] = x[j] + half * v[j]
        _accel(tmp, centers, coef, length_scale, stiffness, kind, a2)
        for j in range(d):
            tmp[j] = x[j] + half * (v[j] + half * a1[j])
        _accel(tmp, centers, coef, length_scale, stiffness, kind, a3)
        for j in range(d):
            tmp[j] = x[j] + dt * (v[j] + half * a2[j])
        _accel(tmp, centers, coef, length_scale, stiffness, kind, a4)
        for j in range(d):
            x[j] += dt * v[j] + dt * dt / 6.0 * (a1[j] + a2[j] + a3[j])
            v[j] += dt / 6.0 * (a1[j] + 2.0 * a2[j] + 2.0 * a3[j] + a4[j])
        if not np.isfinite(x[0]):
            return x
    return x


# -- catenary time-1 machinery ------------------------------------------------
# Frozen-K flow of m x'' = K k x from (x, p); the integral of (k/2) x^2 over
# [0, 1] is available in closed form because the flow is linear.


@njit(cache=True, nogil=True)
def _linear_flow_alpha_integral(x, p, K, m, k):
    b = np.sqrt(K * k / m)
    c = p / (m * b)
    s2 = np.sinh(2.0 * b) / (2.0 * b)
    sh = np.sinh(b)
    icc = 0.5 * (1.0 + s2)
    iss = 0.5 * (s2 - 1.0)
    ics = sh * sh / (2.0 * b)
    return 0.5 * k * (x * x * icc + 2.0 * x * c * ics + c * c * iss)


@njit(cache=True, nogil=True)
def lambda_closed(x, p, m, k, lo, hi):
    """Root of ``K - 1/(2 sqrt(A(K)))`` by geometric-scan bracketing + bisection.

    Returns NaN when the accumulated integral degenerates or no sign change
    is found in [lo, hi].
    """
    n_scan = 64
    ratio = (hi / lo) ** (1.0 / (n_scan - 1))
    a = lo
    za = _linear_flow_alpha_integral(x, p, a, m, k)
    if not za > 1e-12:
        return np.nan
    ra = a - 0.5 / np.sqrt(za)
    if ra == 0.0:
        return a
    b = a
    found = False
    for _ in range(n_scan - 1):
        b = a * ratio
        zb = _linear_flow_alpha_integral(x, p, b, m, k)
        if not zb > 1e-12:
            return np.nan
        rb = b - 0.5 / np.sqrt(zb)
        if rb == 0.0:
            return b
        if (ra < 0.0) != (rb < 0.0):
            found = True
            break
        a = b
        ra = rb
    if not found:
        return np.nan
    for _ in range(200):
        mid = 0.5 * (a + b)
        if mid == a or mid == b:
            break
        zm = _linear_flow_alpha_integral(x, p, mid, m, k)
        rm = mid - 0.5 / np.sqrt(zm)
        if rm == 0.0:
            return mid
        if (rm < 0.0) == (ra < 0.0):
            a = mid
            ra = rm
        else:
            b = mid
    return 0.5 * (a + b)


@njit(cache=True, nogil=True)
def _lambda_field(x, p, m, k, lo, hi, out):
    lam = lambda_closed(x, p, m, k, lo, hi)
    out[0] = p / m
    out[1] = lam * k * x
    return lam


@njit(cache=True, nogil=True)
def rk4_lambda_flow(x, p, m, k, lo, hi, dt, n):
    """Unit-time RK4 flow of x' = p/m, p' = Lambda(x, p) k x (Lambda re-solved each stage)."""
    k1 = np.empty(2)
    k2 = np.empty(2)
    k3 = np.empty(2)
    k4 = np.empty(2)
    for _ in range(n):
        _lambda_field(x, p, m, k, lo, hi, k1)
        _lambda_field(x + 0.5 * dt * k1[0], p + 0.5 * dt * k1[1], m, k, lo, hi, k2)
        _lambda_field(x + 0.5 * dt * k2[0], p + 0.5 * dt * k2[1], m, k, lo, hi, k3)
        _lambda_field(x + dt * k3[0], p + dt * k3[1], m, k, lo, hi, k4)
        x += dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
        p += dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
        if not (np.isfinite(x) and np.isfinite(p)):
            return np.nan, np.nan
    return x, p
