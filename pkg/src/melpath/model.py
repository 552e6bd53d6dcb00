"""Problem definitions: information kernels, saturating transforms, risk.

A problem is the triple (risk Lagrangian, path-history information term,
boundary data).  The information term is a weighted sum over points of
interest ``y_i`` of ``G(integral of alpha_i along the path)``, where
``alpha_i`` is a kernel centred at ``y_i`` and ``G`` a concave transform.

Two sign conventions coexist.  Internally the memory constant is
``K_int = G'(z)`` and the equation of motion is ``m x'' = -sum nu_i K_int,i
grad alpha_i``.  Reported constants ("reported sign") are
``K = transform_sign * K_int`` so that they are positive for both the
saturating exploration model and the square-root catenary model.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .exceptions import DomainError, InputError

#: lower clamp on the accumulated integral for the square-root transform
SQRT_EPS = 1e-12


class TransformKind(str, Enum):
    SATURATING = "saturating"
    SQUARE_ROOT = "square_root"
    LINEAR = "linear"


class KernelKind(str, Enum):
    GAUSSIAN = "gaussian"
    QUADRATIC = "quadratic"


def _as_vector(x, name):
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if arr.ndim != 1:
        raise InputError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} must be finite")
    return arr


@dataclass(frozen=True, eq=False)
class PointOfInterest:
    """A location ``position`` carrying ``weight`` units of information."""

    position: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "position", _as_vector(self.position, "position"))
        if not (np.isfinite(self.weight) and self.weight >= 0):
            raise InputError(f"weight must be nonnegative, got {self.weight}")
        object.__setattr__(self, "weight", float(self.weight))

    @property
    def dim(self):
        return self.position.shape[0]


@dataclass(frozen=True, eq=False)
class InfoModel:
    """Data defining the path-history term ``sum_i nu_i G(int alpha_i dt)``.

    Parameters
    ----------
    points : sequence of PointOfInterest
    length_scale : float
        Gaussian kernel width ``ell``.
    rate : float
        Learning rate ``lambda`` of the saturating transform; slope of the
        linear transform.
    transform_kind : TransformKind
    transform_sign : {+1, -1}
        Orientation of ``G``.  The catenary uses ``SQUARE_ROOT`` with -1.
    kernel_kind : KernelKind
        ``GAUSSIAN``: ``exp(-|x-y|^2 / (2 ell^2))``.
        ``QUADRATIC``: ``(stiffness/2) |x-y|^2``.
    stiffness : float
        Spring constant of the quadratic kernel.
    """

    points: tuple
    length_scale: float = 1.0
    rate: float = 1.0
    transform_kind: TransformKind = TransformKind.SATURATING
    transform_sign: float = 1.0
    kernel_kind: KernelKind = KernelKind.GAUSSIAN
    stiffness: float = 1.0
    centers: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        pts = tuple(
            p if isinstance(p, PointOfInterest) else PointOfInterest(*p)
            for p in self.points
        )
        if not pts:
            raise InputError("at least one point of interest is required")
        dims = {p.dim for p in pts}
        if len(dims) != 1:
            raise InputError(f"points of interest have mixed dimensions {dims}")
        if not self.length_scale > 0:
            raise InputError("length_scale must be positive")
        if not self.rate > 0:
            raise InputError("rate must be positive")
        if not self.stiffness > 0:
            raise InputError("stiffness must be positive")
        if self.transform_sign not in (1, -1, 1.0, -1.0):
            raise InputError("transform_sign must be +1 or -1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "transform_kind", TransformKind(self.transform_kind))
        object.__setattr__(self, "kernel_kind", KernelKind(self.kernel_kind))
        object.__setattr__(self, "transform_sign", float(self.transform_sign))
        object.__setattr__(self, "centers", np.array([p.position for p in pts]))
        object.__setattr__(self, "weights", np.array([p.weight for p in pts]))

    @property
    def dim(self):
        return self.centers.shape[1]

    @property
    def n_points(self):
        return self.centers.shape[0]

    def default_box(self):
        """Admissible range of the (reported-sign) memory constant, or None.

        The square-root transform is unbounded above, so callers must
        supply their own bracket.
        """
        if self.transform_kind is TransformKind.SATURATING:
            return 0.0, self.rate
        if self.transform_kind is TransformKind.LINEAR:
            return self.rate, self.rate
        return None


@dataclass(frozen=True)
class RiskModel:
    """Kinetic risk ``L = m |v|^2 / 2``."""

    mass: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise InputError("mass must be positive")


@dataclass(frozen=True, eq=False)
class MemoryProblem:
    """A fixed-endpoint instance: maximise information minus risk over [0, T]."""

    info: InfoModel
    risk: RiskModel
    horizon: float
    x0: np.ndarray
    xf: np.ndarray

    def __post_init__(self):
        if not self.horizon > 0:
            raise InputError("horizon must be positive")
        x0 = _as_vector(self.x0, "x0")
        xf = _as_vector(self.xf, "xf")
        if x0.shape != xf.shape:
            raise InputError("x0 and xf have different dimensions")
        if x0.shape[0] != self.info.dim:
            raise InputError(
                f"endpoints are {x0.shape[0]}-D but points of interest are {self.info.dim}-D"
            )
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "xf", xf)
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dim(self):
        return self.x0.shape[0]

    @property
    def mass(self):
        return self.risk.mass


@dataclass(frozen=True, eq=False)
class KParameter:
    """Memory constants (reported sign), one per point of interest, with a box."""

    values: np.ndarray
    box_lo: np.ndarray
    box_hi: np.ndarray

    def __post_init__(self):
        vals = _as_vector(self.values, "K")
        lo = np.broadcast_to(np.asarray(self.box_lo, dtype=float), vals.shape).copy()
        hi = np.broadcast_to(np.asarray(self.box_hi, dtype=float), vals.shape).copy()
        if np.any(lo > hi):
            raise InputError("box_lo exceeds box_hi")
        tol = 1e-12 * np.maximum(1.0, np.abs(hi))
        if np.any(vals < lo - tol) or np.any(vals > hi + tol):
            raise InputError(f"K={vals} outside box [{lo}, {hi}]")
        object.__setattr__(self, "values", np.clip(vals, lo, hi))
        object.__setattr__(self, "box_lo", lo)
        object.__setattr__(self, "box_hi", hi)

    def __len__(self):
        return self.values.shape[0]

    def with_values(self, values):
        return KParameter(values, self.box_lo, self.box_hi)

    def project(self, values):
        return KParameter(np.clip(values, self.box_lo, self.box_hi), self.box_lo, self.box_hi)

    @classmethod
    def for_problem(cls, problem, values=None, box=None):
        """Build a parameter for ``problem``; scalars broadcast to every point."""
        n = problem.info.n_points
        if box is None:
            box = problem.info.default_box()
            if box is None:
                box = (0.0, np.inf)
        lo, hi = box
        if values is None:
            hi_finite = np.where(np.isfinite(hi), hi, lo)
            values = 0.5 * (np.asarray(lo, dtype=float) + hi_finite)
        values = np.broadcast_to(np.asarray(values, dtype=float), (n,))
        return cls(values, lo, hi)


def kernel(x, y, length_scale):
    """Gaussian kernel ``exp(-|x-y|^2 / (2 ell^2))``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape[-1] != y.shape[-1]:
        raise InputError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not length_scale > 0:
        raise InputError("length_scale must be positive")
    out = np.exp(-np.sum((x - y) ** 2, axis=-1) / (2.0 * length_scale**2))
    return float(out) if out.ndim == 0 else out


def _check_positions(info, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x[None]
    if x.shape[-1] != info.dim:
        raise InputError(f"position has dimension {x.shape[-1]}, problem is {info.dim}-D")
    return x


def alpha_eval(info, t, x):
    """Kernel values ``alpha_i(x)`` for every point of interest.

    ``x`` may carry leading batch axes; the result has shape
    ``x.shape[:-1] + (n_points,)``.  ``t`` is accepted for interface
    generality; both shipped kernels are autonomous.
    """
    x = _check_positions(info, x)
    diff = x[..., None, :] - info.centers
    r2 = np.sum(diff * diff, axis=-1)
    if info.kernel_kind is KernelKind.GAUSSIAN:
        return np.exp(-r2 / (2.0 * info.length_scale**2))
    return 0.5 * info.stiffness * r2


def grad_alpha(info, t, x):
    """Spatial gradients ``d alpha_i / dx``, shape ``x.shape[:-1] + (n, d)``."""
    x = _check_positions(info, x)
    diff = x[..., None, :] - info.centers
    if info.kernel_kind is KernelKind.GAUSSIAN:
        ell2 = info.length_scale**2
        k = np.exp(-np.sum(diff * diff, axis=-1) / (2.0 * ell2))
        return (-diff / ell2) * k[..., None]
    return info.stiffness * diff


def _check_domain(info, z, strict):
    z = np.asarray(z, dtype=float)
    if info.transform_kind is TransformKind.SQUARE_ROOT and strict and np.any(z < SQRT_EPS):
        raise DomainError(
            f"square-root transform needs accumulated information >= {SQRT_EPS:g}; "
            "the path never gathers any"
        )
    return z


def beta_eval(info, z, strict=True):
    """Derivative of the transform, ``beta = G'``, in the internal sign."""
    z = _check_domain(info, z, strict)
    s = info.transform_sign
    kind = info.transform_kind
    if kind is TransformKind.SATURATING:
        return s * info.rate * np.exp(-info.rate * z)
    if kind is TransformKind.LINEAR:
        return s * info.rate * np.ones_like(z)
    with np.errstate(divide="ignore"):
        return s * 0.5 / np.sqrt(np.maximum(z, 0.0))


def G_eval(info, z, strict=True):
    """The transform ``G`` itself."""
    z = _check_domain(info, z, strict)
    s = info.transform_sign
    kind = info.transform_kind
    if kind is TransformKind.SATURATING:
        return s * -np.expm1(-info.rate * z)
    if kind is TransformKind.LINEAR:
        return s * info.rate * z
    return s * np.sqrt(np.maximum(z, 0.0))


def memory_constant(info, z, strict=True):
    """Self-consistent memory constant ``G'(z)`` reported in the reported sign."""
    return info.transform_sign * beta_eval(info, z, strict=strict)


def internal_K(info, K):
    """Convert reported-sign constants to the internal sign used in the ODE."""
    values = K.values if isinstance(K, KParameter) else np.asarray(K, dtype=float)
    return info.transform_sign * values


def line_problem(mass=0.1, length_scale=0.5, rate=1.0, horizon=1.0, x0=0.0, xf=2.0, center=1.0):
    """1-D exploration example: all information concentrated at one point."""
    info = InfoModel([PointOfInterest([center], 1.0)], length_scale=length_scale, rate=rate)
    return MemoryProblem(info, RiskModel(mass), horizon, [x0], [xf])


PLANE_POINTS = ((1.0, 2.0), (2.0, 0.0), (2.0, 1.0))


def plane_problem(mass=0.1, length_scale=1.0, rate=1.0, horizon=3.0,
                  x0=(0.0, 0.0), xf=(0.0, 2.0), points=PLANE_POINTS, weights=None):
    """2-D example with three points of interest."""
    if weights is None:
        weights = [1.0] * len(points)
    info = InfoModel(
        [PointOfInterest(p, w) for p, w in zip(points, weights)],
        length_scale=length_scale,
        rate=rate,
    )
    return MemoryProblem(info, RiskModel(mass), horizon, x0, xf)
