"""
Kernels
=======
Product kernels on R^p, their scaled versions K_h(v) = h^-p K(v/h), and the
constants the weights and the finite-sample bounds are built from.

Every multivariate kernel is the coordinate-wise product of a univariate
base, so sup|K|, the integral of K^2 and the K-tilde constants are powers of
their univariate closed forms. Compact kernels have an open support: a
coordinate sitting exactly on |u| = 1 evaluates to 0.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import DimensionMismatch, InvalidParameter


class KernelFamily(str, enum.Enum):
    EPANECHNIKOV = "epanechnikov"
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"


# ── Univariate closed forms ───────────────────────────────────────────────
# sup k, integral of k^2, integral of k^4, support radius
_UNIVARIATE = {
    KernelFamily.EPANECHNIKOV: (0.75, 0.6, 9.0 / 35.0, 1.0),
    KernelFamily.GAUSSIAN: (
        1.0 / math.sqrt(2.0 * math.pi),
        1.0 / (2.0 * math.sqrt(math.pi)),
        math.sqrt(math.pi / 2.0) / (4.0 * math.pi ** 2),
        math.inf,
    ),
    KernelFamily.UNIFORM: (0.5, 0.5, 0.125, 1.0),
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family, dimension p of the covariate and kernel order."""

    family: KernelFamily = KernelFamily.EPANECHNIKOV
    dimension: int = 1
    order: int = 2

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if int(self.dimension) < 1:
            raise InvalidParameter(f"kernel dimension must be positive, got {self.dimension}")
        if int(self.order) < 2:
            raise InvalidParameter(f"kernel order must be at least 2, got {self.order}")
        if int(self.order) != 2:
            # The product bases above are all second-order kernels.
            raise InvalidParameter(f"only order-2 kernels are available, got order {self.order}")

    @classmethod
    def from_name(cls, name, dimension=1):
        try:
            family = KernelFamily(name.lower())
        except ValueError:
            choices = ", ".join(f.value for f in KernelFamily)
            raise InvalidParameter(f"unknown kernel {name!r} (choose from {choices})") from None
        return cls(family=family, dimension=dimension)

    @property
    def support_radius(self):
        return _UNIVARIATE[self.family][3]

    @property
    def compact(self):
        return math.isfinite(self.support_radius)


@dataclass(frozen=True)
class KernelConstants:
    """Analytic kernel constants (sup|K|, integrals of K^2 and |K|, K-tilde)."""

    c_k: float
    int_k2: float
    int_abs_k: float
    c_ktilde: float
    int_ktilde2: float
    support_radius: float


def _base(family, u):
    """Univariate kernel evaluated elementwise."""
    u = np.asarray(u, dtype=float)
    if family is KernelFamily.EPANECHNIKOV:
        return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)
    if family is KernelFamily.UNIFORM:
        return np.where(np.abs(u) < 1.0, 0.5, 0.0)
    return np.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)


def evaluate_rows(spec, u):
    """K(u_i) for every row of an (m, p) array; returns shape (m,)."""
    u = np.asarray(u, dtype=float)
    if u.ndim == 1 and spec.dimension == 1:
        u = u[:, None]
    if u.ndim != 2 or u.shape[1] != spec.dimension:
        raise DimensionMismatch(
            f"expected points of dimension {spec.dimension}, got array of shape {u.shape}"
        )
    return np.prod(_base(spec.family, u), axis=1)


def evaluate(spec, u):
    """K(u) for a single point u of length p."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1 or u.shape[0] != spec.dimension:
        raise DimensionMismatch(
            f"expected a point of dimension {spec.dimension}, got shape {u.shape}"
        )
    return float(np.prod(_base(spec.family, u)))


def check_bandwidth(h):
    if not (h > 0) or not math.isfinite(h):
        raise InvalidParameter(f"bandwidth must be a positive finite number, got {h}")


def scaled_evaluate(spec, h, v):
    """K_h(v) = h^-p K(v / h)."""
    check_bandwidth(h)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    return evaluate(spec, v / h) / h ** spec.dimension


def scaled_evaluate_rows(spec, h, v):
    check_bandwidth(h)
    return evaluate_rows(spec, np.asarray(v, dtype=float) / h) / h ** spec.dimension


def constants(spec):
    c_k1, k2, k4, radius = _UNIVARIATE[spec.family]
    p = spec.dimension
    c_k = c_k1 ** p
    int_k2 = k2 ** p
    return KernelConstants(
        c_k=c_k,
        int_k2=int_k2,
        int_abs_k=1.0,
        c_ktilde=c_k ** 2 / int_k2,
        int_ktilde2=k4 ** p / int_k2 ** 2,
        support_radius=radius,
    )


def _quad_limits(spec):
    r = spec.support_radius
    return (-r, r) if math.isfinite(r) else (-np.inf, np.inf)


def _require_univariate(spec):
    if spec.dimension != 1:
        raise DimensionMismatch("kernel moments are only tabulated for p = 1")


def abs_moment(spec, j):
    """Integral of |K(u)| |u|^j for a univariate kernel."""
    _require_univariate(spec)
    lo, hi = _quad_limits(spec)
    value, _ = integrate.quad(
        lambda u: abs(float(_base(spec.family, u))) * abs(u) ** j, lo, hi, epsrel=1e-8
    )
    return value


def tilde_moment(spec, j):
    """Integral of K-tilde(u) |u|^j, K-tilde = K^2 / int K^2, for p = 1."""
    _require_univariate(spec)
    lo, hi = _quad_limits(spec)
    value, _ = integrate.quad(
        lambda u: float(_base(spec.family, u)) ** 2 * abs(u) ** j, lo, hi, epsrel=1e-8
    )
    return value / constants(spec).int_k2


def signed_moment(spec, j):
    """Integral of K(u) u^j for p = 1; vanishes for odd j below the order."""
    _require_univariate(spec)
    lo, hi = _quad_limits(spec)
    value, _ = integrate.quad(lambda u: float(_base(spec.family, u)) * u ** j, lo, hi, epsrel=1e-8)
    return value
