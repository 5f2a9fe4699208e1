"""
Estimators
==========
Kernel-weighted estimators of the conditional Kendall's tau at a point z:

    tau1  = 4 sum_ij w_i w_j 1{X_i1 < X_j1, X_i2 < X_j2} - 1
    tau2  = sum_ij w_i w_j (1{concordant} - 1{discordant})
    tau3  = 1 - 4 sum_ij w_i w_j 1{X_i1 < X_j1, X_i2 > X_j2}
    tilde = tau2 / (1 - s_n),  s_n = sum_i w_i^2

All four come out of one pass over the observations with a nonzero weight:
with s_ij = sign(X_i1 - X_j1) * sign(X_i2 - X_j2),

    A = sum_ij w_i w_j s_ij        B = sum_ij w_i w_j |s_ij|
    tau1 = A + B - 1,  tau2 = A,  tau3 = 1 - B + A.

Only signs of differences enter, so every estimator is unchanged by
increasing transformations of either X column. Ties give s_ij = 0 and simply
drop out of both sums; they are counted so callers can see when the
continuity assumption is violated.
"""

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import kernels
from . import weights as nw
from .errors import AllWeightsZero, CondTauError, DegenerateWindow, InvalidParameter

_LOG = logging.getLogger(__name__)

# rows of the sign matrix materialised at once
BLOCK_ROWS = 512


class EstimatorKind(str, enum.Enum):
    TAU1 = "tau1"
    TAU2 = "tau2"
    TAU3 = "tau3"
    TILDE = "tilde"

    @property
    def concordance(self):
        """The g_k whose smoothed mean the estimator targets (tilde rescales tau2)."""
        return {
            EstimatorKind.TAU1: ConcordanceKind.G1,
            EstimatorKind.TAU2: ConcordanceKind.G2,
            EstimatorKind.TAU3: ConcordanceKind.G3,
            EstimatorKind.TILDE: ConcordanceKind.G2,
        }[self]


ALL_ESTIMATORS = tuple(EstimatorKind)


class ConcordanceKind(enum.IntEnum):
    G1 = 1
    G2 = 2
    G3 = 3

    @property
    def estimator(self):
        """tau_k, the raw estimator built on g_k."""
        return EstimatorKind(f"tau{int(self)}")


@dataclass(frozen=True)
class TauEstimate:
    kind: EstimatorKind
    z: np.ndarray
    value: float
    s_n: float
    h: float
    n_effective: int
    tied_pairs: int = 0
    signed_weights: bool = False
    reason: str = None

    @property
    def defined(self):
        return self.reason is None


# ---------------------------------------------------------------------------
# Concordance functions
# ---------------------------------------------------------------------------

def g(kind, xi, xj):
    """g_k(X_i, X_j) for two points of R^2."""
    kind = ConcordanceKind(kind)
    (a1, a2), (b1, b2) = xi, xj
    if kind is ConcordanceKind.G1:
        return 4.0 * (a1 < b1 and a2 < b2) - 1.0
    if kind is ConcordanceKind.G2:
        prod = (a1 - b1) * (a2 - b2)
        return float(prod > 0) - float(prod < 0)
    return 1.0 - 4.0 * (a1 < b1 and a2 > b2)


def _signs(x_rows, x_cols):
    d1 = np.sign(x_rows[:, 0, None] - x_cols[None, :, 0])
    d2 = np.sign(x_rows[:, 1, None] - x_cols[None, :, 1])
    return d1, d2


def _g_from_signs(kind, d1, d2):
    kind = ConcordanceKind(kind)
    if kind is ConcordanceKind.G1:
        return 4.0 * ((d1 < 0) & (d2 < 0)) - 1.0
    if kind is ConcordanceKind.G2:
        return d1 * d2
    return 1.0 - 4.0 * ((d1 < 0) & (d2 > 0))


def g_matrix(kind, x_rows, x_cols=None):
    """G[b, a] = g_k(X_b, X_a) for every row b of x_rows and a of x_cols."""
    if x_cols is None:
        x_cols = x_rows
    d1, d2 = _signs(np.asarray(x_rows, dtype=float), np.asarray(x_cols, dtype=float))
    return _g_from_signs(kind, d1, d2)


def g_rows(kind, xa, xb):
    """g_k(xa[r], xb[r]) row by row."""
    d1 = np.sign(xa[:, 0] - xb[:, 0])
    d2 = np.sign(xa[:, 1] - xb[:, 1])
    return _g_from_signs(kind, d1, d2)


def sign_product(x_rows, x_cols=None):
    """s_ij = sign(X_i1 - X_j1) * sign(X_i2 - X_j2)."""
    if x_cols is None:
        x_cols = x_rows
    d1, d2 = _signs(x_rows, x_cols)
    return d1 * d2


# ---------------------------------------------------------------------------
# Weighted pair sums
# ---------------------------------------------------------------------------

def combine(kind, a, b):
    """tau1, tau2 or tau3 from the pair sums A and B; works elementwise on arrays."""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.TAU1:
        return a + b - 1.0
    if kind is EstimatorKind.TAU2:
        return a
    if kind is EstimatorKind.TAU3:
        return 1.0 - b + a
    raise InvalidParameter("tilde is not an affine map of the pair sums")


@dataclass(frozen=True)
class PairSums:
    """The two weighted pair sums every estimator is an affine map of."""

    a: float
    b: float
    s_n: float
    n_effective: int
    tied_pairs: int
    signed_weights: bool
    z: np.ndarray = field(repr=False)
    h: float = 0.0

    def value(self, kind):
        kind = EstimatorKind(kind)
        if kind is not EstimatorKind.TILDE:
            return combine(kind, self.a, self.b)
        if self.n_effective < 2 or not (1.0 - self.s_n > 0.0):
            raise DegenerateWindow(
                f"a single observation carries all the weight at z={self.z.tolist()} (s_n = 1)"
            )
        return self.a / (1.0 - self.s_n)

    def estimate(self, kind):
        kind = EstimatorKind(kind)
        return TauEstimate(
            kind=kind,
            z=self.z,
            value=self.value(kind),
            s_n=self.s_n,
            h=self.h,
            n_effective=self.n_effective,
            tied_pairs=self.tied_pairs,
            signed_weights=self.signed_weights,
        )


def weighted_pair_sums(x, w):
    """(A, B, tied pairs) over all ordered pairs of the rows of x, weights w."""
    m = x.shape[0]
    a = 0.0
    b = 0.0
    zeros = 0
    for start in range(0, m, BLOCK_ROWS):
        stop = min(start + BLOCK_ROWS, m)
        s = sign_product(x[start:stop], x)
        wb = w[start:stop]
        a += float(wb @ (s @ w))
        b += float(wb @ (np.abs(s) @ w))
        zeros += int(np.count_nonzero(s == 0.0))
    # the diagonal s_ii = 0 is not a tie
    return a, b, (zeros - m) // 2


def pair_sums_from_weights(sample, wv):
    active = wv.active
    w = wv.weights[active]
    a, b, ties = weighted_pair_sums(sample.x[active], w)
    if ties:
        _LOG.debug("%d tied pair(s) among the %d weighted observations at z=%s", ties, active.size, wv.z)
    return PairSums(
        a=a,
        b=b,
        s_n=wv.s_n,
        n_effective=int(active.size),
        tied_pairs=ties,
        signed_weights=bool((w < 0).any()),
        z=wv.z,
        h=wv.h,
    )


def pair_sums(sample, z, spec, h):
    return pair_sums_from_weights(sample, nw.nw_weights(sample, z, spec, h))


# ---------------------------------------------------------------------------
# Point estimators
# ---------------------------------------------------------------------------

def _check_sample(sample):
    if sample.n < 2:
        raise InvalidParameter(f"need n >= 2 observations, got {sample.n}")


def tau_hat(kind, sample, z, spec, h):
    """tau1, tau2 or tau3 at z; AllWeightsZero propagates."""
    _check_sample(sample)
    return pair_sums(sample, z, spec, h).estimate(kind)


def tau_tilde(sample, z, spec, h):
    """tau2 / (1 - s_n); DegenerateWindow when s_n = 1."""
    _check_sample(sample)
    return pair_sums(sample, z, spec, h).estimate(EstimatorKind.TILDE)


def estimate(kind, sample, z, spec, h):
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.TILDE:
        return tau_tilde(sample, z, spec, h)
    return tau_hat(kind, sample, z, spec, h)


def estimate_all(sample, z, spec, h):
    sums = pair_sums(sample, z, spec, h)
    return {kind: sums.estimate(kind) for kind in ALL_ESTIMATORS if _defined(sums, kind)}


def _defined(sums, kind):
    try:
        sums.value(kind)
    except DegenerateWindow:
        return False
    return True


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

class GridWindows:
    """
    Kernel columns for many query points over one shared sample.

    For a compactly supported kernel and p = 1 the covariate is sorted once
    and each query point only evaluates the kernel on the observations its
    window can reach; every other observation gets an exact zero.
    """

    def __init__(self, sample, spec, h):
        self.sample = sample
        self.spec = spec
        self.h = float(h)
        self._order = None
        if spec.compact and sample.p == 1:
            self._order = np.argsort(sample.z[:, 0], kind="stable")
            self._sorted = sample.z[self._order, 0]

    def column(self, z):
        z = nw.as_point(self.sample, z)
        if self._order is None:
            return z, nw.kernel_column(self.sample, z, self.spec, self.h)
        reach = self.h * self.spec.support_radius
        lo = max(int(np.searchsorted(self._sorted, z[0] - reach, side="left")) - 1, 0)
        hi = int(np.searchsorted(self._sorted, z[0] + reach, side="right")) + 1
        candidates = np.sort(self._order[lo:hi])
        column = np.zeros(self.sample.n)
        if candidates.size:
            column[candidates] = kernels.scaled_evaluate_rows(self.spec, self.h, self.sample.z[candidates] - z)
        return z, column

    def pair_sums(self, z):
        z, column = self.column(z)
        return pair_sums_from_weights(self.sample, nw.normalize(column, z, self.h))


def _undefined(kind, z, h, reason):
    return TauEstimate(
        kind=kind, z=z, value=math.nan, s_n=math.nan, h=float(h), n_effective=0, reason=reason
    )


def grid_pair_sums(sample, zgrid, spec, h, threads=1):
    """PairSums (or the CondTauError raised) for every point of the grid."""
    windows = GridWindows(sample, spec, h)

    def one(z):
        try:
            return windows.pair_sums(z)
        except AllWeightsZero as exc:
            return exc

    points = [np.atleast_1d(np.asarray(z, dtype=float)) for z in zgrid]
    if threads == 1:
        return [one(z) for z in points]
    return Parallel(n_jobs=threads, prefer="threads")(delayed(one)(z) for z in points)


def tau_hat_grid(kind, sample, zgrid, spec, h, threads=1):
    """Elementwise tau_hat / tau_tilde; failures are recorded with a reason."""
    kind = EstimatorKind(kind)
    if len(zgrid) == 0:
        raise InvalidParameter("the evaluation grid is empty")
    _check_sample(sample)
    results = []
    for z, sums in zip(zgrid, grid_pair_sums(sample, zgrid, spec, h, threads=threads)):
        if isinstance(sums, CondTauError):
            results.append(_undefined(kind, np.atleast_1d(np.asarray(z, dtype=float)), h, str(sums)))
            continue
        try:
            results.append(sums.estimate(kind))
        except DegenerateWindow as exc:
            results.append(_undefined(kind, sums.z, h, str(exc)))
    undefined = sum(not r.defined for r in results)
    if undefined:
        _LOG.warning("  ⚠ %s undefined at %d of %d grid points", kind.value, undefined, len(results))
    return results


# ---------------------------------------------------------------------------
# From Kendall's tau to a copula parameter
# ---------------------------------------------------------------------------

COPULA_FAMILIES = ("gaussian", "student", "clayton", "gumbel")


def copula_parameter(tau, family):
    """
    Parameter of a one-parameter copula family with Kendall's tau equal to tau.

    gaussian / student: rho = sin(pi tau / 2); clayton: theta = 2 tau / (1 - tau);
    gumbel: theta = 1 / (1 - tau), defined for tau in [0, 1).
    """
    family = family.lower()
    if not -1.0 <= tau <= 1.0:
        raise InvalidParameter(f"Kendall's tau must lie in [-1, 1], got {tau}")
    if family in ("gaussian", "student"):
        return math.sin(math.pi * tau / 2.0)
    if family == "clayton":
        if tau >= 1.0:
            raise InvalidParameter("the Clayton copula needs tau < 1")
        return 2.0 * tau / (1.0 - tau)
    if family == "gumbel":
        if not 0.0 <= tau < 1.0:
            raise InvalidParameter(f"the Gumbel copula needs tau in [0, 1), got {tau}")
        return 1.0 / (1.0 - tau)
    raise InvalidParameter(f"unknown copula family {family!r} (choose from {', '.join(COPULA_FAMILIES)})")
