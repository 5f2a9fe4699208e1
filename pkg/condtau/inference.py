"""
Inference
=========
Plug-in variance and pointwise confidence intervals from the joint
asymptotic normality of the estimators:

    (n h^p)^(1/2) (tau_hat(z) - tau(z))  ->  N(0, H),
    H = 4 int K^2 / f_Z(z) * (E[g_k(X1, X) g_k(X2, X) | Z = Z1 = Z2 = z] - tau(z)^2)

The conditional moment of g_k products is estimated over distinct index
triples (a, b, c) with weights w_a w_b w_c, renormalised by the total weight
of the triples kept. Distinct points have independent limits, so intervals
are pointwise and only the diagonal of H is estimated.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from . import estimators, kernels
from . import weights as nw
from .errors import CondTauError, DegenerateWindow, InvalidParameter
from .estimators import ConcordanceKind, EstimatorKind

_LOG = logging.getLogger(__name__)


@dataclass(frozen=True)
class VarianceEstimate:
    z: np.ndarray
    k: ConcordanceKind
    kind: EstimatorKind
    h_entry: float
    clamped: bool
    f_hat: float
    gg_moment: float
    tau: float
    raw: float


@dataclass(frozen=True)
class ConfidenceInterval:
    level: float
    lower: float
    upper: float
    center: float
    standard_error: float

    @property
    def width(self):
        return self.upper - self.lower


def _resolve_kind(kind):
    """Accept an estimator name or a concordance index k (1, 2, 3)."""
    if isinstance(kind, EstimatorKind):
        return kind
    if isinstance(kind, (int, np.integer)):
        return ConcordanceKind(int(kind)).estimator
    return EstimatorKind(kind)


def estimate_gg_moment(k, sample, z, spec, h):
    """
    Sum over distinct (a, b, c) of w_a w_b w_c g_k(X_b, X_a) g_k(X_c, X_a),
    divided by the sum of w_a w_b w_c over the same triples.

    Runs in O(m^2) over the m weighted observations using
    m_a = sum_{b != a} w_b g_k(X_b, X_a) and
    sum_{b != a, c != a, c != b} w_b w_c g g = m_a^2 - sum_{b != a} w_b^2 g^2.
    """
    if sample.n < 3:
        raise InvalidParameter(f"the variance plug-in needs n >= 3, got {sample.n}")
    k = ConcordanceKind(int(k))
    wv = nw.nw_weights(sample, z, spec, h)
    active = wv.active
    if active.size < 3:
        raise DegenerateWindow(
            f"only {active.size} observation(s) carry weight at z={wv.z.tolist()}; need 3"
        )
    w = wv.weights[active]
    x = sample.x[active]
    m = active.size

    first = np.zeros(m)
    second = np.zeros(m)
    for start in range(0, m, estimators.BLOCK_ROWS):
        stop = min(start + estimators.BLOCK_ROWS, m)
        g = estimators.g_matrix(k, x[start:stop], x)
        # g_k(X_a, X_a) is not a pair
        g[np.arange(stop - start), np.arange(start, stop)] = 0.0
        first += w[start:stop] @ g
        second += (w[start:stop] ** 2) @ (g * g)

    num = float(w @ (first * first - second))
    total, squares = w.sum(), (w * w).sum()
    denom = float(w @ ((total - w) ** 2 - (squares - w * w)))
    if not denom > 0:
        raise DegenerateWindow(f"no weighted triple of distinct observations at z={wv.z.tolist()}")
    return num / denom


def estimate_variance(kind, sample, z, spec, h, estimate=None):
    """
    Diagonal entry of H at z, floored at 0.

    kind selects both g_k and the centring estimator: tau1..tau3 use
    g_1..g_3, tilde uses g_2 with tau-tilde. An integer k means tau_k.
    """
    kind = _resolve_kind(kind)
    k = kind.concordance
    f_hat = nw.kde(sample, z, spec, h)
    if not f_hat > 0:
        raise DegenerateWindow(f"the density estimate of Z vanishes at z={np.ravel(z).tolist()}")
    gg = estimate_gg_moment(k, sample, z, spec, h)
    if estimate is None:
        estimate = estimators.estimate(kind, sample, z, spec, h)
    tau = float(estimate.value)
    raw = 4.0 * kernels.constants(spec).int_k2 / f_hat * (gg - tau * tau)
    clamped = raw < 0
    if clamped:
        _LOG.debug("negative plug-in variance %.3g at z=%s clamped to 0", raw, estimate.z)
    return VarianceEstimate(
        z=np.atleast_1d(np.asarray(z, dtype=float)),
        k=k,
        kind=kind,
        h_entry=max(raw, 0.0),
        clamped=bool(clamped),
        f_hat=f_hat,
        gg_moment=gg,
        tau=tau,
        raw=raw,
    )


def normal_quantile(level):
    if not 0.0 < level < 1.0:
        raise InvalidParameter(f"confidence level must lie in (0, 1), got {level}")
    return float(stats.norm.ppf(1.0 - (1.0 - level) / 2.0))


def confidence_interval(estimate, var, n, h, p, level=0.95, truncate=False):
    """center +/- q * sqrt(h_entry / (n h^p)); truncate clips to [-1, 1]."""
    q = normal_quantile(level)
    if var.h_entry < 0:
        raise InvalidParameter(f"variance entry must be nonnegative, got {var.h_entry}")
    kernels.check_bandwidth(h)
    center = float(estimate.value)
    se = math.sqrt(var.h_entry / (n * h ** p))
    lower, upper = center - q * se, center + q * se
    if truncate:
        lower, upper = max(lower, -1.0), min(upper, 1.0)
    return ConfidenceInterval(level=level, lower=lower, upper=upper, center=center, standard_error=se)


def estimate_variance_grid(kind, sample, estimates, spec, h, threads=1):
    """
    VarianceEstimate for every defined TauEstimate of a grid, None elsewhere.

    Points where the plug-in itself is undefined (fewer than three weighted
    observations) are logged and also come back as None.
    """
    kind = _resolve_kind(kind)

    def one(est):
        if not est.defined:
            return None
        try:
            return estimate_variance(kind, sample, est.z, spec, h, estimate=est)
        except CondTauError as exc:
            _LOG.debug("no variance at z=%s: %s", est.z, exc)
            return None

    if threads == 1:
        results = [one(est) for est in estimates]
    else:
        results = Parallel(n_jobs=threads, prefer="threads")(delayed(one)(est) for est in estimates)
    clamped = sum(1 for v in results if v is not None and v.clamped)
    if clamped:
        _LOG.warning("  ⚠ variance clamped to 0 at %d grid point(s)", clamped)
    return results
