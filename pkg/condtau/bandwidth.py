"""
Bandwidth
=========
Rule-of-thumb bandwidth and leave-pair-out cross-validation.

The criterion compares g_k(X_i, X_j) with tau_k re-estimated without
observations i and j at the covariate midpoint (Z_i + Z_j) / 2, only over
"convenient" pairs whose covariates are close:

    CV(h) = 2 / (n (n-1)) sum_{i != j} (g_k(X_i, X_j) - tau_{-(i,j)})^2 K~_h~(Z_i - Z_j)

with the box kernel K~ = 1{|z|_inf <= 1} and h~ the sup-distance below which
N_pairs pairs fall. The naive localisation with K_h(Z_i - Z_j) as weight is
kept as `naive_cv_criterion`; it tends to decrease in h and is not used for
selection.

Usage:
    selection = select_pairs(sample, 1000)
    h_cv, curve = cv_select(sample, CVConfig(k=2, n_pairs=1000))
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from . import estimators, kernels
from .errors import DegenerateWindow, InvalidParameter
from .estimators import ConcordanceKind
from .kernels import KernelSpec

_LOG = logging.getLogger(__name__)

# ── Configuration ─────────────────────────────────────────────────────────
DEFAULT_N_PAIRS = 1000
GRID_SPAN = (0.25, 4.0)   # multiples of rule_of_thumb(sample, 1)
GRID_POINTS = 20
PAIRS_PER_CHUNK = 64


def rule_of_thumb(sample, alpha_h):
    """
    alpha_h * sigma(Z) * n^(-1/5), sigma with denominator n - 1.

    For p > 1 sigma is the geometric mean of the coordinate standard
    deviations and the rate becomes n^(-1/(4+p)).
    """
    if not alpha_h > 0:
        raise InvalidParameter(f"alpha_h must be positive, got {alpha_h}")
    if sample.n < 2:
        raise InvalidParameter(f"need n >= 2 observations, got {sample.n}")
    sd = sample.z.std(axis=0, ddof=1)
    if np.any(sd == 0.0):
        raise InvalidParameter("the covariate has zero variance; no rule-of-thumb bandwidth exists")
    if sample.p == 1:
        return alpha_h * float(sd[0]) * sample.n ** (-1.0 / 5.0)
    sigma = float(np.exp(np.log(sd).mean()))
    return alpha_h * sigma * sample.n ** (-1.0 / (4.0 + sample.p))


def default_h_grid(sample):
    lo, hi = GRID_SPAN
    return tuple(np.geomspace(lo, hi, GRID_POINTS) * rule_of_thumb(sample, 1.0))


@dataclass(frozen=True)
class CVConfig:
    """Leave-pair-out settings; h_grid=None means the default geometric grid."""

    k: ConcordanceKind = ConcordanceKind.G2
    n_pairs: int = DEFAULT_N_PAIRS
    h_grid: tuple = None
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        object.__setattr__(self, "k", ConcordanceKind(int(self.k)))
        if int(self.n_pairs) < 1:
            raise InvalidParameter(f"n_pairs must be at least 1, got {self.n_pairs}")
        if self.h_grid is not None:
            grid = np.unique(np.asarray(self.h_grid, dtype=float))
            if grid.size == 0:
                raise InvalidParameter("the bandwidth grid is empty")
            if not np.all(np.isfinite(grid)) or grid[0] <= 0:
                raise InvalidParameter("bandwidth grid values must be positive and finite")
            object.__setattr__(self, "h_grid", tuple(grid.tolist()))

    def grid_for(self, sample):
        return self.h_grid if self.h_grid is not None else default_h_grid(sample)


@dataclass(frozen=True)
class PairSelection:
    """Index pairs (i < j) with |Z_i - Z_j|_inf <= tilde_h."""

    pairs: np.ndarray
    tilde_h: float

    def __len__(self):
        return self.pairs.shape[0]


def select_pairs(sample, n_pairs):
    """Keep the N_pairs closest pairs in sup-distance (more on ties)."""
    n = sample.n
    total = n * (n - 1) // 2
    if not 1 <= n_pairs <= total:
        raise InvalidParameter(f"n_pairs must lie in [1, {total}] for n={n}, got {n_pairs}")
    i, j = np.triu_indices(n, k=1)
    dist = np.abs(sample.z[i] - sample.z[j]).max(axis=1)
    tilde_h = float(np.partition(dist, n_pairs - 1)[n_pairs - 1])
    keep = dist <= tilde_h
    _LOG.debug("selected %d of %d pairs, tilde_h=%g", int(keep.sum()), total, tilde_h)
    return PairSelection(pairs=np.column_stack([i[keep], j[keep]]), tilde_h=tilde_h)


def tau_hat_leave_pair_out(k, sample, exclude, spec, h):
    """tau_k at (Z_i + Z_j) / 2 computed without observations i and j."""
    if sample.n < 4:
        raise InvalidParameter(f"leave-pair-out needs n >= 4, got {sample.n}")
    i, j = (int(v) for v in exclude)
    if i == j:
        raise InvalidParameter(f"excluded indices must differ, got ({i}, {j})")
    z = (sample.z[i] + sample.z[j]) / 2.0
    kind = ConcordanceKind(int(k)).estimator
    return estimators.tau_hat(kind, sample.without(i, j), z, spec, h)


# ---------------------------------------------------------------------------
# Batched leave-pair-out residuals
# ---------------------------------------------------------------------------

def _chunk_residuals(sample, pairs, k, spec, h):
    """
    Squared residuals of both orientations for a block of pairs.

    Each column of W holds the Nadaraya-Watson weights at one midpoint with
    the pair's own rows zeroed, so one matrix product gives the leave-out
    pair sums of the whole block. Undefined columns come back as NaN.
    """
    n, p = sample.n, sample.p
    mids = (sample.z[pairs[:, 0]] + sample.z[pairs[:, 1]]) / 2.0
    u = (sample.z[:, None, :] - mids[None, :, :]).reshape(-1, p)
    w = kernels.scaled_evaluate_rows(spec, h, u).reshape(n, len(pairs))
    cols = np.arange(len(pairs))
    w[pairs[:, 0], cols] = 0.0
    w[pairs[:, 1], cols] = 0.0
    totals = w.sum(axis=0)
    defined = totals != 0.0
    rows = np.flatnonzero(w.any(axis=1))

    residuals = np.full(len(pairs), np.nan)
    if not defined.any():
        return residuals
    w = w[np.ix_(rows, np.flatnonzero(defined))] / totals[defined]
    s = estimators.sign_product(sample.x[rows])
    a = np.einsum("rc,rc->c", w, s @ w)
    b = np.einsum("rc,rc->c", w, np.abs(s) @ w)
    tau = estimators.combine(k.estimator, a, b)

    xi = sample.x[pairs[defined, 0]]
    xj = sample.x[pairs[defined, 1]]
    g_ij = estimators.g_rows(k, xi, xj)
    g_ji = estimators.g_rows(k, xj, xi)
    residuals[defined] = (g_ij - tau) ** 2 + (g_ji - tau) ** 2
    return residuals


def leave_pair_out_residuals(sample, pairs, k, spec, h, threads=1):
    """(g_k(X_i,X_j) - tau)^2 + (g_k(X_j,X_i) - tau)^2 per pair, NaN if undefined."""
    if sample.n < 4:
        raise InvalidParameter(f"leave-pair-out needs n >= 4, got {sample.n}")
    kernels.check_bandwidth(h)
    k = ConcordanceKind(int(k))
    pairs = np.asarray(pairs, dtype=int).reshape(-1, 2)
    # neighbouring midpoints share most of their windows
    order = np.argsort((sample.z[pairs[:, 0], 0] + sample.z[pairs[:, 1], 0]) / 2.0, kind="stable")
    blocks = [order[s:s + PAIRS_PER_CHUNK] for s in range(0, len(order), PAIRS_PER_CHUNK)]
    if threads == 1:
        parts = [_chunk_residuals(sample, pairs[blk], k, spec, h) for blk in blocks]
    else:
        parts = Parallel(n_jobs=threads, prefer="threads")(
            delayed(_chunk_residuals)(sample, pairs[blk], k, spec, h) for blk in blocks
        )
    residuals = np.empty(len(pairs))
    for blk, part in zip(blocks, parts):
        residuals[blk] = part
    return residuals


@dataclass(frozen=True)
class CriterionValue:
    value: float
    used: int
    skipped: int


def _criterion(sample, h, config, selection, threads=1):
    if len(selection) == 0:
        raise InvalidParameter("the pair selection is empty")
    if not selection.tilde_h > 0:
        raise InvalidParameter("all selected pairs share the same covariate value (tilde_h = 0)")
    residuals = leave_pair_out_residuals(
        sample, selection.pairs, config.k, config.kernel, h, threads=threads
    )
    ok = ~np.isnan(residuals)
    used = int(ok.sum())
    skipped = len(selection) - used
    if skipped:
        _LOG.info("  ⚠ h=%g: %d of %d leave-pair-out estimates undefined, skipped", h, skipped, len(selection))
    if not used:
        return CriterionValue(value=math.nan, used=0, skipped=skipped)
    n = sample.n
    box = selection.tilde_h ** (-sample.p)
    # mean over the defined terms, scaled to the whole selection
    total = float(residuals[ok].sum()) * len(selection) / used
    return CriterionValue(value=2.0 / (n * (n - 1)) * box * total, used=used, skipped=skipped)


def cv_criterion(sample, h, config, selection, threads=1):
    """The leave-pair-out criterion at h over the selected pairs."""
    return _criterion(sample, h, config, selection, threads=threads).value


def cv_select(sample, config, threads=1):
    """
    Minimise the criterion over config's grid.

    Returns (h_cv, curve) where curve is a DataFrame with columns h, cv and
    skipped. Ties go to the smallest h.
    """
    grid = config.grid_for(sample)
    selection = select_pairs(sample, config.n_pairs)
    rows = []
    for h in grid:
        crit = _criterion(sample, h, config, selection, threads=threads)
        rows.append({"h": float(h), "cv": crit.value, "skipped": crit.skipped})
    curve = pd.DataFrame(rows, columns=["h", "cv", "skipped"])
    if curve["cv"].isna().all():
        raise DegenerateWindow("the cross-validation criterion is undefined at every grid bandwidth")
    best = int(np.nanargmin(curve["cv"].to_numpy()))
    return float(curve["h"].iat[best]), curve


def naive_cv_criterion(sample, h, k, spec, threads=1):
    """
    CV with K_h(Z_i - Z_j) as pair weight over all pairs.

    Library-only: it tends to keep decreasing in h, which is why the
    selection above uses a separate box kernel over nearby pairs.
    """
    kernels.check_bandwidth(h)
    n = sample.n
    i, j = np.triu_indices(n, k=1)
    kh = kernels.scaled_evaluate_rows(spec, h, sample.z[i] - sample.z[j])
    reach = kh != 0.0
    if not reach.any():
        return 0.0
    pairs = np.column_stack([i[reach], j[reach]])
    residuals = leave_pair_out_residuals(sample, pairs, k, spec, h, threads=threads)
    ok = ~np.isnan(residuals)
    return 2.0 / (n * (n - 1)) * float((residuals[ok] * kh[reach][ok]).sum())
