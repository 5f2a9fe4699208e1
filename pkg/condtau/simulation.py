"""
Simulation
==========
The two simulation settings and the Monte Carlo engine behind the
bias / standard deviation / MSE study.

  Setting 1: Z ~ U(0, 1),  X_k | Z=z ~ N(z, 1),     tau(z) = 2z - 1
  Setting 2: Z ~ N(0, 1),  X_k | Z=z ~ N(Phi(z), 1), tau(z) = 2 Phi(z) - 1

In both, the conditional copula of (X1, X2) is Gaussian with correlation
rho(z) = sin(pi tau(z) / 2).

Process (run_mc):
1. Spawn one seed per replication from the master seed
2. Per replication: draw a sample, pick h per alpha_h (rule of thumb or CV),
   evaluate all estimators on the z-grid in a single pass
3. Reduce in replication order: Bias(z), Sd(z), MSE(z) per (estimator, alpha_h)
4. Integrate the local curves by the trapezoid rule over the defined points

Replications run on joblib threads; results do not depend on the thread count.
"""

import enum
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import integrate, stats

from . import bandwidth, estimators, kernels
from .errors import CondTauError, DegenerateWindow, InvalidParameter
from .estimators import ALL_ESTIMATORS, EstimatorKind
from .kernels import KernelSpec
from .sample import Sample

_LOG = logging.getLogger(__name__)

# ── Configuration ─────────────────────────────────────────────────────────
DEFAULT_REPS = 500
DEFAULT_ALPHA_H = (0.5, 0.75, 1.0, 1.5, 2.0)
DEFAULT_N_VALUES = (100, 500, 1000, 2000)
CV_MULTIPLIERS = (0.5, 0.75, 1.0, 1.5, 2.0)

# grids used to integrate the local measures
Z_GRIDS = {
    1: np.linspace(0.01, 0.99, 99),
    2: np.linspace(-2.5, 2.5, 101),
}

# numerical bound on C_XZ: s-grid over the kernel window, x-grid per axis
DENSITY_S_POINTS = 41
DENSITY_X_POINTS = 121
DENSITY_X_RANGE = (-6.0, 7.0)


class SettingId(enum.IntEnum):
    ONE = 1
    TWO = 2


@dataclass(frozen=True)
class SettingSpec:
    id: SettingId
    n: int
    seed: object = 0

    def __post_init__(self):
        object.__setattr__(self, "id", SettingId(int(self.id)))
        if int(self.n) < 2:
            raise InvalidParameter(f"a simulated sample needs n >= 2, got {self.n}")


# ---------------------------------------------------------------------------
# Data generating processes
# ---------------------------------------------------------------------------

def true_tau(setting_id, z):
    """Conditional Kendall's tau of the setting at z (scalar or array)."""
    setting_id = SettingId(int(setting_id))
    z = np.asarray(z, dtype=float)
    if setting_id is SettingId.ONE:
        if np.any((z < 0) | (z > 1)):
            raise InvalidParameter("Setting 1 is only defined for z in [0, 1]")
        tau = 2.0 * z - 1.0
    else:
        tau = 2.0 * stats.norm.cdf(z) - 1.0
    return tau if tau.ndim else float(tau)


def conditional_mean(setting_id, z):
    z = np.asarray(z, dtype=float)
    return z if SettingId(int(setting_id)) is SettingId.ONE else stats.norm.cdf(z)


def gaussian_copula_rho(tau):
    """Correlation of the Gaussian copula whose Kendall's tau is tau."""
    return np.sin(np.pi * np.asarray(tau, dtype=float) / 2.0)


def generate(setting, rng=None):
    """Draw a Sample; the same SettingSpec always gives the same sample."""
    rng = rng if rng is not None else np.random.default_rng(setting.seed)
    n = setting.n
    if setting.id is SettingId.ONE:
        z = rng.uniform(0.0, 1.0, size=n)
    else:
        z = rng.standard_normal(n)
    noise = rng.standard_normal((n, 2))
    rho = gaussian_copula_rho(true_tau(setting.id, z))
    m = conditional_mean(setting.id, z)
    x1 = m + noise[:, 0]
    x2 = m + rho * noise[:, 0] + np.sqrt(1.0 - rho * rho) * noise[:, 1]
    return Sample.from_columns(x1, x2, z)


def replication_seeds(seed, reps, key=()):
    """Independent child seeds, one per replication, in replication order."""
    entropy = [int(seed), *(int(k) for k in key)] if key else int(seed)
    return np.random.SeedSequence(entropy).spawn(reps)


def default_z_grid(setting_id):
    return Z_GRIDS[int(setting_id)].copy()


# ---------------------------------------------------------------------------
# Density constants of the settings
# ---------------------------------------------------------------------------

def _z_density(setting_id, s):
    if setting_id is SettingId.ONE:
        return np.ones_like(s)
    return stats.norm.pdf(s)


def _joint_density(setting_id, x1, x2, s):
    """f_{X,Z}(x1, x2, s) broadcast over the three arguments."""
    m = conditional_mean(setting_id, s)
    rho = gaussian_copula_rho(true_tau(setting_id, s))
    a, b = x1 - m, x2 - m
    det = 1.0 - rho * rho
    quad = (a * a - 2.0 * rho * a * b + b * b) / det
    return _z_density(setting_id, s) * np.exp(-0.5 * quad) / (2.0 * np.pi * np.sqrt(det))


def setting_density_constants(setting_id, z, h, spec):
    """
    DensityConstants on the kernel window [z - h r, z + h r] (r = support radius).

    f_min, f_max and f_z are taken from the exact density of Z on the window.
    C_{K,2} and C_{K~,2} use the exact sup of |f_Z''| on the window (endpoints and
    the critical points 0, +-sqrt(3) of the Gaussian case).

    C_{XZ,2} is an approximation, not a guaranteed bound:
        sum_k binom(2, k) mu_k mu_{2-k} J_k J_{2-k},
        J_k = int sup_{s in window} |d^k/ds^k f_{X,Z}(x, s)| dx,
    with mu_j = int |K| |u|^j. The sup is a maximum over DENSITY_S_POINTS
    values of s, the derivatives are finite differences and the x integral
    is a trapezoid rule on a truncated grid, so it can fall slightly short of
    the true value.
    """
    from .bounds import DensityConstants

    setting_id = SettingId(int(setting_id))
    if not spec.compact:
        raise InvalidParameter(f"the {spec.family.value} kernel has unbounded support; no local constants exist")
    if spec.dimension != 1:
        raise InvalidParameter("density constants are only available for p = 1")
    kernels.check_bandwidth(h)
    z = float(np.ravel(z)[0])
    reach = h * spec.support_radius
    lo, hi = z - reach, z + reach
    if setting_id is SettingId.ONE and not (0.0 < lo and hi < 1.0):
        raise InvalidParameter(f"the kernel window [{lo:g}, {hi:g}] leaves the support (0, 1) of Setting 1")

    s = np.linspace(lo, hi, DENSITY_S_POINTS)
    if setting_id is SettingId.ONE:
        f_min = f_max = f_z = 1.0
        f2_sup = 0.0
    else:
        nearest = min(max(0.0, lo), hi)
        farthest = lo if abs(lo) > abs(hi) else hi
        f_min = float(stats.norm.pdf(farthest))
        f_max = float(stats.norm.pdf(nearest))
        f_z = float(stats.norm.pdf(z))
        # |f''| = |s^2 - 1| phi(s) peaks at 0 and +-sqrt(3)
        critical = np.array([lo, hi, 0.0, -math.sqrt(3.0), math.sqrt(3.0)])
        critical = critical[(critical >= lo) & (critical <= hi)]
        f2_sup = float(np.max(np.abs((critical ** 2 - 1.0) * stats.norm.pdf(critical))))

    x = np.linspace(*DENSITY_X_RANGE, DENSITY_X_POINTS)
    joint = _joint_density(setting_id, x[None, :, None], x[None, None, :], s[:, None, None])
    d1 = np.gradient(joint, s, axis=0)
    d2 = np.gradient(d1, s, axis=0)
    j = [
        integrate.trapezoid(integrate.trapezoid(np.abs(d).max(axis=0), x, axis=1), x)
        for d in (joint, d1, d2)
    ]
    mu = [kernels.abs_moment(spec, q) for q in range(3)]
    c_xz = sum(math.comb(2, q) * mu[q] * mu[2 - q] * j[q] * j[2 - q] for q in range(3))

    return DensityConstants(
        f_min=f_min,
        f_max=f_max,
        f_z=f_z,
        c_k_alpha=mu[2] * f2_sup,
        c_ktilde_2=kernels.tilde_moment(spec, 2) * f2_sup,
        c_xz_alpha=float(c_xz),
        alpha=2,
    )


# ---------------------------------------------------------------------------
# Monte Carlo engine
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCConfig:
    """One Monte Carlo study; h_source is "rot" (alpha_h x rule of thumb) or "cv"."""

    setting: SettingSpec
    reps: int = DEFAULT_REPS
    estimators: tuple = ALL_ESTIMATORS
    alpha_h: tuple = DEFAULT_ALPHA_H
    h_source: str = "rot"
    n_pairs: int = bandwidth.DEFAULT_N_PAIRS
    z_grid: tuple = None
    kernel: KernelSpec = field(default_factory=KernelSpec)

    def __post_init__(self):
        if int(self.reps) < 2:
            raise InvalidParameter(f"reps must be at least 2, got {self.reps}")
        object.__setattr__(self, "estimators", tuple(EstimatorKind(e) for e in self.estimators))
        if not self.estimators:
            raise InvalidParameter("no estimator selected")
        alphas = tuple(float(a) for a in self.alpha_h)
        if not alphas or any(not a > 0 for a in alphas):
            raise InvalidParameter(f"alpha_h values must be positive, got {self.alpha_h}")
        object.__setattr__(self, "alpha_h", alphas)
        if self.h_source not in ("rot", "cv"):
            raise InvalidParameter(f"h_source must be 'rot' or 'cv', got {self.h_source!r}")
        grid = np.asarray(
            self.z_grid if self.z_grid is not None else default_z_grid(self.setting.id), dtype=float
        )
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise InvalidParameter("z_grid must hold at least two strictly increasing values")
        if self.setting.id is SettingId.ONE and (grid[0] <= 0 or grid[-1] >= 1):
            raise InvalidParameter("Setting 1 grid points must lie inside (0, 1)")
        object.__setattr__(self, "z_grid", tuple(grid.tolist()))


@dataclass(frozen=True)
class Replication:
    values: np.ndarray      # (alpha_h, estimator, z)
    h: np.ndarray           # (alpha_h,)
    h_cv: float


def _replicate(config, seed):
    sample = generate(SettingSpec(config.setting.id, config.setting.n, seed))
    grid = np.asarray(config.z_grid)[:, None]
    values = np.full((len(config.alpha_h), len(config.estimators), len(grid)), np.nan)
    h_cv = math.nan
    try:
        if config.h_source == "cv":
            cv = bandwidth.CVConfig(k=2, n_pairs=config.n_pairs, kernel=config.kernel)
            h_cv, _ = bandwidth.cv_select(sample, cv)
            base = h_cv
        else:
            base = bandwidth.rule_of_thumb(sample, 1.0)
    except CondTauError as exc:
        _LOG.debug("replication skipped: %s", exc)
        return Replication(values, np.full(len(config.alpha_h), np.nan), h_cv)

    hs = np.array([a * base for a in config.alpha_h])
    for a, h in enumerate(hs):
        for zi, sums in enumerate(estimators.grid_pair_sums(sample, grid, config.kernel, h)):
            if isinstance(sums, CondTauError):
                continue
            for e, kind in enumerate(config.estimators):
                try:
                    values[a, e, zi] = sums.value(kind)
                except DegenerateWindow:
                    pass
    return Replication(values, hs, h_cv)


def run_replications(config, seeds, threads=1):
    if threads == 1:
        return [_replicate(config, s) for s in seeds]
    return Parallel(n_jobs=threads, prefer="threads")(delayed(_replicate)(config, s) for s in seeds)


@dataclass(frozen=True)
class MCReport:
    """
    local:      z, estimator, alpha_h, bias, sd, mse, undefined
    integrated: estimator, alpha_h, ibias, isd, imse, undefined
    bandwidths: replication, alpha_h, h (and h_cv for CV runs)
    """

    config: MCConfig
    local: pd.DataFrame
    integrated: pd.DataFrame
    bandwidths: pd.DataFrame


def local_measures(values, truth):
    """
    Bias, Sd and MSE over replications (axis 0), ignoring NaN entries.

    Sd uses the divisor of the number of defined replications, so
    mse = bias^2 + sd^2 up to rounding.
    """
    defined = ~np.isnan(values)
    count = defined.sum(axis=0)
    safe = np.where(count > 0, count, 1)
    filled = np.where(defined, values, 0.0)
    mean = filled.sum(axis=0) / safe
    centred = np.where(defined, values - mean, 0.0)
    errors = np.where(defined, values - truth, 0.0)
    sd = np.sqrt((centred * centred).sum(axis=0) / safe)
    mse = (errors * errors).sum(axis=0) / safe
    empty = count == 0
    bias = np.where(empty, np.nan, mean - truth)
    return bias, np.where(empty, np.nan, sd), np.where(empty, np.nan, mse), values.shape[0] - count


def integrate_curve(z, y):
    """Trapezoid rule over the points where y is defined."""
    ok = ~np.isnan(y)
    if ok.sum() < 2:
        return math.nan
    return float(integrate.trapezoid(y[ok], z[ok]))


def aggregate(config, replications):
    z = np.asarray(config.z_grid)
    truth = true_tau(config.setting.id, z)
    stacked = np.stack([r.values for r in replications])
    bias, sd, mse, undefined = local_measures(stacked, truth)

    local_rows = []
    integrated_rows = []
    for a, alpha in enumerate(config.alpha_h):
        for e, kind in enumerate(config.estimators):
            for zi, zv in enumerate(z):
                local_rows.append({
                    "z": float(zv), "estimator": kind.value, "alpha_h": alpha,
                    "bias": bias[a, e, zi], "sd": sd[a, e, zi], "mse": mse[a, e, zi],
                    "undefined": int(undefined[a, e, zi]),
                })
            integrated_rows.append({
                "estimator": kind.value, "alpha_h": alpha,
                "ibias": integrate_curve(z, bias[a, e]),
                "isd": integrate_curve(z, sd[a, e]),
                "imse": integrate_curve(z, mse[a, e]),
                "undefined": int(undefined[a, e].sum()),
            })

    band_rows = []
    for rep, r in enumerate(replications):
        for a, alpha in enumerate(config.alpha_h):
            band_rows.append({"replication": rep, "alpha_h": alpha, "h": float(r.h[a]), "h_cv": r.h_cv})
    return MCReport(
        config=config,
        local=pd.DataFrame(local_rows),
        integrated=pd.DataFrame(integrated_rows),
        bandwidths=pd.DataFrame(band_rows),
    )


def run_mc(config, threads=1):
    seeds = replication_seeds(config.setting.seed, config.reps)
    _LOG.info(
        "Simulating Setting %d, n=%d, %d replications, %s bandwidths...",
        config.setting.id, config.setting.n, config.reps, config.h_source,
    )
    replications = run_replications(config, seeds, threads=threads)
    report = aggregate(config, replications)
    undefined = int(report.integrated["undefined"].sum())
    _LOG.info("  ✓ %d local cells, %d undefined estimates excluded", len(report.local), undefined)
    return report


def integrated_table(report, scale=1000.0):
    """IBias, ISd, IMSE per (alpha_h, estimator), multiplied by scale."""
    table = report.integrated.set_index(["alpha_h", "estimator"])[["ibias", "isd", "imse"]] * scale
    table.columns = ["IBias", "ISd", "IMSE"]
    return table


# ---------------------------------------------------------------------------
# Cross-validated bandwidth study
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CVStudyReport:
    """
    summary:    n, mean_h_cv, sd_h_cv, h_ref, failed
    integrated: n, estimator, alpha_h, ibias, isd, imse, undefined
    """

    summary: pd.DataFrame
    integrated: pd.DataFrame
    reports: dict


def run_cv_study(setting=SettingId.TWO, n_values=DEFAULT_N_VALUES, reps=DEFAULT_REPS,
                 n_pairs=bandwidth.DEFAULT_N_PAIRS, multipliers=CV_MULTIPLIERS, seed=0,
                 kinds=ALL_ESTIMATORS, z_grid=None, kernel=None, threads=1):
    """Monte Carlo study with h = multiplier x h_CV for every n."""
    setting = SettingId(int(setting))
    if setting is not SettingId.TWO:
        _LOG.warning("  ⚠ the CV study is meant for Setting 2; Setting 1 has a boundary at 0 and 1")
    kernel = kernel or KernelSpec()
    summary_rows = []
    tables = []
    reports = {}
    for step, n in enumerate(n_values, start=1):
        _LOG.info("\nStep %d: cross-validated bandwidths at n=%d...", step, n)
        config = MCConfig(
            setting=SettingSpec(setting, n, seed), reps=reps, estimators=kinds,
            alpha_h=multipliers, h_source="cv", n_pairs=n_pairs, z_grid=z_grid, kernel=kernel,
        )
        seeds = replication_seeds(seed, reps, key=(n,))
        report = aggregate(config, run_replications(config, seeds, threads=threads))
        h_cv = report.bandwidths.drop_duplicates("replication")["h_cv"].to_numpy()
        ok = ~np.isnan(h_cv)
        summary_rows.append({
            "n": n,
            "mean_h_cv": float(h_cv[ok].mean()) if ok.any() else math.nan,
            "sd_h_cv": float(h_cv[ok].std()) if ok.any() else math.nan,
            "h_ref": n ** (-1.0 / 5.0),
            "failed": int((~ok).sum()),
        })
        table = report.integrated.copy()
        table.insert(0, "n", n)
        tables.append(table)
        reports[n] = report
        _LOG.info("  ✓ E[h_cv]=%.3f  Sd[h_cv]=%.3f  h_ref=%.3f", summary_rows[-1]["mean_h_cv"],
                  summary_rows[-1]["sd_h_cv"], summary_rows[-1]["h_ref"])
    return CVStudyReport(
        summary=pd.DataFrame(summary_rows),
        integrated=pd.concat(tables, ignore_index=True),
        reports=reports,
    )
