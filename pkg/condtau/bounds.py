"""
Bounds
======
Finite-sample guarantees with explicit constants:

  positivity_bound   lower bound on P(f_hat_Z(z) > 0), i.e. on the
                     probability that the estimators are defined at z.
  deviation_bound    threshold x and an upper bound on
                     P(|tau_hat_k(z) - tau(z)| > x), k = 1, 2, 3.
  bound_validity_check
                     Monte Carlo frequency of |tau_hat_k - tau| > x in one
                     of the simulation settings, compared with the bound.

The density constants (C_{K,alpha}, C_{K~,2}, C_{XZ,alpha}, f bounds) are
inputs: known analytically for the simulation settings, user supplied
otherwise. Raw bound values outside [0, 1] are reported next to the
clipped probability.

Usage:
    dc = DensityConstants(f_min=1.0, f_max=1.0, f_z=1.0)
    result = deviation_bound(2, n=100_000, h=0.05, p=1, t=0.1, t_prime=0.05,
                             kc=kernels.constants(spec), dc=dc)
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import estimators, kernels, simulation
from .errors import AllWeightsZero, ConditionViolated, DegenerateWindow, InvalidParameter
from .estimators import ConcordanceKind

_LOG = logging.getLogger(__name__)

# ── Configuration ─────────────────────────────────────────────────────────
# c_k multiplying the deviation threshold for tau_1, tau_2, tau_3
C_K = {ConcordanceKind.G1: 4.0, ConcordanceKind.G2: 2.0, ConcordanceKind.G3: 4.0}
VALIDITY_SIGMAS = 3.0


@dataclass(frozen=True)
class DensityConstants:
    """
    Regularity constants of the law of (X, Z) around the query point.

    f_z may be left out for the positivity bound, which does not use it.
    """

    f_min: float
    f_max: float
    f_z: float = None
    c_k_alpha: float = 0.0
    c_ktilde_2: float = 0.0
    c_xz_alpha: float = 0.0
    alpha: int = 2

    def __post_init__(self):
        if not 0 < self.f_min <= self.f_max:
            raise InvalidParameter(f"need 0 < f_min <= f_max, got f_min={self.f_min}, f_max={self.f_max}")
        if self.f_z is not None and not self.f_min <= self.f_z <= self.f_max:
            raise InvalidParameter(f"need f_min <= f_z <= f_max, got f_z={self.f_z}")
        for name in ("c_k_alpha", "c_ktilde_2", "c_xz_alpha"):
            if getattr(self, name) < 0:
                raise InvalidParameter(f"{name} must be nonnegative, got {getattr(self, name)}")
        if int(self.alpha) < 2:
            raise InvalidParameter(f"kernel order alpha must be at least 2, got {self.alpha}")

    @classmethod
    def from_mapping(cls, values):
        """Build from a TOML table; unknown keys are rejected."""
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(values) - known)
        if unknown:
            raise InvalidParameter(f"unknown density constant(s): {', '.join(unknown)}")
        return cls(**{key: (int(v) if key == "alpha" else float(v)) for key, v in values.items()})

    def bias_term(self, h):
        """C_{K,alpha} h^alpha / alpha!"""
        return self.c_k_alpha * h ** self.alpha / math.factorial(self.alpha)


@dataclass(frozen=True)
class BoundResult:
    threshold_x: float
    prob_bound: float
    raw_bound: float
    conditions: tuple = ()
    terms: tuple = field(default=(), repr=False)

    @property
    def conditions_ok(self):
        return all(ok for _, ok in self.conditions)

    @property
    def vacuous(self):
        return self.prob_bound >= 1.0


def _clip(value):
    return min(max(value, 0.0), 1.0)


def _check_common(n, h, p):
    if n < 1:
        raise InvalidParameter(f"n must be positive, got {n}")
    if p < 1:
        raise InvalidParameter(f"p must be positive, got {p}")
    kernels.check_bandwidth(h)


def positivity_bound(n, h, p, kc, dc):
    """1 - 2 exp(-n h^p d^2 / (2 f_max int K^2 + (2/3) C_K d)), d = f_min - C_{K,a} h^a / a!."""
    _check_common(n, h, p)
    gap = dc.f_min - dc.bias_term(h)
    name = "C_K,alpha h^alpha / alpha! < f_min"
    if not gap > 0:
        raise ConditionViolated(name, f"C_K,alpha h^alpha / alpha! = {dc.bias_term(h):.6g}, f_min = {dc.f_min:.6g}")
    exponent = n * h ** p * gap ** 2 / (2.0 * dc.f_max * kc.int_k2 + (2.0 / 3.0) * kc.c_k * gap)
    raw = 1.0 - 2.0 * math.exp(-exponent)
    return BoundResult(
        threshold_x=0.0,
        prob_bound=_clip(raw),
        raw_bound=raw,
        conditions=((name, True),),
        terms=(exponent,),
    )


def deviation_bound(k, n, h, p, t, t_prime, kc, dc):
    """
    x and an upper bound on P(|tau_hat_k(z) - tau(z)| > x).

    Conditions: C_{K,a} h^a / a! + t <= f_min / 2 and C_{K~,2} h^2 < f_z.
    """
    _check_common(n, h, p)
    k = ConcordanceKind(int(k))
    if not t > 0 or not t_prime > 0:
        raise InvalidParameter(f"t and t' must be positive, got t={t}, t'={t_prime}")
    if dc.f_z is None:
        raise InvalidParameter("the deviation bound needs the density f_z at the query point")

    bias = dc.bias_term(h)
    first = "C_K,alpha h^alpha / alpha! + t <= f_min / 2"
    if not bias + t <= dc.f_min / 2.0:
        raise ConditionViolated(first, f"{bias + t:.6g} > {dc.f_min / 2.0:.6g}")
    second = "C_Ktilde,2 h^2 < f_z"
    diag_gap = dc.f_z - dc.c_ktilde_2 * h ** 2
    if not diag_gap > 0:
        raise ConditionViolated(second, f"C_Ktilde,2 h^2 = {dc.c_ktilde_2 * h ** 2:.6g}, f_z = {dc.f_z:.6g}")

    f_z, f_max = dc.f_z, dc.f_max
    xz_bias = dc.c_xz_alpha * h ** dc.alpha / math.factorial(dc.alpha)
    diagonal = 3.0 * f_z * kc.int_k2 / (2.0 * n * h ** p)
    x = (C_K[k] / f_z ** 2) * (xz_bias + diagonal + t_prime) * (
        1.0 + 16.0 * f_z ** 2 / dc.f_min ** 3 * (bias + t)
    )

    nh = n * h ** p
    density_term = 2.0 * math.exp(-nh * t ** 2 / (2.0 * f_max * kc.int_k2 + (2.0 / 3.0) * kc.c_k * t))
    pair_term = 2.0 * math.exp(
        -(n - 1) * h ** (2 * p) * t_prime ** 2
        / (4.0 * f_max ** 2 * kc.int_k2 ** 2 + (8.0 / 3.0) * kc.c_k ** 2 * t_prime)
    )
    diagonal_term = 2.0 * math.exp(
        -nh * diag_gap ** 2 / (8.0 * f_max * kc.int_ktilde2 + 4.0 * kc.c_ktilde * diag_gap / 3.0)
    )
    raw = density_term + pair_term + diagonal_term
    return BoundResult(
        threshold_x=x,
        prob_bound=_clip(raw),
        raw_bound=raw,
        conditions=((first, True), (second, True)),
        terms=(density_term, pair_term, diagonal_term),
    )


# ---------------------------------------------------------------------------
# Empirical validity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidityReport:
    setting: int
    z: float
    n: int
    h: float
    k: ConcordanceKind
    reps: int
    seed: int
    bound: BoundResult
    true_tau: float
    violations: int
    undefined: int

    @property
    def frequency(self):
        return (self.violations + self.undefined) / self.reps

    @property
    def tolerance(self):
        q = self.bound.prob_bound
        return VALIDITY_SIGMAS * math.sqrt(q * (1.0 - q) / self.reps)

    @property
    def vacuous(self):
        return self.bound.vacuous

    @property
    def consistent(self):
        return self.vacuous or self.frequency <= self.bound.prob_bound + self.tolerance

    @property
    def status(self):
        if self.vacuous:
            return "vacuous"
        return "consistent" if self.consistent else "VIOLATED"


def _deviation_once(setting, n, seed, z, kind, spec, h, truth):
    sample = simulation.generate(simulation.SettingSpec(setting, n, seed))
    try:
        est = estimators.tau_hat(kind, sample, [z], spec, h)
    except (AllWeightsZero, DegenerateWindow):
        return math.nan
    return abs(est.value - truth)


def bound_validity_check(setting, z, n, h, t, t_prime, reps, seed, k=2, spec=None, threads=1):
    """
    Frequency of |tau_hat_k(z) - tau(z)| > x over reps simulated samples.

    Constants come from the setting's exact density; replications where the
    estimator is undefined count against the bound.
    """
    if reps < 1:
        raise InvalidParameter(f"reps must be positive, got {reps}")
    spec = spec or kernels.KernelSpec()
    k = ConcordanceKind(int(k))
    setting = simulation.SettingId(int(setting))
    dc = simulation.setting_density_constants(setting, z, h, spec)
    bound = deviation_bound(k, n, h, spec.dimension, t, t_prime, kernels.constants(spec), dc)
    truth = float(simulation.true_tau(setting, z))

    seeds = simulation.replication_seeds(seed, reps)
    args = [(setting, n, s, z, k.estimator, spec, h, truth) for s in seeds]
    if threads == 1:
        deviations = [_deviation_once(*a) for a in args]
    else:
        deviations = Parallel(n_jobs=threads, prefer="threads")(delayed(_deviation_once)(*a) for a in args)
    deviations = np.asarray(deviations, dtype=float)
    undefined = int(np.isnan(deviations).sum())
    violations = int((deviations[~np.isnan(deviations)] > bound.threshold_x).sum())
    report = ValidityReport(
        setting=int(setting), z=float(z), n=n, h=h, k=k, reps=reps, seed=seed, bound=bound,
        true_tau=truth, violations=violations, undefined=undefined,
    )
    _LOG.info(
        "  ✓ %d/%d deviations above x=%.4g (bound %.4g, %s)",
        violations + undefined, reps, bound.threshold_x, bound.prob_bound, report.status,
    )
    return report
