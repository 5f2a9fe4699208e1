"""
Weights
=======
Nadaraya-Watson weights w_i(z) = K_h(Z_i - z) / sum_j K_h(Z_j - z), the kernel
density estimate of Z, and its K-tilde counterpart (K-tilde = K^2 / int K^2)
that enters the finite-sample bounds.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import AllWeightsZero, DimensionMismatch


@dataclass(frozen=True)
class WeightVector:
    weights: np.ndarray
    s_n: float
    z: np.ndarray
    h: float

    @property
    def active(self):
        """Indices of the observations with a nonzero weight."""
        return np.flatnonzero(self.weights)

    @property
    def n_effective(self):
        return int(np.count_nonzero(self.weights))


def as_point(sample, z):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if z.shape != (sample.p,):
        raise DimensionMismatch(f"query point has shape {z.shape}, sample covariate has dimension {sample.p}")
    return z


def kernel_column(sample, z, spec, h):
    """K_h(Z_i - z) for every observation."""
    z = as_point(sample, z)
    if spec.dimension != sample.p:
        raise DimensionMismatch(f"kernel dimension {spec.dimension} does not match sample dimension {sample.p}")
    return kernels.scaled_evaluate_rows(spec, h, sample.z - z)


def normalize(column, z, h):
    # Summing only the nonzero entries keeps windowed and full evaluations bit-identical.
    total = column[column != 0.0].sum()
    if total == 0.0:
        raise AllWeightsZero(z, h)
    weights = column / total
    return WeightVector(weights=weights, s_n=float(np.dot(weights, weights)), z=z, h=float(h))


def nw_weights(sample, z, spec, h):
    z = as_point(sample, z)
    return normalize(kernel_column(sample, z, spec, h), z, h)


def kde(sample, z, spec, h):
    """f-hat_Z(z) = n^-1 sum_j K_h(Z_j - z)."""
    return float(kernel_column(sample, z, spec, h).mean())


def kde_squared_kernel(sample, z, spec, h):
    """Density estimate with the kernel K-tilde = K^2 / int K^2."""
    z = as_point(sample, z)
    if spec.dimension != sample.p:
        raise DimensionMismatch(f"kernel dimension {spec.dimension} does not match sample dimension {sample.p}")
    kernels.check_bandwidth(h)
    u = (sample.z - z) / h
    k_tilde = kernels.evaluate_rows(spec, u) ** 2 / kernels.constants(spec).int_k2
    return float(k_tilde.mean() / h ** spec.dimension)
