"""
condtau
=======
Kernel estimation of the conditional Kendall's tau of (X1, X2) given Z = z:
estimators, bandwidth selection, confidence intervals, finite-sample bounds
and the Monte Carlo study of their behaviour.
"""

__version__ = "1.0.0"

from .errors import (  # noqa: E402
    AllWeightsZero,
    CondTauError,
    ConditionViolated,
    DegenerateWindow,
    DimensionMismatch,
    InvalidParameter,
    SampleFormatError,
)
from .estimators import (  # noqa: E402
    ConcordanceKind,
    EstimatorKind,
    TauEstimate,
    copula_parameter,
    estimate_all,
    g,
    tau_hat,
    tau_hat_grid,
    tau_tilde,
)
from .kernels import KernelSpec  # noqa: E402
from .sample import Sample, read_sample_csv, write_sample_csv  # noqa: E402
