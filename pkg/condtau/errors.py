"""
Errors
======
Exception hierarchy shared by every condtau module.

Library code raises these; the CLI turns them into one-line messages and
exit code 1. Grid, cross-validation and Monte Carlo loops catch the
per-point ones (AllWeightsZero, DegenerateWindow) and count them instead.
"""


class CondTauError(Exception):
    """Root of all condtau errors."""


class InvalidParameter(CondTauError, ValueError):
    """A precondition on an argument does not hold (h <= 0, n < 2, ...)."""


class DimensionMismatch(InvalidParameter):
    """A point or sample does not have the dimension the kernel expects."""


class AllWeightsZero(CondTauError):
    """Every kernel weight vanishes at z, so the estimator is undefined there."""

    def __init__(self, z, h):
        self.z = z
        self.h = h
        super().__init__(f"all kernel weights are zero at z={_fmt_point(z)} with h={h:g}")


class DegenerateWindow(CondTauError):
    """Too few observations carry weight at z for the requested quantity."""


class ConditionViolated(CondTauError):
    """A finite-sample bound was evaluated outside its validity domain."""

    def __init__(self, condition, detail=""):
        self.condition = condition
        message = f"condition violated: {condition}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class SampleFormatError(CondTauError):
    """A sample CSV file is malformed."""

    def __init__(self, path, message, line=None):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


def _fmt_point(z):
    try:
        return "(" + ", ".join(f"{float(v):g}" for v in z) + ")"
    except TypeError:
        return f"{float(z):g}"
