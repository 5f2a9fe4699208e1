"""
Sample
======
The i.i.d. dataset (X1, X2, Z) and its CSV codec.

CSV layout: UTF-8, comma separated, '.' decimals, LF line endings, header
`x1,x2,z1[,z2,...]`. Floats are written with the shortest representation
that round-trips, so write -> read gives back the exact same sample.
"""

import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import InvalidParameter, SampleFormatError


@dataclass(frozen=True)
class Sample:
    """n observations of X = (X1, X2) and a p-dimensional covariate Z."""

    x: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        z = np.array(self.z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        if x.ndim != 2 or x.shape[1] != 2:
            raise InvalidParameter(f"x must have shape (n, 2), got {x.shape}")
        if z.ndim != 2 or z.shape[0] != x.shape[0]:
            raise InvalidParameter(f"z must have shape (n, p) with n={x.shape[0]}, got {z.shape}")
        if x.shape[0] < 2:
            raise InvalidParameter(f"a sample needs at least 2 observations, got {x.shape[0]}")
        x.setflags(write=False)
        z.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "z", z)

    @classmethod
    def from_columns(cls, x1, x2, z):
        return cls(x=np.column_stack([x1, x2]), z=z)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def p(self):
        return self.z.shape[1]

    def take(self, index):
        return Sample(x=self.x[index], z=self.z[index])

    def without(self, i, j):
        keep = np.ones(self.n, dtype=bool)
        keep[[i, j]] = False
        return self.take(keep)


# ---------------------------------------------------------------------------
# CSV codec
# ---------------------------------------------------------------------------

_FIELDS_RE = re.compile(r"line (\d+)")


def _to_float(column, name, path):
    try:
        return np.array(column, dtype=float)
    except ValueError:
        pass
    for row, cell in enumerate(column):
        try:
            float(cell)
        except (TypeError, ValueError):
            raise SampleFormatError(path, f"non-numeric value {cell!r} in column {name}", line=row + 2) from None
    raise SampleFormatError(path, f"could not parse column {name}")


def read_sample_csv(path):
    """Load a sample; p is inferred from the z1..zp header columns."""
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.ParserError as exc:
        match = _FIELDS_RE.search(str(exc))
        line = int(match.group(1)) if match else None
        raise SampleFormatError(path, "malformed row (wrong number of fields)", line=line) from None
    except pd.errors.EmptyDataError:
        raise SampleFormatError(path, "file is empty") from None

    header = [c.strip() for c in frame.columns]
    p = len(header) - 2
    expected = ["x1", "x2"] + [f"z{k}" for k in range(1, p + 1)]
    if p < 1 or header != expected:
        raise SampleFormatError(path, f"header must be x1,x2,z1[,z2,...], got {','.join(header)}", line=1)

    missing = frame.isna().any(axis=1).to_numpy() | (frame == "").any(axis=1).to_numpy()
    if missing.any():
        raise SampleFormatError(path, "malformed row (missing fields)", line=int(np.argmax(missing)) + 2)

    values = {name: _to_float(frame[col].to_numpy(), name, path) for name, col in zip(header, frame.columns)}
    if len(frame) < 2:
        raise SampleFormatError(path, f"need at least 2 rows, found {len(frame)}")
    z = np.column_stack([values[f"z{k}"] for k in range(1, p + 1)])
    return Sample.from_columns(values["x1"], values["x2"], z)


def format_float(value):
    return repr(float(value))


def write_frame(frame, path_or_buf):
    """Write a DataFrame as CSV with shortest round-trip float formatting."""
    out = frame.copy()
    for col in out.columns:
        if pd.api.types.is_float_dtype(out[col]):
            out[col] = out[col].map(format_float)
    out.to_csv(path_or_buf, index=False, lineterminator="\n", encoding="utf-8")


def sample_frame(sample):
    data = {"x1": sample.x[:, 0], "x2": sample.x[:, 1]}
    for k in range(sample.p):
        data[f"z{k + 1}"] = sample.z[:, k]
    return pd.DataFrame(data)


def write_sample_csv(sample, path):
    write_frame(sample_frame(sample), path)
