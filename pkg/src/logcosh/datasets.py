"""Embedded example datasets and CSV ingestion."""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .solvers import RegressionData

__all__ = ["NamedDataset", "builtin", "available", "load_csv", "write_csv", "checksum", "DataError"]


class DataError(ValueError):
    pass


@dataclass(frozen=True)
class NamedDataset:
    name: str
    y: np.ndarray
    X: np.ndarray | None = None
    column_names: tuple = ()
    response: str = "y"

    @property
    def n(self):
        return int(self.y.size)

    @property
    def p(self):
        return 0 if self.X is None else int(self.X.shape[1])

    def regression(self) -> RegressionData:
        X = np.empty((self.n, 0)) if self.X is None else self.X
        return RegressionData(self.y, X, self.column_names)


LOCATION25 = (
    -2.80, -1.98, -1.70, -1.20, -1.10, -0.82,
    -0.79, -0.73, -0.66, -0.51, -0.41, -0.35,
    -0.23, 0.10, 0.22, 0.25, 0.37, 0.52,
    0.93, 0.95, 1.36, 1.52, 1.76, 3.07,
    20.50,
)

TELEPHONE_YEARS = tuple(float(yr) for yr in range(1950, 1974))
# calls in tens of millions; 1955 is 0.73 as in the Rfit/Rousseeuw source data
TELEPHONE_CALLS = (
    0.44, 0.47, 0.47, 0.59, 0.66, 0.73, 0.81, 0.88,
    1.06, 1.2, 1.35, 1.49, 1.61, 2.12, 11.9, 12.4,
    14.2, 15.9, 18.2, 21.2, 4.3, 2.4, 2.7, 2.9,
)
# same table with the 1955 entry misprinted as 9.73
TELEPHONE_PRINTED_CALLS = TELEPHONE_CALLS[:5] + (9.73,) + TELEPHONE_CALLS[6:]


def _build(name):
    if name == "location25":
        return NamedDataset(name, np.array(LOCATION25), None, (), "y")
    if name in ("telephone", "telephone_printed"):
        calls = TELEPHONE_CALLS if name == "telephone" else TELEPHONE_PRINTED_CALLS
        return NamedDataset(name, np.array(calls), np.array(TELEPHONE_YEARS)[:, None], ("year",), "calls")
    raise KeyError(name)


_BUILTIN = ("location25", "telephone", "telephone_printed")


def available():
    return _BUILTIN


def builtin(name: str) -> NamedDataset:
    if name not in _BUILTIN:
        raise DataError(f"unknown dataset {name!r}; available: {', '.join(_BUILTIN)}")
    return _build(name)


def checksum(ds: NamedDataset) -> str:
    """SHA-256 over the exact float values (y, then X row-major)."""
    h = hashlib.sha256()
    h.update(np.ascontiguousarray(ds.y, dtype="<f8").tobytes())
    if ds.X is not None:
        h.update(np.ascontiguousarray(ds.X, dtype="<f8").tobytes())
    return h.hexdigest()


def load_csv(path, response: str) -> NamedDataset:
    """Read a comma-separated file with a header row.

    The ``response`` column becomes ``y``; all other columns become ``X`` in
    file order.  Row numbers in error messages count data rows from 1.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path} is empty (header row required)")
    header = [h.strip() for h in rows[0]]
    if response not in header:
        raise DataError(f"column {response!r} not found; columns are {', '.join(header)}")
    values = []
    for r, row in enumerate(rows[1:], start=1):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"row {r} has {len(row)} fields, expected {len(header)}")
        parsed = []
        for col, cell in zip(header, row):
            try:
                parsed.append(float(cell))
            except ValueError:
                raise DataError(f"non-numeric value at row {r}, column {col}: {cell!r}") from None
        values.append(parsed)
    if not values:
        raise DataError(f"{path} has no data rows")
    arr = np.array(values, dtype=float)
    j = header.index(response)
    others = [k for k in range(len(header)) if k != j]
    X = arr[:, others] if others else None
    return NamedDataset(path.stem, arr[:, j], X, tuple(header[k] for k in others), response)


def write_csv(ds: NamedDataset, path) -> None:
    """Write ``ds`` so that :func:`load_csv` reads back identical floats."""
    cols = [ds.response, *ds.column_names]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for i in range(ds.n):
            row = [ds.y[i]] + ([] if ds.X is None else list(ds.X[i]))
            w.writerow([repr(float(v)) for v in row])
