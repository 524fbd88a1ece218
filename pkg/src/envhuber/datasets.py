"""CSV ingestion, predictor standardization, and the bundled example table.

The ingestion contract is strict: rectangular numeric CSV with a header
row; malformed cells are reported with their row number and column
name.  The bundled table is the 1977 US state facts-and-figures data
(as distributed in R's ``datasets`` package as ``state.x77``), 50 rows
by 8 numeric columns, with the murder rate as the conventional
response; row order is alphabetical by state (see
``data/statex77_states.txt``).
"""

import csv
from dataclasses import dataclass
from importlib import resources

import numpy as np

__all__ = [
    "DataError",
    "TableData",
    "ingest_csv",
    "standardize_predictors",
    "statex77_path",
    "load_statex77",
]


class DataError(ValueError):
    """Malformed input table or options."""


@dataclass
class TableData:
    y: np.ndarray
    X: np.ndarray
    response: str
    features: list


def ingest_csv(path, response):
    """Read a rectangular numeric CSV and split off the response column."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataError(f"cannot read {path}: {e}") from e
    rows = [r for r in rows if r and not (len(r) == 1 and not r[0].strip())]
    if len(rows) < 2:
        raise DataError(f"{path}: need a header row and at least one data row")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"{path}: duplicate column names in header")
    if response not in header:
        raise DataError(
            f"{path}: response column {response!r} not found; "
            f"columns are {header}")
    ncol = len(header)
    data = np.empty((len(rows) - 1, ncol))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != ncol:
            raise DataError(f"{path}: row {i} has {len(row)} fields, "
                            f"expected {ncol}")
        for j, cell in enumerate(row):
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise DataError(f"{path}: row {i}, column {header[j]!r}: "
                                f"non-numeric value {cell.strip()!r}") from None
    j = header.index(response)
    return TableData(y=data[:, j].copy(), X=np.delete(data, j, axis=1),
                     response=response,
                     features=[h for h in header if h != response])


def standardize_predictors(X):
    """Scale columns to unit sample standard deviation (divisor n-1).

    Returns the rescaled matrix and the scale vector; slopes fitted on
    the rescaled predictors map back to the original scale by dividing
    by the scales elementwise.  Columns are not centered.
    """
    X = np.asarray(X, dtype=float)
    s = X.std(axis=0, ddof=1)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        bad = [int(i) for i in np.where(~(s > 0) | ~np.isfinite(s))[0]]
        raise DataError(f"constant or non-finite predictor columns: {bad}")
    return X / s, s


def statex77_path():
    """Filesystem path of the bundled state table."""
    return str(resources.files("envhuber").joinpath("data/statex77.csv"))


def load_statex77(response="Murder"):
    return ingest_csv(statex77_path(), response)
