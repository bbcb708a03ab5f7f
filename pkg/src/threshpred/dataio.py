"""CSV ingestion and emission for empirical and simulated datasets.

Files hold raw time-indexed series, one header row, comma separated, UTF-8:
a date column (ISO-8601), the regressand, the regressors and the threshold
variable.  The parser performs the lag alignment: row t of the resulting
estimation sample pairs ``y_t`` with ``x_{t-1}`` and ``q_{t-1}``, so the
first file row contributes only its regressor and threshold values.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .dgp import Sample
from .errors import MissingColumn, ParseError, TooFewRows

MIN_USABLE_ROWS = 30


@dataclass(frozen=True)
class ColumnMapping:
    """Names of the used columns in a dataset file."""

    y: str
    x: tuple
    q: str
    date: str = "date"

    def __post_init__(self):
        object.__setattr__(self, "x", tuple(self.x))


@dataclass(frozen=True)
class EmpiricalDataset:
    """Lag-aligned numeric arrays parsed from a CSV file."""

    dates: tuple
    y: np.ndarray
    x_lag: np.ndarray
    q_lag: np.ndarray
    mapping: ColumnMapping
    extra: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def to_sample(self, has_intercept: bool = True) -> Sample:
        return Sample(y=self.y, x_lag=self.x_lag, q_lag=self.q_lag,
                      has_intercept=has_intercept)


def _parse_float(cell: str, row: int, col: str) -> float:
    try:
        value = float(cell.strip())
    except ValueError:
        raise ParseError(row, col) from None
    if not np.isfinite(value):
        raise ParseError(row, col, f"non-finite value at row {row}, column {col!r}")
    return value


def parse_dataset(path, mapping: ColumnMapping, extra_cols: tuple = ()) -> EmpiricalDataset:
    """Read and lag-align a CSV dataset.

    Parameters
    ----------
    path : str or file-like
        CSV file with one header row.
    mapping : ColumnMapping
        Names of the date, regressand, regressor and threshold columns.
    extra_cols : tuple of str
        Additional numeric columns to carry through (aligned like ``y``),
        e.g. stored coefficient-shock columns of simulated files.

    Raises
    ------
    MissingColumn, ParseError, TooFewRows
        Per the documented file contract.  Row numbers in errors are 1-based
        data rows (the header is row 0).
    """
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            text = fh.read()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise TooFewRows("file is empty") from None
    header = [h.strip() for h in header]
    used = [mapping.date, mapping.y, *mapping.x, mapping.q, *extra_cols]
    for name in used:
        if name not in header:
            raise MissingColumn(f"column {name!r} not in header {header}")
    idx = {name: header.index(name) for name in used}

    dates, y_raw, q_raw = [], [], []
    x_raw = []
    extra_raw = {name: [] for name in extra_cols}
    for rownum, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        dates.append(row[idx[mapping.date]].strip())
        y_raw.append(_parse_float(row[idx[mapping.y]], rownum, mapping.y))
        x_raw.append([_parse_float(row[idx[name]], rownum, name) for name in mapping.x])
        q_raw.append(_parse_float(row[idx[mapping.q]], rownum, mapping.q))
        for name in extra_cols:
            extra_raw[name].append(_parse_float(row[idx[name]], rownum, name))

    n_rows = len(y_raw)
    if n_rows - 1 < MIN_USABLE_ROWS:
        raise TooFewRows(f"{n_rows} data rows give {max(n_rows - 1, 0)} usable "
                         f"observations; need at least {MIN_USABLE_ROWS}")

    y = np.asarray(y_raw[1:])
    x_lag = np.asarray(x_raw[:-1])
    q_lag = np.asarray(q_raw[:-1])
    extra = {name: np.asarray(vals) for name, vals in extra_raw.items()}
    return EmpiricalDataset(dates=tuple(dates[1:]), y=y, x_lag=x_lag, q_lag=q_lag,
                            mapping=mapping, extra=extra)


def write_series_csv(path, dates, columns: dict) -> None:
    """Write raw series columns to CSV with full float round-trip precision."""
    names = list(columns)
    arrays = [np.asarray(columns[name]) for name in names]
    n = len(dates)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *names])
        for i in range(n):
            writer.writerow([dates[i], *(repr(float(a[i])) for a in arrays)])
