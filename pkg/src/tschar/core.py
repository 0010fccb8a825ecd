"""Data model, validation, normalization and CSV ingestion/serialization.

Every other module works on the types defined here. A :class:`TimeSeries`
is an immutable, finite, uniformly sampled vector; a :class:`LabeledDataset`
pairs series with categorical labels; :class:`FeatureVector` and
:class:`FeatureMatrix` hold real-valued features where ``NaN`` is the
MISSING marker (a feature whose computation failed).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    ConstantSeriesError,
    EmptyDatasetError,
    FormatError,
    LengthMismatchError,
    NameMismatchError,
    TooShortError,
)

MISSING = float("nan")

FORMATS = ("wide-csv", "long-csv")

_UNIFORM_RTOL = 1e-6


def is_missing(value) -> bool:
    return value is None or (isinstance(value, float) and math.isnan(value))


def format_float(value: float) -> str:
    """Render a float with 17 significant digits (empty string for MISSING)."""
    if is_missing(value):
        return ""
    return f"{float(value):.17g}"


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError("time-series values must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Uniformly sampled univariate series.

    Values are stored as a read-only float64 array; ``dt`` is the sampling
    period.
    """

    values: np.ndarray
    id: str = ""
    dt: float = 1.0

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.size < 1:
            raise TooShortError("a time series needs at least one value")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"series {self.id!r}: non-finite value at index {bad}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"sampling period must be positive, got {self.dt}")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "id", str(self.id))
        object.__setattr__(self, "dt", float(self.dt))

    def __len__(self) -> int:
        return self.values.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, TimeSeries):
            return NotImplemented
        return (
            self.id == other.id
            and self.dt == other.dt
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.id, self.dt, self.values.tobytes()))

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(values, id=self.id, dt=self.dt)


def as_array(x, min_length: int = 1) -> np.ndarray:
    """Return the float values of ``x`` (a TimeSeries or any 1-d array-like)."""
    if isinstance(x, TimeSeries):
        arr = x.values
    else:
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 1:
            raise ValueError("expected a one-dimensional series")
        if not np.all(np.isfinite(arr)):
            raise ValueError("series contains non-finite values")
    if arr.size < min_length:
        raise TooShortError(f"series of length {arr.size} is shorter than {min_length}")
    return arr


def is_constant(arr: np.ndarray) -> bool:
    return bool(arr.size == 0 or np.all(arr == arr[0]))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    series: tuple
    labels: tuple

    def __post_init__(self):
        series = tuple(
            s if isinstance(s, TimeSeries) else TimeSeries(s, id=str(i))
            for i, s in enumerate(self.series)
        )
        labels = tuple(str(lab) for lab in self.labels)
        if len(series) == 0:
            raise EmptyDatasetError("dataset contains no series")
        if len(series) != len(labels):
            raise ValueError(f"{len(series)} series but {len(labels)} labels")
        ids = [s.id for s in series]
        if len(set(ids)) != len(ids):
            raise ValueError("series ids must be unique")
        object.__setattr__(self, "series", series)
        object.__setattr__(self, "labels", labels)

    @property
    def classes(self) -> tuple:
        return tuple(sorted(set(self.labels)))

    @property
    def ids(self) -> tuple:
        return tuple(s.id for s in self.series)

    def __len__(self) -> int:
        return len(self.series)

    def __getitem__(self, i) -> TimeSeries:
        return self.series[i]

    def subset(self, indices: Iterable[int]) -> "LabeledDataset":
        idx = list(indices)
        return LabeledDataset(
            tuple(self.series[i] for i in idx), tuple(self.labels[i] for i in idx)
        )

    def common_length(self) -> int:
        """Length shared by all series; raises if lengths differ."""
        lengths = {len(s) for s in self.series}
        if len(lengths) != 1:
            raise LengthMismatchError(f"series lengths differ: {sorted(lengths)}")
        return lengths.pop()

    def __eq__(self, other):
        if not isinstance(other, LabeledDataset):
            return NotImplemented
        return self.labels == other.labels and self.series == other.series


@dataclass(frozen=True, eq=False)
class FeatureVector:
    names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        values = np.array(self.values, dtype=float)
        if len(set(names)) != len(names):
            raise ValueError("feature names must be unique")
        if values.shape != (len(names),):
            raise ValueError("names and values must align")
        values.setflags(write=False)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", values)

    def __getitem__(self, name: str) -> float:
        return float(self.values[self.names.index(name)])

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.values)

    def as_dict(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Rows are series ids, columns are feature names, NaN marks MISSING.

    ``reasons`` maps ``(row_id, column)`` to the error text that produced a
    MISSING cell.
    """

    row_ids: tuple
    columns: tuple
    values: np.ndarray
    reasons: Mapping = field(default_factory=dict)

    def __post_init__(self):
        row_ids = tuple(str(r) for r in self.row_ids)
        columns = tuple(str(c) for c in self.columns)
        values = np.array(self.values, dtype=float).reshape(len(row_ids), len(columns))
        if len(set(row_ids)) != len(row_ids):
            raise ValueError("row ids must be unique")
        if len(set(columns)) != len(columns):
            raise ValueError("column names must be unique")
        values.setflags(write=False)
        object.__setattr__(self, "row_ids", row_ids)
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "reasons", dict(self.reasons))

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def row(self, i: int) -> FeatureVector:
        return FeatureVector(self.columns, self.values[i])

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.columns.index(name)]

    def select(self, columns: Sequence[str]) -> "FeatureMatrix":
        idx = [self.columns.index(c) for c in columns]
        reasons = {k: v for k, v in self.reasons.items() if k[1] in columns}
        return FeatureMatrix(self.row_ids, tuple(columns), self.values[:, idx], reasons)

    def take_rows(self, indices: Sequence[int]) -> "FeatureMatrix":
        idx = list(indices)
        rows = [self.row_ids[i] for i in idx]
        reasons = {k: v for k, v in self.reasons.items() if k[0] in rows}
        return FeatureMatrix(rows, self.columns, self.values[idx], reasons)

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return (
            self.row_ids == other.row_ids
            and self.columns == other.columns
            and np.array_equal(self.values, other.values, equal_nan=True)
        )

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id", *self.columns])
            for rid, row in zip(self.row_ids, self.values):
                writer.writerow([rid, *(format_float(v) for v in row)])

    @classmethod
    def from_csv(cls, path) -> "FeatureMatrix":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise EmptyDatasetError(f"{path}: empty matrix file")
        header = rows[0]
        if not header or header[0] != "id":
            raise FormatError(1, header[0] if header else "", "header must start with 'id'")
        ids, values = [], []
        for r, row in enumerate(rows[1:], start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(r, "", f"expected {len(header)} cells, got {len(row)}")
            ids.append(row[0])
            vals = []
            for c, cell in zip(header[1:], row[1:]):
                vals.append(MISSING if cell.strip() == "" else _parse_float(cell, r, c))
            values.append(vals)
        return cls(ids, header[1:], np.array(values, dtype=float).reshape(len(ids), len(header) - 1))


def check_same_names(f1: FeatureVector, f2: FeatureVector) -> None:
    if f1.names != f2.names:
        raise NameMismatchError("feature vectors have different name lists")


# --- preprocessing ---------------------------------------------------------


def zscore(x: TimeSeries) -> TimeSeries:
    """Subtract the mean and divide by the unbiased standard deviation."""
    arr = as_array(x, min_length=2)
    if is_constant(arr):
        raise ConstantSeriesError("cannot z-score a constant series")
    out = (arr - arr.mean()) / arr.std(ddof=1)
    if isinstance(x, TimeSeries):
        return x.with_values(out)
    return TimeSeries(out)


def zscore_dataset(ds: LabeledDataset) -> LabeledDataset:
    return LabeledDataset(tuple(zscore(s) for s in ds.series), ds.labels)


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    min: float
    max: float
    n: int


def summary_stats(x) -> SummaryStats:
    arr = as_array(x, min_length=2)
    return SummaryStats(
        mean=float(arr.mean()),
        std=float(arr.std(ddof=1)),
        min=float(arr.min()),
        max=float(arr.max()),
        n=int(arr.size),
    )


# --- ingestion -------------------------------------------------------------


def _parse_float(cell: str, row: int, column: str) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise FormatError(row, column, f"cannot parse {cell!r} as a number") from None
    if not math.isfinite(value):
        raise FormatError(row, column, f"non-finite value {cell!r}")
    return value


def _read_rows(path) -> list:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [row for row in csv.reader(fh)]
    # blank lines are ignored
    return [row for row in rows if any(cell.strip() for cell in row)]


def load_dataset(path, format: str = "wide-csv") -> LabeledDataset:
    """Read a labeled dataset from ``path``.

    ``wide-csv``: header ``id,label,v1,v2,...``, one series per row, trailing
    empty cells shorten a series. ``long-csv``: header ``id,label,t,value``,
    rows grouped by id and sorted by ``t``; ``t`` must be uniformly spaced.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")
    rows = _read_rows(path)
    if len(rows) < 2:
        raise EmptyDatasetError(f"{path}: no data rows")
    if format == "wide-csv":
        return _parse_wide(rows)
    return _parse_long(rows)


def _parse_wide(rows: list) -> LabeledDataset:
    header = [h.strip() for h in rows[0]]
    if header[:2] != ["id", "label"]:
        raise FormatError(1, header[0] if header else "", "wide-csv header must start with 'id,label'")
    series, labels = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) > len(header):
            raise FormatError(r, "", f"{len(row)} cells but header has {len(header)}")
        cells = [c.strip() for c in row[2:]]
        while cells and cells[-1] == "":
            cells.pop()
        values = []
        for j, cell in enumerate(cells):
            column = header[j + 2]
            if cell == "":
                raise FormatError(r, column, "empty cell before the end of the series")
            values.append(_parse_float(cell, r, column))
        if not values:
            raise FormatError(r, header[2] if len(header) > 2 else "", "series has no values")
        sid = row[0].strip()
        if not sid:
            raise FormatError(r, "id", "empty id")
        series.append(TimeSeries(values, id=sid))
        labels.append(row[1].strip() if len(row) > 1 else "")
    if not series:
        raise EmptyDatasetError("no series found")
    if len({s.id for s in series}) != len(series):
        raise FormatError(0, "id", "duplicate series ids")
    return LabeledDataset(tuple(series), tuple(labels))


def _parse_long(rows: list) -> LabeledDataset:
    header = [h.strip() for h in rows[0]]
    if header != ["id", "label", "t", "value"]:
        raise FormatError(1, header[0] if header else "", "long-csv header must be 'id,label,t,value'")
    groups: dict = {}
    order = []
    last_id = None
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != 4:
            raise FormatError(r, "", f"expected 4 cells, got {len(row)}")
        sid, label = row[0].strip(), row[1].strip()
        t = _parse_float(row[2].strip(), r, "t")
        v = _parse_float(row[3].strip(), r, "value")
        if sid != last_id:
            if sid in groups:
                raise FormatError(r, "id", f"rows for id {sid!r} are not contiguous")
            groups[sid] = {"label": label, "t": [], "v": [], "row": r}
            order.append(sid)
            last_id = sid
        g = groups[sid]
        if label != g["label"]:
            raise FormatError(r, "label", f"label changes within id {sid!r}")
        if g["t"] and t <= g["t"][-1]:
            raise FormatError(r, "t", "t must be strictly increasing within an id")
        g["t"].append(t)
        g["v"].append(v)
    series, labels = [], []
    for sid in order:
        g = groups[sid]
        t = np.array(g["t"])
        dt = 1.0
        if t.size >= 2:
            steps = np.diff(t)
            dt = float((t[-1] - t[0]) / (t.size - 1))
            if not np.allclose(steps, dt, rtol=_UNIFORM_RTOL, atol=0.0):
                raise FormatError(g["row"], "t", f"non-uniform sampling for id {sid!r}")
        series.append(TimeSeries(g["v"], id=sid, dt=dt))
        labels.append(g["label"])
    return LabeledDataset(tuple(series), tuple(labels))


def save_dataset(ds: LabeledDataset, path, format: str = "wide-csv") -> None:
    """Write ``ds`` so that :func:`load_dataset` reproduces it exactly."""
    if format not in FORMATS:
        raise ValueError(f"unknown format {format!r}")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if format == "wide-csv":
            width = max(len(s) for s in ds.series)
            writer.writerow(["id", "label", *(f"v{i}" for i in range(1, width + 1))])
            for s, label in zip(ds.series, ds.labels):
                cells = [format_float(v) for v in s.values]
                writer.writerow([s.id, label, *cells, *([""] * (width - len(cells)))])
        else:
            writer.writerow(["id", "label", "t", "value"])
            for s, label in zip(ds.series, ds.labels):
                for i, v in enumerate(s.values):
                    writer.writerow([s.id, label, format_float(i * s.dt), format_float(v)])
