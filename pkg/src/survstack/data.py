"""Survival data containers, validation and CSV ingestion.

Everything is stored row-wise as half-open observation intervals
``(start, stop]``.  A single-record dataset has one row per subject with
``start = entry``; a counting-process dataset may have several rows per
subject carrying time-varying covariates.  Risk-set membership at time ``t``
is ``start < t <= stop`` in both cases.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Hashable, Mapping, Sequence

import numpy as np

SINGLE = "single"
COUNTING = "counting"


class SchemaError(ValueError):
    """A required column is missing or an unexpected column is present."""


class ValidationError(ValueError):
    """A record violates a dataset invariant."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class SubjectRecord:
    id: Hashable
    exit: float
    event: int
    covariates: tuple[float, ...]
    entry: float = 0.0


@dataclass(frozen=True)
class IntervalRecord:
    id: Hashable
    start: float
    stop: float
    event: int
    covariates: tuple[float, ...]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class SurvivalDataset:
    """Immutable, validated survival data.

    Parameters are row arrays: ``ids``, ``start``, ``stop``, ``event`` and a
    ``(rows, p)`` covariate matrix.  Use :meth:`from_arrays` or
    :meth:`from_records` rather than calling this directly.
    """

    def __init__(
        self,
        ids: Sequence[Hashable],
        start: np.ndarray,
        stop: np.ndarray,
        event: np.ndarray,
        covariates: np.ndarray,
        covariate_names: Sequence[str] | None = None,
        format: str = SINGLE,
    ):
        if format not in (SINGLE, COUNTING):
            raise ValueError(f"unknown format {format!r}")
        start = np.asarray(start, dtype=float).reshape(-1)
        stop = np.asarray(stop, dtype=float).reshape(-1)
        event_raw = np.asarray(event).reshape(-1)
        n = stop.shape[0]
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(n, -1) if n else covariates.reshape(0, 0)
        if covariates.shape[0] != n or start.shape[0] != n or event_raw.shape[0] != n:
            raise ValidationError("row arrays have inconsistent lengths")
        ids = list(ids)
        if len(ids) != n:
            raise ValidationError("ids length does not match row count")
        if n == 0:
            raise ValidationError("dataset is empty")
        p = covariates.shape[1]
        if covariate_names is None:
            covariate_names = [f"x{j + 1}" for j in range(p)]
        covariate_names = tuple(str(c) for c in covariate_names)
        if len(covariate_names) != p:
            raise ValidationError(
                f"{len(covariate_names)} covariate names for {p} covariate columns"
            )
        if len(set(covariate_names)) != p:
            raise ValidationError("duplicate covariate names")

        for r in range(n):
            if not (np.isfinite(start[r]) and np.isfinite(stop[r])):
                raise ValidationError("non-finite time", r)
            if start[r] < 0 or stop[r] < 0:
                raise ValidationError("negative time", r)
            if not start[r] < stop[r]:
                raise ValidationError(
                    f"entry/start {start[r]!r} must be before exit/stop {stop[r]!r}", r
                )
            if event_raw[r] not in (0, 1):
                raise ValidationError(f"event must be 0 or 1, got {event_raw[r]!r}", r)
        bad = ~np.isfinite(covariates)
        if bad.any():
            raise ValidationError("non-finite covariate value", int(np.argwhere(bad)[0, 0]))
        event = event_raw.astype(np.int8)

        if format == SINGLE:
            if len(set(ids)) != n:
                raise ValidationError("duplicate subject id in single-record data")
        else:
            _check_intervals(ids, start, stop, event)

        self._ids = tuple(ids)
        self._start = _frozen(start)
        self._stop = _frozen(stop)
        self._event = _frozen(event)
        self._x = _frozen(covariates.reshape(n, p))
        self._names = covariate_names
        self._format = format

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_arrays(
        cls,
        time,
        event,
        covariates=None,
        entry=None,
        ids=None,
        covariate_names=None,
    ) -> "SurvivalDataset":
        """Single-record dataset from plain arrays."""
        time = np.asarray(time, dtype=float).reshape(-1)
        n = time.shape[0]
        if covariates is None:
            covariates = np.zeros((n, 0))
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        entry = np.zeros(n) if entry is None else np.asarray(entry, dtype=float)
        if ids is None:
            ids = list(range(n))
        return cls(ids, entry, time, event, covariates, covariate_names, SINGLE)

    @classmethod
    def from_records(cls, records, covariate_names=None) -> "SurvivalDataset":
        records = list(records)
        if not records:
            raise ValidationError("dataset is empty")
        kinds = {type(r) for r in records}
        if len(kinds) != 1:
            raise ValidationError("records must be all SubjectRecord or all IntervalRecord")
        p = len(records[0].covariates)
        for i, r in enumerate(records):
            if len(r.covariates) != p:
                raise ValidationError(f"expected {p} covariates, got {len(r.covariates)}", i)
        x = np.array([r.covariates for r in records], dtype=float).reshape(len(records), p)
        ids = [r.id for r in records]
        if kinds == {SubjectRecord}:
            start = [r.entry for r in records]
            stop = [r.exit for r in records]
            fmt = SINGLE
        else:
            start = [r.start for r in records]
            stop = [r.stop for r in records]
            fmt = COUNTING
        event = [r.event for r in records]
        return cls(ids, start, stop, event, x, covariate_names, fmt)

    # -- accessors --------------------------------------------------------
    @property
    def format(self) -> str:
        return self._format

    @property
    def ids(self) -> tuple:
        return self._ids

    @property
    def start(self) -> np.ndarray:
        return self._start

    @property
    def stop(self) -> np.ndarray:
        return self._stop

    @property
    def event(self) -> np.ndarray:
        return self._event

    @property
    def covariates(self) -> np.ndarray:
        return self._x

    @property
    def covariate_names(self) -> tuple[str, ...]:
        return self._names

    @property
    def p(self) -> int:
        return self._x.shape[1]

    @property
    def n_rows(self) -> int:
        return self._stop.shape[0]

    @property
    def n_events(self) -> int:
        return int(self._event.sum())

    # single-format aliases
    @property
    def entry(self) -> np.ndarray:
        return self._start

    @property
    def time(self) -> np.ndarray:
        return self._stop

    @property
    def records(self) -> tuple:
        rows = []
        for r in range(self.n_rows):
            cov = tuple(float(v) for v in self._x[r])
            if self._format == SINGLE:
                rows.append(
                    SubjectRecord(self._ids[r], float(self._stop[r]), int(self._event[r]), cov,
                                  float(self._start[r]))
                )
            else:
                rows.append(
                    IntervalRecord(self._ids[r], float(self._start[r]), float(self._stop[r]),
                                   int(self._event[r]), cov)
                )
        return tuple(rows)

    def subjects(self) -> "SurvivalDataset":
        """Collapse to one row per subject (first-seen order).

        Entry is the earliest start, exit the last stop, event the final
        interval's flag and covariates those of the first interval.  A
        single-record dataset is returned unchanged.
        """
        if self._format == SINGLE:
            return self
        order: dict = {}
        for r, i in enumerate(self._ids):
            order.setdefault(i, []).append(r)
        ids, start, stop, event, x = [], [], [], [], []
        for i, rows in order.items():
            ids.append(i)
            start.append(self._start[rows[0]])
            stop.append(self._stop[rows[-1]])
            event.append(self._event[rows[-1]])
            x.append(self._x[rows[0]])
        return SurvivalDataset(ids, start, stop, event, np.array(x).reshape(len(ids), self.p),
                               self._names, SINGLE)

    def subset(self, rows) -> "SurvivalDataset":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        return SurvivalDataset(
            [self._ids[r] for r in rows], self._start[rows], self._stop[rows],
            self._event[rows], self._x[rows], self._names, self._format,
        )

    def __len__(self) -> int:
        return self.n_rows

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, SurvivalDataset):
            return NotImplemented
        return (
            self._format == other._format
            and self._names == other._names
            and self._ids == other._ids
            and np.array_equal(self._start, other._start)
            and np.array_equal(self._stop, other._stop)
            and np.array_equal(self._event, other._event)
            and np.array_equal(self._x, other._x)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return (f"SurvivalDataset(format={self._format!r}, rows={self.n_rows}, "
                f"p={self.p}, events={self.n_events})")


def _check_intervals(ids, start, stop, event) -> None:
    last: dict = {}
    for r, i in enumerate(ids):
        prev = last.get(i)
        if prev is not None:
            if event[prev] == 1:
                raise ValidationError(f"subject {i!r} has an interval after its event", r)
            if start[r] < stop[prev]:
                raise ValidationError(
                    f"subject {i!r}: intervals overlap or are out of order", r
                )
        last[i] = r


# -- risk sets ---------------------------------------------------------------

def event_times(ds: SurvivalDataset) -> np.ndarray:
    """Distinct times with at least one event, ascending."""
    return np.unique(ds.stop[ds.event == 1])


def at_risk(ds: SurvivalDataset, t: float) -> np.ndarray:
    """Boolean row mask of ``start < t <= stop``."""
    return (ds.start < t) & (t <= ds.stop)


def risk_set(ds: SurvivalDataset, t: float) -> list:
    """Ids of subjects at risk at the observed event time ``t``.

    The rows returned by :func:`at_risk` carry the covariates valid at ``t``.
    """
    times = event_times(ds)
    if not np.any(times == t):
        raise ValueError(f"{t!r} is not an observed event time")
    return [ds.ids[r] for r in np.flatnonzero(at_risk(ds, t))]


# -- CSV -----------------------------------------------------------------------

_SINGLE_KEYS = ("id", "entry", "time", "event")
_COUNTING_KEYS = ("id", "start", "stop", "event")


def _parse_float(text: str, column: str, row: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"column {column!r}: cannot parse {text!r} as a number", row) from None
    return value


def _parse_event(text: str, row: int) -> int:
    try:
        value = float(text)
    except ValueError:
        raise ValidationError(f"event value {text!r} is not 0 or 1", row) from None
    if value not in (0.0, 1.0):
        raise ValidationError(f"event value {text!r} is not 0 or 1", row)
    return int(value)


def _coerce_ids(raw: list[str]) -> list:
    try:
        as_int = [int(v) for v in raw]
    except ValueError:
        return raw
    if all(str(i) == v for i, v in zip(as_int, raw)):
        return as_int
    return raw


def read_csv(path, format: str = SINGLE, column_map: Mapping[str, Any] | None = None) -> SurvivalDataset:
    """Read a survival CSV.

    ``column_map`` maps the logical names (``id``, ``entry``, ``time``,
    ``event`` for single format; ``id``, ``start``, ``stop``, ``event`` for
    counting format) to header names, and may list ``covariates``
    explicitly.  Without an explicit covariate list every other column is a
    covariate; with one, any unmapped column is a schema error.
    Row numbers in error messages count data rows from 1.
    """
    path = Path(path)
    if format not in (SINGLE, COUNTING):
        raise ValueError(f"unknown format {format!r}")
    column_map = dict(column_map or {})
    keys = _SINGLE_KEYS if format == SINGLE else _COUNTING_KEYS
    required = ("time", "event") if format == SINGLE else ("id", "start", "stop", "event")
    explicit_cov = column_map.pop("covariates", None)
    unknown_keys = set(column_map) - set(keys)
    if unknown_keys:
        raise SchemaError(f"unknown column_map keys: {sorted(unknown_keys)}")
    names = {k: column_map.get(k, k) for k in keys}

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        body = [row for row in reader if row]

    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    for k in required:
        if names[k] not in header:
            raise SchemaError(f"{path}: missing required column {names[k]!r}")
    mapped = {names[k] for k in keys if names[k] in header}
    if explicit_cov is not None:
        cov_names = list(explicit_cov)
        for c in cov_names:
            if c not in header:
                raise SchemaError(f"{path}: missing covariate column {c!r}")
        extra = [h for h in header if h not in mapped and h not in cov_names]
        if extra:
            raise SchemaError(f"{path}: unexpected column {extra[0]!r}")
    else:
        cov_names = [h for h in header if h not in mapped]

    col = {h: j for j, h in enumerate(header)}
    n = len(body)
    if n == 0:
        raise ValidationError(f"{path}: no data rows")
    start = np.zeros(n)
    stop = np.empty(n)
    event = np.empty(n, dtype=np.int8)
    x = np.empty((n, len(cov_names)))
    raw_ids = []
    t_key, s_key = ("time", "entry") if format == SINGLE else ("stop", "start")
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ValidationError(f"expected {len(header)} fields, got {len(row)}", r)
        stop[r - 1] = _parse_float(row[col[names[t_key]]], names[t_key], r)
        if names[s_key] in col:
            start[r - 1] = _parse_float(row[col[names[s_key]]], names[s_key], r)
        for v, k in ((stop[r - 1], names[t_key]), (start[r - 1], names[s_key])):
            if not math.isfinite(v):
                raise ValidationError(f"column {k!r}: non-finite time", r)
            if v < 0:
                raise ValidationError(f"column {k!r}: negative time", r)
        event[r - 1] = _parse_event(row[col[names["event"]]], r)
        for j, c in enumerate(cov_names):
            text = row[col[c]].strip()
            if text == "":
                raise ValidationError(f"missing value in covariate {c!r}", r)
            x[r - 1, j] = _parse_float(text, c, r)
        if names["id"] in col:
            raw_ids.append(row[col[names["id"]]])
    ids = _coerce_ids(raw_ids) if raw_ids else list(range(n))
    try:
        return SurvivalDataset(ids, start, stop, event, x, cov_names, format)
    except ValidationError as exc:
        if exc.row is not None:
            # dataset rows are 0-based; CSV data rows 1-based
            raise ValidationError(str(exc).split(": ", 1)[1], exc.row + 1) from None
        raise


def write_csv(ds: SurvivalDataset, path) -> None:
    """Write ``ds`` so that :func:`read_csv` reproduces it exactly."""
    path = Path(path)
    if ds.format == SINGLE:
        header = ["id", "entry", "time", "event", *ds.covariate_names]
    else:
        header = ["id", "start", "stop", "event", *ds.covariate_names]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in range(ds.n_rows):
            w.writerow([ds.ids[r], repr(float(ds.start[r])), repr(float(ds.stop[r])),
                        int(ds.event[r]), *(repr(float(v)) for v in ds.covariates[r])])
