"""Survival stacking: one classification block per distinct event time.

Block ``k`` holds every row at risk at the ``k``-th event time with the
covariates valid at that time, and outcome 1 for rows whose event happens
exactly then.  Blocks are concatenated in ascending time order and rows keep
dataset order inside a block.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import SurvivalDataset, at_risk, event_times


class NoEventsError(ValueError):
    """The dataset has no events, so there are no risk sets to stack."""


INDICATORS = "indicators"
CONTINUOUS = "continuous"
POLYNOMIAL = "polynomial"


@dataclass(frozen=True)
class TimeEncoding:
    """How the risk-set time enters the design matrix.

    ``indicators`` adds one 0/1 column per event time and no intercept.
    ``continuous`` adds an intercept and the raw time.  ``polynomial`` adds
    an intercept and powers 1..degree of ``t / max event time``.
    ``interactions`` names covariates to multiply by the (scaled) time
    column; it is only meaningful for the non-indicator encodings.
    """

    kind: str = INDICATORS
    degree: int = 1
    interactions: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (INDICATORS, CONTINUOUS, POLYNOMIAL):
            raise ValueError(f"unknown time encoding {self.kind!r}")
        if self.kind == POLYNOMIAL and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"polynomial degree must be a positive integer, got {self.degree!r}")
        if self.kind == INDICATORS and self.interactions:
            raise ValueError("time interactions need a continuous or polynomial encoding")
        object.__setattr__(self, "interactions", tuple(self.interactions))

    @classmethod
    def parse(cls, text: str, interactions=()) -> "TimeEncoding":
        """``indicators``, ``continuous`` or ``polynomial[:degree]``."""
        kind, _, deg = text.partition(":")
        if kind == POLYNOMIAL:
            return cls(POLYNOMIAL, int(deg) if deg else 2, tuple(interactions))
        if deg:
            raise ValueError(f"only the polynomial encoding takes a degree: {text!r}")
        return cls(kind, 1, tuple(interactions))

    def __str__(self) -> str:
        return f"{POLYNOMIAL}:{self.degree}" if self.kind == POLYNOMIAL else self.kind

    def time_columns(self, n_times: int) -> list[str]:
        if self.kind == INDICATORS:
            return [f"rs_{k + 1}" for k in range(n_times)]
        cols = ["intercept", "rs_time"]
        if self.kind == POLYNOMIAL:
            cols += [f"rs_time_pow{j}" for j in range(2, self.degree + 1)]
        return cols + [f"{c}:rs_time" for c in self.interactions]

    def time_scale(self, time_index: np.ndarray) -> float:
        return float(np.max(time_index)) if self.kind == POLYNOMIAL else 1.0

    def dense_time_features(self, x: np.ndarray, t: np.ndarray, scale: float,
                            covariate_names) -> np.ndarray:
        """Intercept, time powers and interaction columns for rows ``x`` at times ``t``.

        Empty for the indicators encoding.
        """
        n = t.shape[0]
        if self.kind == INDICATORS:
            return np.zeros((n, 0))
        u = t / scale
        cols = [np.ones(n), u]
        if self.kind == POLYNOMIAL:
            cols += [u ** j for j in range(2, self.degree + 1)]
        names = list(covariate_names)
        for c in self.interactions:
            if c not in names:
                raise ValueError(f"interaction covariate {c!r} not in dataset")
            cols.append(x[:, names.index(c)] * u)
        return np.column_stack(cols)


@dataclass(frozen=True, eq=False)
class StackedDataset:
    """The stacked classification problem.

    ``covariates`` (rows x p) and ``block`` (event-time index per row) are the
    primary storage; :attr:`design` materializes the full matrix including
    time-encoding columns in the order covariates, then time columns.
    """

    covariates: np.ndarray
    block: np.ndarray
    outcome: np.ndarray
    subject_ids: tuple
    time_index: np.ndarray
    encoding: TimeEncoding
    covariate_names: tuple[str, ...]
    _dense_time: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self._dense_time is None:
            t = self.time_index[self.block] if len(self.block) else np.zeros(0)
            dense = self.encoding.dense_time_features(
                self.covariates, t, self.time_scale, self.covariate_names)
            object.__setattr__(self, "_dense_time", dense)
        for a in (self.covariates, self.block, self.outcome, self.time_index, self._dense_time):
            a.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.outcome.shape[0]

    @property
    def p(self) -> int:
        return self.covariates.shape[1]

    @property
    def time_scale(self) -> float:
        return self.encoding.time_scale(self.time_index)

    @property
    def row_meta(self) -> list[tuple]:
        return list(zip(self.subject_ids, self.block.tolist()))

    @property
    def event_time(self) -> np.ndarray:
        return self.time_index[self.block]

    @property
    def columns(self) -> list[str]:
        return list(self.covariate_names) + self.encoding.time_columns(len(self.time_index))

    @property
    def features(self) -> np.ndarray:
        """Design columns other than the per-time indicators."""
        return np.hstack([self.covariates, self._dense_time])

    @property
    def design(self) -> np.ndarray:
        if self.encoding.kind == INDICATORS:
            ind = np.zeros((self.n_rows, len(self.time_index)))
            ind[np.arange(self.n_rows), self.block] = 1.0
            return np.hstack([self.covariates, ind])
        return self.features

    def __eq__(self, other) -> bool:
        if not isinstance(other, StackedDataset):
            return NotImplemented
        return (
            self.encoding == other.encoding
            and self.covariate_names == other.covariate_names
            and tuple(self.subject_ids) == tuple(other.subject_ids)
            and np.array_equal(self.time_index, other.time_index)
            and np.array_equal(self.block, other.block)
            and np.array_equal(self.outcome, other.outcome)
            and np.array_equal(self.design, other.design)
        )

    __hash__ = None  # type: ignore[assignment]


def stack(ds: SurvivalDataset, enc: TimeEncoding | None = None) -> StackedDataset:
    enc = enc or TimeEncoding()
    times = event_times(ds)
    if len(times) == 0:
        raise NoEventsError("no events: nothing to stack")
    rows, blocks = [], []
    for k, t in enumerate(times):
        members = np.flatnonzero(at_risk(ds, t))
        rows.append(members)
        blocks.append(np.full(members.shape[0], k, dtype=np.intp))
    rows = np.concatenate(rows)
    block = np.concatenate(blocks)
    outcome = ((ds.event[rows] == 1) & (ds.stop[rows] == times[block])).astype(np.int8)
    return StackedDataset(
        covariates=ds.covariates[rows].copy(),
        block=block,
        outcome=outcome,
        subject_ids=tuple(ds.ids[r] for r in rows),
        time_index=times.copy(),
        encoding=enc,
        covariate_names=ds.covariate_names,
    )


def stacked_row_count(ds: SurvivalDataset) -> int:
    """Rows :func:`stack` would produce, via sorted counts instead of masks.

    ``#{start < t <= stop} = #{stop >= t} - #{start >= t}`` because
    ``start >= t`` implies ``stop >= t``.
    """
    times = event_times(ds)
    if len(times) == 0:
        return 0
    stops = np.sort(ds.stop)
    starts = np.sort(ds.start)
    n = stops.shape[0]
    n_stop = n - np.searchsorted(stops, times, side="left")
    n_start = n - np.searchsorted(starts, times, side="left")
    return int(np.sum(n_stop - n_start))


def export_stacked(sd: StackedDataset, path) -> None:
    """CSV of design columns, ``outcome``, ``subject_id`` and ``event_time``."""
    path = Path(path)
    header = sd.columns + ["outcome", "subject_id", "event_time"]
    design = sd.design
    t = sd.event_time
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for r in range(sd.n_rows):
                w.writerow([*(repr(float(v)) for v in design[r]), int(sd.outcome[r]),
                            sd.subject_ids[r], repr(float(t[r]))])
    except OSError as exc:
        raise OSError(f"cannot write stacked CSV {path}: {exc}") from exc


def read_stacked(path) -> StackedDataset:
    """Inverse of :func:`export_stacked`."""
    from .data import _coerce_ids

    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        body = [row for row in reader if row]
    tail = ["outcome", "subject_id", "event_time"]
    if header[-3:] != tail:
        raise ValueError(f"{path}: not a stacked CSV (last columns must be {tail})")
    design_cols = header[:-3]
    if "rs_time" in design_cols:
        kind = POLYNOMIAL if any(c.startswith("rs_time_pow") for c in design_cols) else CONTINUOUS
        first = design_cols.index("intercept")
    else:
        kind = INDICATORS
        first = next((j for j, c in enumerate(design_cols) if c.startswith("rs_")), len(design_cols))
    cov_names = tuple(design_cols[:first])
    rest = design_cols[first:]
    degree = 1 + sum(c.startswith("rs_time_pow") for c in rest)
    interactions = tuple(c[: -len(":rs_time")] for c in rest if c.endswith(":rs_time"))
    enc = TimeEncoding(kind, degree, interactions)

    n = len(body)
    vals = np.array([[float(v) for v in row[:-3]] for row in body]).reshape(n, len(design_cols))
    outcome = np.array([int(row[-3]) for row in body], dtype=np.int8)
    ids = tuple(_coerce_ids([row[-2] for row in body]))
    t = np.array([float(row[-1]) for row in body])
    time_index = np.unique(t)
    block = np.searchsorted(time_index, t)
    sd = StackedDataset(vals[:, :first].copy(), block.astype(np.intp), outcome, ids,
                        time_index, enc, cov_names)
    if enc.time_columns(len(time_index)) != list(rest):
        raise ValueError(f"{path}: time-encoding columns do not match the event times present")
    return sd
