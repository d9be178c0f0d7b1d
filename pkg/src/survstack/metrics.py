"""Discrimination and calibration metrics for survival predictions.

Censoring is handled by inverse probability of censoring weights built from
the Kaplan-Meier estimate of the censoring distribution, ``G``.  Cases
(events by the horizon) are weighted by ``1 / G(t_i-)``, subjects still
event-free after the horizon by ``1 / G(t)``.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .cox import censoring_km
from .curve import SurvivalCurve
from .data import SurvivalDataset, event_times

METRICS = ("auc_t", "brier_t", "cindex", "iauc", "ibrier")


class UndefinedMetricError(ValueError):
    pass


class DroppedSubjectsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class MetricReport:
    metric: str
    horizon: float
    value: float
    n_effective: int


def _subjects(ds: SurvivalDataset):
    s = ds.subjects()
    return s.entry, s.time, s.event.astype(bool)


def _aligned(values, n: int, what: str) -> np.ndarray:
    values = np.asarray(values, dtype=float).reshape(-1)
    if values.shape[0] != n:
        raise ValueError(f"{what}: got {values.shape[0]} values for {n} subjects")
    return values


def cindex_detail(risks, ds: SurvivalDataset) -> tuple[float, int]:
    entry, time, event = _subjects(ds)
    risks = _aligned(risks, len(time), "risks")
    # comparable: i has the event first and j is under observation then
    comp = event[:, None] & (time[:, None] < time[None, :]) & (entry[None, :] < time[:, None])
    n_pairs = int(comp.sum())
    if n_pairs == 0:
        raise UndefinedMetricError("c-index: no comparable pairs")
    diff = risks[:, None] - risks[None, :]
    score = np.where(diff > 0, 1.0, np.where(diff == 0, 0.5, 0.0))
    return float(np.sum(score[comp]) / n_pairs), n_pairs


def cindex(risks, ds: SurvivalDataset) -> float:
    """Harrell's concordance index; higher risk should mean earlier event."""
    return cindex_detail(risks, ds)[0]


def _ipcw(ds: SurvivalDataset, t: float, G: SurvivalCurve | None):
    """Case/control masks and weights at ``t``; zero-probability subjects dropped."""
    _, time, event = _subjects(ds)
    G = censoring_km(ds) if G is None else G
    cases = event & (time <= t)
    controls = time > t
    w = np.zeros(len(time))
    g_case = G.left_limit(time)
    g_t = G(t)
    w[cases] = np.divide(1.0, g_case[cases], out=np.zeros(cases.sum()), where=g_case[cases] > 0)
    if g_t > 0:
        w[controls] = 1.0 / g_t
    dropped = int(np.sum(cases & (g_case <= 0)) + (np.sum(controls) if g_t <= 0 else 0))
    if dropped:
        warnings.warn(f"{dropped} subject(s) dropped: censoring survival is 0", DroppedSubjectsWarning,
                      stacklevel=3)
    return cases & (w > 0), controls & (w > 0), w, dropped


def auc_detail(risks, ds: SurvivalDataset, t: float, G: SurvivalCurve | None = None) -> tuple[float, int]:
    _, time, _ = _subjects(ds)
    risks = _aligned(risks, len(time), "risks")
    cases, controls, w, _ = _ipcw(ds, t, G)
    if not cases.any():
        raise UndefinedMetricError(f"AUC at {t:g}: no cases (events at or before the horizon)")
    if not controls.any():
        raise UndefinedMetricError(f"AUC at {t:g}: no controls (subjects event-free after the horizon)")
    rc, rn = risks[cases], risks[controls]
    wc, wn = w[cases], w[controls]
    diff = rc[:, None] - rn[None, :]
    score = np.where(diff > 0, 1.0, np.where(diff == 0, 0.5, 0.0))
    value = float(wc @ score @ wn / (wc.sum() * wn.sum()))
    return value, int(cases.sum() + controls.sum())


def auc_at(risks, ds: SurvivalDataset, t: float) -> float:
    """Cumulative/dynamic IPCW AUC of ``risks`` for events by time ``t``."""
    return auc_detail(risks, ds, t)[0]


def _survival_at(curves, t: float) -> np.ndarray:
    if isinstance(curves, np.ndarray):
        return curves.astype(float)
    return np.array([c(t) for c in curves], dtype=float)


def brier_detail(curves, ds: SurvivalDataset, t: float, G: SurvivalCurve | None = None) -> tuple[float, int]:
    _, time, _ = _subjects(ds)
    S = _aligned(_survival_at(curves, t), len(time), "curves")
    cases, controls, w, dropped = _ipcw(ds, t, G)
    n = len(time) - dropped
    if n <= 0:
        raise UndefinedMetricError(f"Brier at {t:g}: no usable subjects")
    loss = np.where(cases, S ** 2 * w, 0.0) + np.where(controls, (1.0 - S) ** 2 * w, 0.0)
    return float(loss.sum() / n), n


def brier_at(curves, ds: SurvivalDataset, t: float) -> float:
    """IPCW Brier score at ``t``.

    ``curves`` is one :class:`SurvivalCurve` per subject, or an array of
    predicted survival probabilities at ``t``.  Subjects censored before
    ``t`` contribute zero; subjects dropped for a zero censoring
    probability leave the denominator.
    """
    return brier_detail(curves, ds, t)[0]


def integrated(pointwise: Callable[[float], float], t_grid: Sequence[float]) -> float:
    """Trapezoid integral of ``pointwise`` over ``t_grid`` divided by the grid span.

    Grid points where the metric is undefined are skipped with a warning.
    """
    ts, vs = [], []
    for t in t_grid:
        try:
            vs.append(pointwise(float(t)))
            ts.append(float(t))
        except UndefinedMetricError:
            warnings.warn(f"metric undefined at t={t:g}; skipped", UserWarning, stacklevel=2)
    if not ts:
        raise UndefinedMetricError("integrated metric: undefined at every grid point")
    if len(ts) < 2:
        raise UndefinedMetricError("integrated metric: needs at least two defined grid points")
    ts, vs = np.array(ts), np.array(vs)
    span = ts[-1] - ts[0]
    if span <= 0:
        raise UndefinedMetricError("integrated metric: grid has zero span")
    return float(np.sum(np.diff(ts) * (vs[1:] + vs[:-1]) / 2.0) / span)


def integrated_auc(curves: Sequence[SurvivalCurve], ds: SurvivalDataset, t_grid) -> float:
    G = censoring_km(ds)
    return integrated(lambda t: auc_detail(1.0 - _survival_at(curves, t), ds, t, G)[0], t_grid)


def integrated_brier(curves: Sequence[SurvivalCurve], ds: SurvivalDataset, t_grid) -> float:
    G = censoring_km(ds)
    return integrated(lambda t: brier_detail(curves, ds, t, G)[0], t_grid)


def resolve_horizon(ds: SurvivalDataset, spec, distinct: bool = False) -> float:
    """Turn a horizon spec into a time.

    ``'q0.75'`` is the lower empirical quantile of the observed event times,
    tied times counted once per event (``distinct=True`` uses each distinct
    time once instead).  Numbers and numeric strings pass through.
    """
    if isinstance(spec, str):
        text = spec.strip()
        if text.startswith("q"):
            try:
                q = float(text[1:])
            except ValueError:
                raise ValueError(f"bad horizon spec {spec!r}") from None
            if not 0.0 < q < 1.0:
                raise ValueError(f"horizon quantile must be in (0, 1), got {q}")
            times = event_times(ds) if distinct else np.sort(ds.stop[ds.event == 1])
            if len(times) == 0:
                raise UndefinedMetricError("horizon quantile needs at least one event")
            return float(np.quantile(times, q, method="lower"))
        spec = float(text)
    return float(spec)


def time_grid(ds: SurvivalDataset, horizon: float) -> np.ndarray:
    """Distinct event times of ``ds`` up to ``horizon``."""
    times = event_times(ds)
    return times[times <= horizon]


def evaluate(curves: Sequence[SurvivalCurve], ds: SurvivalDataset, horizon: float,
             metrics: Sequence[str] = METRICS) -> list[MetricReport]:
    """All requested metrics at ``horizon``; risk is ``1 - S(horizon | x)``."""
    unknown = set(metrics) - set(METRICS)
    if unknown:
        raise ValueError(f"unknown metric(s): {sorted(unknown)}")
    G = censoring_km(ds)
    risk = 1.0 - _survival_at(curves, horizon)
    grid = time_grid(ds, horizon)
    out = []
    for m in metrics:
        if m == "auc_t":
            v, n = auc_detail(risk, ds, horizon, G)
        elif m == "brier_t":
            v, n = brier_detail(curves, ds, horizon, G)
        elif m == "cindex":
            v, n = cindex_detail(risk, ds)
        elif m == "iauc":
            v, n = integrated_auc(curves, ds, grid), len(grid)
        else:
            v, n = integrated_brier(curves, ds, grid), len(grid)
        out.append(MetricReport(m, float(horizon), v, n))
    return out


def write_report(reports: Sequence[MetricReport], path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "horizon", "value", "n_effective"])
        for r in reports:
            w.writerow([r.metric, repr(r.horizon), repr(r.value), r.n_effective])


def read_report(path) -> list[MetricReport]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return [MetricReport(r["metric"], float(r["horizon"]), float(r["value"]), int(r["n_effective"]))
                for r in csv.DictReader(fh)]
