"""Turn per-time hazards from a fitted model into survival curves and risks."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .curve import SurvivalCurve
from .cox import CoxFit
from .glm import GlmFit

HazardModel = GlmFit | CoxFit


def survival_matrix(model: HazardModel, X) -> tuple[np.ndarray, int]:
    """Survival at every training event time for each row of ``X`` -> (n, K), clip count."""
    h, clipped = model.hazards(X)
    return np.cumprod(1.0 - h, axis=1), clipped


def survival_curve(model: HazardModel, x) -> SurvivalCurve:
    x = np.asarray(x, dtype=float).reshape(1, -1)
    h, clipped = model.hazards(x)
    return SurvivalCurve.from_hazards(model.time_index, h[0], clipped)


def survival_curves(model: HazardModel, X) -> list[SurvivalCurve]:
    h, _ = model.hazards(X)
    clip_rows = (h >= 1.0).sum(axis=1)
    return [SurvivalCurve.from_hazards(model.time_index, h[i], int(clip_rows[i]))
            for i in range(h.shape[0])]


def horizon_risk(model: HazardModel, x, t: float) -> float:
    """``1 - S(t | x)`` with step-function semantics."""
    return 1.0 - survival_curve(model, x)(t)


def horizon_risks(model: HazardModel, X, t: float) -> np.ndarray:
    S, _ = survival_matrix(model, X)
    idx = int(np.searchsorted(model.time_index, t, side="right"))
    if idx == 0:
        return np.zeros(S.shape[0])
    return 1.0 - S[:, idx - 1]


def write_curves(path, ids: Sequence, curves: Sequence[SurvivalCurve],
                 horizon: float | None = None) -> None:
    """Long-format ``subject_id,time,survival`` CSV (plus ``risk`` at ``horizon``)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["subject_id", "time", "survival"] + (["risk"] if horizon is not None else []))
        for sid, c in zip(ids, curves):
            extra = [repr(1.0 - c(horizon))] if horizon is not None else []
            for t, s in zip(c.times, c.survival):
                w.writerow([sid, repr(float(t)), repr(float(s)), *extra])


def read_curves(path) -> tuple[list, list[SurvivalCurve]]:
    """Inverse of :func:`write_curves`; subjects in file order."""
    from .data import _coerce_ids

    rows: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            rows.setdefault(row["subject_id"], []).append((float(row["time"]), float(row["survival"])))
    raw = list(rows)
    ids = _coerce_ids(raw)
    curves = [SurvivalCurve(np.array([t for t, _ in rows[r]]), np.array([s for _, s in rows[r]]))
              for r in raw]
    return ids, curves
