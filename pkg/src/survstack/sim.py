"""Discrete-time survival simulators.

Random streams: ``SeedSequence(seed).spawn(n + 1)`` gives one PCG64 stream
per subject (index = subject position) plus one dataset-level stream (index
``n``) used to choose which training subjects are left-truncated.  Within a
subject the draws are, in order: ``p`` standard normals (covariates), one
uniform per time bin (event draws), one exponential (censoring time) and
one uniform (truncation entry, drawn whether used or not).  Results
therefore do not depend on how subjects are scheduled.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .data import SurvivalDataset


@dataclass(frozen=True)
class TvHazardConfig:
    """Time-varying hazard simulation.

    Hazard at bin time ``t`` is ``expit(beta'x + t * eta(t)'x - offset)``
    where only the first component of ``eta`` is non-zero:
    ``a * (t / 10 - c)**2 + b`` with ``(a, c, b) = eta_quadratic``.
    """

    n: int = 3000
    n_train: int = 2000
    p: int = 5
    bins: int = 10
    beta: tuple[float, ...] = (-0.08, -0.06, 0.02, 0.0, 0.0)
    eta_quadratic: tuple[float, float, float] = (5.0, 0.25, -1.0)
    offset: float = 5.0
    censor_rate: float = 0.2
    truncate_fraction: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if len(self.beta) != self.p:
            raise ValueError(f"beta has {len(self.beta)} entries for p={self.p}")
        if not 0 < self.n_train < self.n:
            raise ValueError("n_train must satisfy 0 < n_train < n (both splits non-empty)")
        if not 0.0 <= self.truncate_fraction <= 1.0:
            raise ValueError("truncate_fraction must be in [0, 1]")
        if self.censor_rate < 0:
            raise ValueError("censor_rate must be non-negative")

    @property
    def bin_times(self) -> np.ndarray:
        return np.arange(1, self.bins + 1, dtype=float)

    def eta(self, t: float) -> np.ndarray:
        a, c, b = self.eta_quadratic
        out = np.zeros(self.p)
        out[0] = a * (t / 10.0 - c) ** 2 + b
        return out


def hazard_tv(cfg: TvHazardConfig, t_j: float, x) -> float:
    x = np.asarray(x, dtype=float)
    lin = cfg.offset - float(np.dot(cfg.beta, x)) - t_j * float(cfg.eta(t_j) @ x)
    return float(expit(-lin))


def _streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n + 1)]


def _draw_subject(rng, p, bin_times, hazard_fn, censor_rate):
    x = rng.standard_normal(p)
    u = rng.random(len(bin_times))
    c = rng.exponential(1.0 / censor_rate) if censor_rate > 0 else math.inf
    v = rng.random()
    h = hazard_fn(x)
    hit = np.flatnonzero(u < h)
    t_event = bin_times[hit[0]] if len(hit) else math.inf
    last = bin_times[-1]
    if t_event <= c:
        time, event = (t_event, 1) if math.isfinite(t_event) else (last, 0)
    else:
        time, event = min(c, last), 0
    return x, time, event, v


def _simulate(n, p, bin_times, hazard_fn, censor_rate, seed, n_train, truncate_fraction,
              names=None):
    streams = _streams(seed, n)
    X = np.empty((n, p))
    time = np.empty(n)
    event = np.empty(n, dtype=np.int8)
    v = np.empty(n)
    for i in range(n):
        X[i], time[i], event[i], v[i] = _draw_subject(streams[i], p, bin_times, hazard_fn, censor_rate)
    entry = np.zeros(n)
    n_trunc = int(math.floor(truncate_fraction * n_train))
    if n_trunc:
        chosen = streams[n].permutation(n_train)[:n_trunc]
        entry[chosen] = v[chosen] * time[chosen]
    ids = list(range(n))
    return SurvivalDataset.from_arrays(time, event, X, entry=entry, ids=ids, covariate_names=names)


def simulate_tv(cfg: TvHazardConfig | None = None, **overrides) -> tuple[SurvivalDataset, SurvivalDataset]:
    """Train/test datasets from the time-varying hazard model.

    Subjects are censored at an exponential time or at the last bin,
    whichever comes first.  A ``truncate_fraction`` of the training subjects
    get an entry time uniform on ``[0, observed time)``.
    """
    cfg = cfg or TvHazardConfig(**overrides)
    bins = cfg.bin_times
    eta = np.array([cfg.eta(t) for t in bins])  # (bins, p)
    beta = np.asarray(cfg.beta, dtype=float)

    def hazard_fn(x):
        return expit(x @ beta + bins * (eta @ x) - cfg.offset)

    full = _simulate(cfg.n, cfg.p, bins, hazard_fn, cfg.censor_rate, cfg.seed, cfg.n_train,
                     cfg.truncate_fraction)
    train = full.subset(np.arange(cfg.n_train))
    test = full.subset(np.arange(cfg.n_train, cfg.n))
    return train, test


def simulate_ph(n: int, p: int, beta, baseline_hazards, censor_rate: float, seed: int,
                truncate_fraction: float = 0.0) -> SurvivalDataset:
    """Discrete proportional-hazards data on bins ``1..K``.

    Per-bin hazard is ``min(1, lambda_k * exp(beta'x))``; censoring as in
    :func:`simulate_tv`.
    """
    beta = np.asarray(beta, dtype=float)
    lam = np.asarray(baseline_hazards, dtype=float)
    if beta.shape[0] != p:
        raise ValueError(f"beta has {beta.shape[0]} entries for p={p}")
    if np.any(lam <= 0) or np.any(lam >= 1):
        raise ValueError("baseline hazards must lie in (0, 1)")
    bins = np.arange(1, len(lam) + 1, dtype=float)

    def hazard_fn(x):
        return np.minimum(1.0, lam * math.exp(float(x @ beta)))

    return _simulate(n, p, bins, hazard_fn, censor_rate, seed, n, truncate_fraction)


@dataclass(frozen=True)
class PhConfig:
    """Bundled arguments for :func:`simulate_ph`."""

    n: int = 1000
    p: int = 7
    beta: tuple[float, ...] = (0.15, 0.36, 0.25, 0.0, 0.05, 0.07, -0.28)
    baseline_hazards: tuple[float, ...] = field(default_factory=lambda: (0.007,) * 100)
    censor_rate: float = 0.002
    seed: int = 2

    def simulate(self) -> SurvivalDataset:
        return simulate_ph(self.n, self.p, self.beta, self.baseline_hazards, self.censor_rate, self.seed)
