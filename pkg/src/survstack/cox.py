"""Cox partial likelihood, Breslow baseline hazard and Kaplan-Meier.

Risk-set sums are computed from sorted cumulative sums rather than the
stacked matrix: for any row weights ``w``,
``sum_{start < t <= stop} w = sum_{stop >= t} w - sum_{start >= t} w``.
Ties use the Breslow convention throughout.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .curve import SurvivalCurve
from .data import SurvivalDataset, event_times
from .glm import COEF_BOUND, SeparationWarning, SingularHessianError, _column_singular


class _RiskSums:
    """Precomputed orderings for risk-set sums at each distinct event time."""

    def __init__(self, ds: SurvivalDataset):
        self.times = event_times(ds)
        self.x = ds.covariates
        self.center = self.x.mean(axis=0) if ds.n_rows else np.zeros(ds.p)
        self.xc = self.x - self.center
        self._o_stop = np.argsort(ds.stop, kind="stable")
        self._o_start = np.argsort(ds.start, kind="stable")
        self._i_stop = np.searchsorted(ds.stop[self._o_stop], self.times, side="left")
        self._i_start = np.searchsorted(ds.start[self._o_start], self.times, side="left")
        ev = np.flatnonzero(ds.event == 1)
        k = np.searchsorted(self.times, ds.stop[ev])
        K = len(self.times)
        self.d = np.bincount(k, minlength=K).astype(float)
        self.event_xsum = np.zeros((K, ds.p))
        np.add.at(self.event_xsum, k, self.x[ev])
        self.n_events = float(len(ev))

    def sums(self, values: np.ndarray) -> np.ndarray:
        """Risk-set sums of each column of ``values`` (rows x m) -> (K, m)."""
        values = values.reshape(values.shape[0], -1)

        def tail(order, idx):
            v = values[order]
            rc = np.vstack([np.cumsum(v[::-1], axis=0)[::-1], np.zeros((1, v.shape[1]))])
            return rc[idx]

        return tail(self._o_stop, self._i_stop) - tail(self._o_start, self._i_start)

    def at(self, beta: np.ndarray, order: int = 0):
        """``(S0, S1, S2)`` on centered covariates, up to the requested order."""
        r = np.exp(self.xc @ beta)
        p = self.x.shape[1]
        cols = [r[:, None]]
        if order >= 1:
            cols.append(self.xc * r[:, None])
        if order >= 2:
            cols.append((self.xc[:, :, None] * self.xc[:, None, :]).reshape(self.x.shape[0], p * p) * r[:, None])
        s = self.sums(np.hstack(cols))
        S0 = s[:, 0]
        out = [S0]
        if order >= 1:
            out.append(s[:, 1:1 + p])
        if order >= 2:
            out.append(s[:, 1 + p:].reshape(s.shape[0], p, p))
        return out

    def loglik(self, beta: np.ndarray) -> float:
        (S0,) = self.at(beta, 0)
        # log S0 on raw covariates = log S0(centered) + center.beta
        return float(np.sum(self.event_xsum @ beta) - np.sum(self.d * (np.log(S0) + self.center @ beta)))


def partial_loglik(ds: SurvivalDataset, beta) -> float:
    """Breslow log partial likelihood."""
    return _RiskSums(ds).loglik(np.asarray(beta, dtype=float).reshape(-1))


def partial_gradient(ds: SurvivalDataset, beta) -> np.ndarray:
    rs = _RiskSums(ds)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    S0, S1 = rs.at(beta, 1)
    xbar = S1 / S0[:, None] + rs.center
    return rs.event_xsum.sum(axis=0) - (rs.d[:, None] * xbar).sum(axis=0)


def _grad_info(rs: _RiskSums, beta):
    S0, S1, S2 = rs.at(beta, 2)
    m1 = S1 / S0[:, None]
    grad = rs.event_xsum.sum(axis=0) - (rs.d[:, None] * (m1 + rs.center)).sum(axis=0)
    cov = S2 / S0[:, None, None] - m1[:, :, None] * m1[:, None, :]
    info = np.einsum("k,kij->ij", rs.d, cov)
    return grad, info


def _raw_second_moment(rs: _RiskSums, beta) -> np.ndarray:
    """Diagonal of ``sum_k d_k S2_k / S0_k``: the scale the information is compared to."""
    S0, _, S2 = rs.at(beta, 2)
    return np.einsum("k,kjj->j", rs.d, S2 / S0[:, None, None])


def partial_information(ds: SurvivalDataset, beta) -> np.ndarray:
    """Observed information (negative Hessian) of the partial likelihood."""
    return _grad_info(_RiskSums(ds), np.asarray(beta, dtype=float).reshape(-1))[1]


def breslow_baseline(ds: SurvivalDataset, beta) -> tuple[np.ndarray, np.ndarray]:
    """Event times and Breslow hazards ``d_k / sum_{R(t_k)} exp(x'beta)``."""
    rs = _RiskSums(ds)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    (S0,) = rs.at(beta, 0)
    return rs.times.copy(), rs.d / (S0 * math.exp(float(rs.center @ beta)))


def profile_loglik(ds: SurvivalDataset, beta) -> float:
    """Partial likelihood minus the number of events.

    Without tied event times this is the full likelihood with the baseline
    hazard profiled out; with ties the profiled full likelihood exceeds it
    by ``sum_k d_k log d_k``.
    """
    rs = _RiskSums(ds)
    return rs.loglik(np.asarray(beta, dtype=float).reshape(-1)) - rs.n_events


def full_loglik(ds: SurvivalDataset, beta, hazards) -> float:
    """Cox log-likelihood with a discrete baseline taking ``hazards`` at the event times."""
    rs = _RiskSums(ds)
    beta = np.asarray(beta, dtype=float).reshape(-1)
    hazards = np.asarray(hazards, dtype=float)
    (S0,) = rs.at(beta, 0)
    S0 = S0 * math.exp(float(rs.center @ beta))
    return float(np.sum(rs.d * np.log(hazards)) + np.sum(rs.event_xsum @ beta) - np.sum(hazards * S0))


@dataclass(frozen=True, eq=False)
class CoxFit:
    beta: np.ndarray
    baseline_times: np.ndarray
    baseline_hazard: np.ndarray
    partial_loglik: float
    converged: bool
    std_errors: np.ndarray
    covariate_names: tuple[str, ...]
    iterations: int = 0
    final_gradient_norm: float = 0.0
    messages: tuple[str, ...] = field(default=())

    @property
    def baseline(self) -> list[tuple[float, float]]:
        return list(zip(self.baseline_times.tolist(), self.baseline_hazard.tolist()))

    @property
    def time_index(self) -> np.ndarray:
        return self.baseline_times

    @property
    def p(self) -> int:
        return len(self.beta)

    def hazards(self, x) -> tuple[np.ndarray, int]:
        """``min(1, lambda_k exp(x'beta))`` as (n, K) plus the clip count."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.p:
            raise ValueError(f"expected {self.p} covariates, got {x.shape[1]}")
        h = np.exp(x @ self.beta)[:, None] * self.baseline_hazard[None, :]
        clipped = int(np.sum(h > 1.0))
        return np.minimum(h, 1.0), clipped


def fit_cox(ds: SurvivalDataset, max_iter: int = 100, tol: float = 1e-8) -> CoxFit:
    """Maximize the Breslow partial likelihood by damped Newton.

    Left truncation and time-varying covariates enter through the
    ``start < t <= stop`` risk sets.
    """
    rs = _RiskSums(ds)
    if len(rs.times) == 0:
        raise ValueError("no events: cannot fit a Cox model")
    p = ds.p
    names = ds.covariate_names
    if p and np.all(np.ptp(ds.covariates, axis=0) == 0):
        raise ValueError("all covariates are constant")
    beta = np.zeros(p)
    ll = rs.loglik(beta)
    converged = False
    messages = []
    se = np.zeros(0)
    gnorm = 0.0
    it = 0
    for it in range(max_iter + 1):
        grad, info = _grad_info(rs, beta)
        gnorm = float(np.max(np.abs(grad))) if p else 0.0
        if p:
            try:
                L = np.linalg.cholesky(info)
                if np.any(np.diag(L) ** 2 <= 1e-10 * _raw_second_moment(rs, beta)):
                    raise np.linalg.LinAlgError
            except np.linalg.LinAlgError:
                if np.all(np.abs(beta) < COEF_BOUND):
                    raise SingularHessianError(_column_singular(info, names)) from None
                messages.append("information matrix singular at the coefficient bound")
                break
            inv = np.linalg.inv(info)
            se = np.sqrt(np.diag(inv))
        if gnorm <= tol:
            converged = True
            if p:
                # finite optimum: the next Newton step is ~ se^2 * tol; a diverging
                # coefficient keeps taking steps of order 1
                step_now = np.abs(inv @ grad)
                drift = np.flatnonzero(step_now > 0.1)
                if drift.size:
                    converged = False
                    beta_inf = [names[j] for j in drift]
                    msg = f"monotone likelihood: diverging coefficients {', '.join(beta_inf)}"
                    messages.append(msg)
                    warnings.warn(msg, SeparationWarning, stacklevel=2)
            break
        if it == max_iter:
            break
        delta = np.linalg.solve(L.T, np.linalg.solve(L, grad))
        step = 1.0
        for _ in range(50):
            trial = np.clip(beta + step * delta, -COEF_BOUND, COEF_BOUND)
            trial_ll = rs.loglik(trial)
            if trial_ll >= ll - 1e-12 * abs(ll):
                break
            step *= 0.5
        else:
            messages.append("step halving failed to increase the partial likelihood")
            break
        if np.array_equal(trial, beta):
            break
        beta, ll = trial, trial_ll
    if not converged and not any(m.startswith("monotone") for m in messages):
        bad = [names[j] for j in np.flatnonzero(np.abs(beta) >= COEF_BOUND)]
        if bad:
            msg = f"monotone likelihood: diverging coefficients {', '.join(bad)}"
            messages.append(msg)
            warnings.warn(msg, SeparationWarning, stacklevel=2)
    times, haz = breslow_baseline(ds, beta)
    if se.shape[0] != p:
        se = np.full(p, np.nan)
    return CoxFit(beta=beta, baseline_times=times, baseline_hazard=haz, partial_loglik=ll,
                  converged=converged, std_errors=se, covariate_names=names, iterations=it,
                  final_gradient_norm=gnorm, messages=tuple(messages))


def _product_limit(start, stop, is_event) -> SurvivalCurve:
    times = np.unique(stop[is_event])
    if len(times) == 0:
        return SurvivalCurve(np.zeros(0), np.zeros(0))
    n = stop.shape[0]
    n_stop = n - np.searchsorted(np.sort(stop), times, side="left")
    n_start = n - np.searchsorted(np.sort(start), times, side="left")
    at_risk = n_stop - n_start
    d = np.bincount(np.searchsorted(times, stop[is_event]), minlength=len(times))
    return SurvivalCurve(times, np.cumprod(1.0 - d / at_risk))


def kaplan_meier(ds: SurvivalDataset) -> SurvivalCurve:
    """Product-limit estimate with ``start < t <= stop`` (left-truncated) risk sets."""
    return _product_limit(ds.start, ds.stop, ds.event == 1)


def censoring_km(ds: SurvivalDataset) -> SurvivalCurve:
    """Kaplan-Meier of the censoring distribution (event flags swapped), per subject."""
    s = ds.subjects()
    return _product_limit(s.start, s.stop, s.event == 0)
