"""Logistic and Poisson regression on stacked data by damped Newton.

Coefficients follow the stacked design column order: the dense features
(covariates, then intercept/time/interaction columns) come first and, under
the indicators encoding, one baseline log-odds (or log-rate) per event time
follows.  The indicator block of the Hessian is diagonal, so Newton steps
solve only a Schur complement of the dense part.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .stacking import INDICATORS, StackedDataset, TimeEncoding

LOGISTIC = "logistic"
POISSON = "poisson"
COEF_BOUND = 30.0


class SingularHessianError(np.linalg.LinAlgError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(f"singular information matrix: column {column!r} is collinear "
                         "with earlier columns")


class SeparationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class GlmOptions:
    max_iter: int = 100
    tol: float = 1e-8
    ridge: float = 0.0


@dataclass(frozen=True, eq=False)
class GlmFit:
    family: str
    coefficients: np.ndarray
    names: tuple[str, ...]
    encoding: TimeEncoding
    time_index: np.ndarray
    covariate_names: tuple[str, ...]
    converged: bool
    iterations: int
    final_gradient_norm: float
    std_errors: np.ndarray
    loglik: float
    ridge: float = 0.0
    separation: bool = False
    messages: tuple[str, ...] = field(default=())

    @property
    def p(self) -> int:
        return len(self.covariate_names)

    @property
    def beta(self) -> np.ndarray:
        """Covariate coefficients."""
        return self.coefficients[: self.p]

    @property
    def alpha(self) -> np.ndarray:
        """Per-event-time baseline coefficients (indicators encoding only)."""
        if self.encoding.kind != INDICATORS:
            raise AttributeError("alpha is only defined for the indicators encoding")
        return self.coefficients[self.p:]

    @property
    def time_scale(self) -> float:
        return self.encoding.time_scale(self.time_index)

    def linear_predictor(self, x, k=None) -> np.ndarray:
        """``eta`` for covariate rows ``x`` (n x p) at every event time -> (n, K).

        With ``k`` given, only that event-time column is returned.
        """
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if x.shape[1] != self.p:
            raise ValueError(f"expected {self.p} covariates, got {x.shape[1]}")
        K = len(self.time_index)
        ks = np.arange(K) if k is None else np.array([k])
        if np.any(ks < 0) or np.any(ks >= K):
            raise IndexError(f"event-time index {k} out of range 0..{K - 1}")
        n = x.shape[0]
        base = x @ self.beta
        if self.encoding.kind == INDICATORS:
            eta = base[:, None] + self.alpha[ks][None, :]
        else:
            eta = np.empty((n, len(ks)))
            rest = self.coefficients[self.p:]
            for j, kk in enumerate(ks):
                t = np.full(n, self.time_index[kk])
                dense = self.encoding.dense_time_features(x, t, self.time_scale, self.covariate_names)
                eta[:, j] = base + dense @ rest
        return eta if k is None else eta[:, 0]

    def hazards(self, x) -> tuple[np.ndarray, int]:
        """Discrete hazards (n, K) and the number of entries clipped to 1."""
        eta = self.linear_predictor(x)
        if self.family == LOGISTIC:
            return expit(eta), 0
        h = np.exp(eta)
        clipped = int(np.sum(h > 1.0))
        return np.minimum(h, 1.0), clipped


def _mean(family: str, eta: np.ndarray) -> np.ndarray:
    return expit(eta) if family == LOGISTIC else np.exp(eta)


def _loglik_eta(family: str, y: np.ndarray, eta: np.ndarray) -> float:
    if family == LOGISTIC:
        # log(1 + e^eta) computed stably
        return float(np.sum(y * eta - np.logaddexp(0.0, eta)))
    return float(np.sum(y * eta - np.exp(eta)))


def _split(sd: StackedDataset):
    F = sd.features
    block = sd.block if sd.encoding.kind == INDICATORS else None
    K = len(sd.time_index) if block is not None else 0
    return F, block, K


def _eta(F, block, coef):
    q = F.shape[1]
    eta = F @ coef[:q]
    if block is not None:
        eta = eta + coef[q:][block]
    return eta


def stacked_loglik(sd: StackedDataset, coef, family: str = LOGISTIC) -> float:
    """Binomial or Poisson log-likelihood of the stacked outcomes at ``coef``."""
    F, block, K = _split(sd)
    coef = np.asarray(coef, dtype=float)
    if coef.shape[0] != F.shape[1] + K:
        raise ValueError(f"expected {F.shape[1] + K} coefficients, got {coef.shape[0]}")
    return _loglik_eta(family, sd.outcome.astype(float), _eta(F, block, coef))


def stacked_gradient(sd: StackedDataset, coef, family: str = LOGISTIC) -> np.ndarray:
    F, block, K = _split(sd)
    coef = np.asarray(coef, dtype=float)
    resid = sd.outcome - _mean(family, _eta(F, block, coef))
    g = F.T @ resid
    if block is not None:
        g = np.concatenate([g, np.bincount(block, resid, minlength=K)])
    return g


def _penalty_mask(sd: StackedDataset) -> np.ndarray:
    """1 for columns the ridge penalty applies to (not intercept, not indicators)."""
    F, _, K = _split(sd)
    names = sd.columns
    mask = np.array([0.0 if n == "intercept" else 1.0 for n in names[: F.shape[1]]])
    return np.concatenate([mask, np.zeros(K)])


def _initial(sd: StackedDataset, family: str) -> np.ndarray:
    F, block, K = _split(sd)
    coef = np.zeros(F.shape[1] + K)
    link = (lambda f: math.log(f / (1 - f))) if family == LOGISTIC else math.log
    clip = lambda f: min(max(f, 1e-6), 1 - 1e-6)  # noqa: E731
    if block is not None:
        d = np.bincount(block, sd.outcome, minlength=K)
        n = np.bincount(block, minlength=K)
        coef[F.shape[1]:] = [link(clip(dk / nk)) for dk, nk in zip(d, n)]
    elif "intercept" in sd.columns:
        coef[sd.columns.index("intercept")] = link(clip(float(sd.outcome.mean())))
    return coef


def _column_singular(S: np.ndarray, names) -> str:
    """Name the first column that makes the leading block of ``S`` singular."""
    scale = np.sqrt(np.maximum(np.abs(np.diag(S)), 1e-300))
    Sn = S / np.outer(scale, scale)
    for j in range(S.shape[0]):
        if np.diag(S)[j] <= 1e-12 * max(1.0, np.max(np.abs(np.diag(S)))):
            return names[j]
        ev = np.linalg.eigvalsh(Sn[: j + 1, : j + 1])
        if ev[0] <= 1e-10 * max(ev[-1], 1.0):
            return names[j]
    return names[-1]


def _newton_system(F, block, K, w, grad, pen, names):
    """Solve ``H delta = grad`` with ``H = [[A, B], [B', diag(D)]]`` (negated Hessian)."""
    q = F.shape[1]
    A = (F * w[:, None]).T @ F + np.diag(pen[:q])
    if block is None:
        S, rhs = A, grad
    else:
        D = np.bincount(block, w, minlength=K)
        if np.any(D <= 0):
            raise SingularHessianError(names[q + int(np.argmin(D))])
        B = np.column_stack([np.bincount(block, w * F[:, j], minlength=K) for j in range(q)]).T \
            if q else np.zeros((0, K))
        BDinv = B / D
        S = A - BDinv @ B.T
        rhs = grad[:q] - BDinv @ grad[q:]
    if q:
        try:
            L = np.linalg.cholesky(S)
        except np.linalg.LinAlgError:
            raise SingularHessianError(_column_singular(S, names[:q])) from None
        # L_jj^2 is the part of column j not explained by earlier columns (or the
        # indicators); compare with its uncentered information A_jj
        if np.any(np.diag(L) ** 2 <= 1e-10 * np.diag(A)):
            raise SingularHessianError(_column_singular(S, names[:q]))
        Sinv = np.linalg.inv(S)
        db = np.linalg.solve(L.T, np.linalg.solve(L, rhs))
    else:
        Sinv = np.zeros((0, 0))
        db = np.zeros(0)
    if block is None:
        return db, np.sqrt(np.diag(Sinv))
    da = (grad[q:] - B.T @ db) / D
    var_a = 1.0 / D + np.einsum("ik,ij,jk->k", BDinv, Sinv, BDinv) if q else 1.0 / D
    se = np.concatenate([np.sqrt(np.diag(Sinv)), np.sqrt(var_a)])
    return np.concatenate([db, da]), se


def fit_glm(sd: StackedDataset, family: str = LOGISTIC, opts: GlmOptions | None = None,
            **kw) -> GlmFit:
    """Maximize the (ridge-penalized) binomial or Poisson log-likelihood.

    Steps are halved until the penalized log-likelihood does not decrease.
    Iteration stops once the gradient max-norm is at most ``tol``.
    Coefficients are clipped to +-30; hitting the bound without converging
    is reported as separation.
    """
    opts = opts or GlmOptions(**kw)
    if family not in (LOGISTIC, POISSON):
        raise ValueError(f"unknown family {family!r}")
    if sd.n_rows == 0:
        raise ValueError("empty stacked dataset")
    F, block, K = _split(sd)
    names = sd.columns
    y = sd.outcome.astype(float)
    pen = opts.ridge * _penalty_mask(sd)

    def objective(c):
        return _loglik_eta(family, y, _eta(F, block, c)) - 0.5 * float(np.sum(pen * c * c))

    coef = _initial(sd, family)
    obj = objective(coef)
    converged = False
    messages = []
    it = 0
    gnorm = math.inf
    se = np.full(coef.shape, np.nan)
    for it in range(opts.max_iter + 1):
        eta = _eta(F, block, coef)
        mu = _mean(family, eta)
        resid = y - mu
        grad = F.T @ resid
        if block is not None:
            grad = np.concatenate([grad, np.bincount(block, resid, minlength=K)])
        grad = grad - pen * coef
        gnorm = float(np.max(np.abs(grad))) if grad.size else 0.0
        w = mu * (1.0 - mu) if family == LOGISTIC else mu
        delta, se = _newton_system(F, block, K, w, grad, pen, names)
        if gnorm <= opts.tol:
            converged = True
            break
        if it == opts.max_iter:
            break
        step = 1.0
        for _ in range(50):
            trial = np.clip(coef + step * delta, -COEF_BOUND, COEF_BOUND)
            trial_obj = objective(trial)
            if trial_obj >= obj - 1e-12 * abs(obj):
                break
            step *= 0.5
        else:
            messages.append("step halving failed to increase the likelihood")
            break
        if np.array_equal(trial, coef):
            break
        coef, obj = trial, trial_obj

    separation = False
    # a coefficient heading to infinity still takes Newton steps of order 1 while
    # the gradient decays geometrically; a finite optimum takes steps ~ se^2 * tol.
    # Indicator columns are exempt: a risk set where everyone fails has alpha = inf.
    q = F.shape[1]
    drifting = np.zeros(coef.shape, dtype=bool)
    if converged and opts.ridge == 0:
        drifting[:q] = np.abs(delta[:q]) > 0.1
    if drifting.any():
        converged = False
        separation = True
        cols = [names[j] for j in np.flatnonzero(drifting)]
        msg = f"possible separation: diverging coefficients {', '.join(cols)}"
        messages.append(msg)
        warnings.warn(msg, SeparationWarning, stacklevel=2)
    at_bound = np.abs(coef) >= COEF_BOUND
    if at_bound.any() and not converged and not separation:
        separation = True
        cols = [names[j] for j in np.flatnonzero(at_bound)]
        msg = f"possible separation: coefficients at bound {COEF_BOUND:g}: {', '.join(cols)}"
        messages.append(msg)
        warnings.warn(msg, SeparationWarning, stacklevel=2)
    return GlmFit(
        family=family,
        coefficients=coef,
        names=tuple(names),
        encoding=sd.encoding,
        time_index=sd.time_index.copy(),
        covariate_names=sd.covariate_names,
        converged=converged,
        iterations=it,
        final_gradient_norm=gnorm,
        std_errors=se,
        loglik=_loglik_eta(family, y, _eta(F, block, coef)),
        ridge=opts.ridge,
        separation=separation,
        messages=tuple(messages),
    )


def predict_hazard(fit: GlmFit, x, k: int) -> float:
    """Conditional hazard at event-time index ``k`` for one covariate vector.

    Poisson rates above 1 are truncated; see :meth:`GlmFit.hazards` for
    the clip count.
    """
    x = np.asarray(x, dtype=float).reshape(1, -1)
    eta = float(fit.linear_predictor(x, k)[0])
    if fit.family == LOGISTIC:
        return float(expit(eta))
    return min(1.0, math.exp(eta))


def log_likelihood(fit: GlmFit, sd: StackedDataset) -> float:
    if tuple(sd.columns) != fit.names:
        raise ValueError("stacked dataset columns do not match the fitted model")
    return stacked_loglik(sd, fit.coefficients, fit.family)


def wald_pvalues(coef, se) -> np.ndarray:
    """Two-sided normal p-values for ``coef / se``."""
    z = np.abs(np.asarray(coef, dtype=float) / np.asarray(se, dtype=float))
    return np.array([math.erfc(v / math.sqrt(2.0)) for v in z])
