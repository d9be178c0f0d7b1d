"""Side-by-side Cox, stacked-logistic and stacked-Poisson coefficients."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cox import CoxFit, fit_cox
from .data import SurvivalDataset
from .glm import LOGISTIC, POISSON, GlmFit, fit_glm, wald_pvalues
from .stacking import TimeEncoding, stack


@dataclass(frozen=True)
class Comparison:
    names: tuple[str, ...]
    cox: CoxFit
    logistic: GlmFit
    poisson: GlmFit

    def pvalues(self, which: str) -> np.ndarray:
        if which == "cox":
            return wald_pvalues(self.cox.beta, self.cox.std_errors)
        fit = getattr(self, which)
        return wald_pvalues(fit.beta, fit.std_errors[: fit.p])

    @property
    def delta_logistic(self) -> float:
        return float(np.max(np.abs(self.cox.beta - self.logistic.beta), initial=0.0))

    @property
    def delta_poisson(self) -> float:
        return float(np.max(np.abs(self.cox.beta - self.poisson.beta), initial=0.0))

    def table(self) -> str:
        pc, pl, pp = self.pvalues("cox"), self.pvalues("logistic"), self.pvalues("poisson")
        w = max([len(n) for n in self.names] + [9])
        head = (f"{'':{w}}  {'cox':>9} {'logistic':>9} {'poisson':>9}   "
                f"{'p cox':>7} {'p logit':>7} {'p pois':>7}")
        lines = [head, "-" * len(head)]
        for j, n in enumerate(self.names):
            lines.append(f"{n:{w}}  {self.cox.beta[j]:9.4f} {self.logistic.beta[j]:9.4f} "
                         f"{self.poisson.beta[j]:9.4f}   {pc[j]:7.4f} {pl[j]:7.4f} {pp[j]:7.4f}")
        lines.append("")
        lines.append(f"max |cox - logistic| = {self.delta_logistic:.3e}")
        lines.append(f"max |cox - poisson|  = {self.delta_poisson:.3e}")
        conv = {"cox": self.cox.converged, "logistic": self.logistic.converged,
                "poisson": self.poisson.converged}
        if not all(conv.values()):
            lines.append("not converged: " + ", ".join(k for k, v in conv.items() if not v))
        return "\n".join(lines)


def compare_models(ds: SurvivalDataset, max_iter: int = 100, tol: float = 1e-8) -> Comparison:
    sd = stack(ds, TimeEncoding("indicators"))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cox = fit_cox(ds, max_iter=max_iter, tol=tol)
        logistic = fit_glm(sd, LOGISTIC, max_iter=max_iter, tol=tol)
        poisson = fit_glm(sd, POISSON, max_iter=max_iter, tol=tol)
    return Comparison(ds.covariate_names, cox, logistic, poisson)
