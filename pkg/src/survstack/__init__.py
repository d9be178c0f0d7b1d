"""Survival stacking: survival data recast as stacked binary classification."""
from .data import (IntervalRecord, SubjectRecord, SurvivalDataset, event_times, read_csv,
                   risk_set, write_csv)
from .stacking import StackedDataset, TimeEncoding, export_stacked, read_stacked, stack, stacked_row_count
from .glm import GlmFit, fit_glm, log_likelihood, predict_hazard
from .cox import CoxFit, breslow_baseline, fit_cox, kaplan_meier, profile_loglik
from .curve import SurvivalCurve
from .predict import horizon_risk, survival_curve
from .metrics import MetricReport, auc_at, brier_at, cindex, integrated, resolve_horizon
from .sim import TvHazardConfig, hazard_tv, simulate_ph, simulate_tv

__version__ = "0.1.0"
