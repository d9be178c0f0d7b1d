import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survstack.cox import CoxFit, fit_cox, kaplan_meier
from survstack.curve import SurvivalCurve
from survstack.glm import GlmFit, fit_glm
from survstack.predict import (horizon_risk, horizon_risks, read_curves, survival_curve, survival_curves,
                               survival_matrix, write_curves)
from survstack.stacking import TimeEncoding, stack

from conftest import datasets, random_dataset


def cox_model(times, hazards, beta=()):
    beta = np.asarray(beta, dtype=float)
    return CoxFit(beta=beta, baseline_times=np.asarray(times, float), baseline_hazard=np.asarray(hazards, float),
                  partial_loglik=0.0, converged=True, std_errors=np.zeros(len(beta)),
                  covariate_names=tuple(f"x{j + 1}" for j in range(len(beta))))


def logistic_zero(K, p=1):
    names = tuple(f"x{j + 1}" for j in range(p)) + tuple(f"rs_{k + 1}" for k in range(K))
    return GlmFit("logistic", np.zeros(p + K), names, TimeEncoding(), np.arange(1.0, K + 1),
                  names[:p], True, 0, 0.0, np.zeros(p + K), 0.0)


def test_product_arithmetic():
    m = cox_model([1.0, 2.0], [0.1, 0.2])
    c = survival_curve(m, [])
    np.testing.assert_allclose(c.survival, [0.9, 0.72])
    assert horizon_risk(m, [], 2.0) == pytest.approx(0.28)
    assert horizon_risk(m, [], 50.0) == pytest.approx(0.28)
    assert horizon_risk(m, [], 0.5) == 0.0
    np.testing.assert_allclose(horizon_risks(m, np.zeros((2, 0)), 1.5), [0.1, 0.1])
    np.testing.assert_array_equal(horizon_risks(m, np.zeros((2, 0)), 0.5), [0.0, 0.0])


def test_zero_logistic_halves():
    c = survival_curve(logistic_zero(3), [7.0])
    np.testing.assert_array_equal(c.survival, [0.5, 0.25, 0.125])


def test_step_semantics():
    c = SurvivalCurve([1.0, 3.0], [0.8, 0.4])
    assert c(0.999) == 1.0 and c(1.0) == 0.8 and c(2.9) == 0.8 and c(3.0) == 0.4 and c(99) == 0.4
    assert c.left_limit(1.0) == 1.0 and c.left_limit(3.0) == 0.8
    with pytest.raises(ValueError):
        SurvivalCurve([2.0, 1.0], [0.5, 0.4])


@settings(max_examples=25, deadline=None)
@given(datasets(max_n=12, p=0))
def test_intercept_only_logistic_is_kaplan_meier(ds):
    fit = fit_glm(stack(ds))
    km = kaplan_meier(ds)
    c = survival_curve(fit, [])
    np.testing.assert_array_equal(c.times, km.times)
    np.testing.assert_allclose(c.survival, km.survival, atol=1e-6)


@pytest.mark.parametrize("seed", range(3))
def test_cox_beta_zero_is_kaplan_meier(seed):
    rng = np.random.default_rng(seed)
    ds = random_dataset(rng, 30, p=2, n_times=8, truncate=True)
    from survstack.cox import breslow_baseline

    times, haz = breslow_baseline(ds, [0.0, 0.0])
    c = survival_curve(cox_model(times, haz, [0.0, 0.0]), rng.normal(size=2))
    np.testing.assert_allclose(c.survival, kaplan_meier(ds).survival, atol=1e-12)


def test_cox_clipping_counted():
    m = cox_model([1.0, 2.0, 3.0], [0.3, 0.5, 0.2], [1.0])
    c = survival_curve(m, [1.0])
    # only 0.5 e exceeds 1
    assert c.n_clipped == 1
    np.testing.assert_allclose(c.survival, [1 - 0.3 * math.e, 0.0, 0.0])
    S, clipped = survival_matrix(m, [[1.0], [0.0]])
    assert clipped == 1
    np.testing.assert_allclose(S[1], np.cumprod([0.7, 0.5, 0.8]))


def test_poisson_rates_truncated():
    fit = GlmFit("poisson", np.array([1.0, math.log(0.3), math.log(0.9)]), ("x1", "rs_1", "rs_2"),
                 TimeEncoding(), np.array([1.0, 2.0]), ("x1",), True, 0, 0.0, np.zeros(3), 0.0)
    c = survival_curve(fit, [1.0])
    assert c.n_clipped == 1
    np.testing.assert_allclose(c.survival, [1 - 0.3 * math.e, 0.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        survival_curve(cox_model([1.0], [0.1], [0.5]), [1.0, 2.0])


@settings(max_examples=30, deadline=None)
@given(datasets(max_n=12, p=1), st.floats(-3, 3), st.floats(-3, 3), st.floats(0, 10), st.floats(0, 10))
def test_curves_monotone_and_bounded(ds, x, beta, t1, t2):
    from survstack.cox import breslow_baseline

    times, haz = breslow_baseline(ds, [beta])
    for model in (cox_model(times, haz, [beta]), logistic_zero(len(times))):
        model = model if isinstance(model, CoxFit) else GlmFit(
            "logistic", np.r_[beta, np.log(haz / (1 + haz))], model.names, model.encoding, times,
            model.covariate_names, True, 0, 0.0, np.zeros(len(times) + 1), 0.0)
        c = survival_curve(model, [x])
        assert np.all(np.diff(c.survival) <= 1e-15)
        assert np.all((c.survival >= 0) & (c.survival <= 1))
        lo, hi = sorted((t1, t2))
        assert horizon_risk(model, [x], lo) <= horizon_risk(model, [x], hi) + 1e-15


def test_continuous_encoding_curves_valid():
    rng = np.random.default_rng(0)
    ds = random_dataset(rng, 80, p=2, n_times=6)
    fit = fit_glm(stack(ds, TimeEncoding("polynomial", 2, interactions=("x1",))))
    for c in survival_curves(fit, rng.normal(size=(10, 2))):
        np.testing.assert_array_equal(c.times, fit.time_index)
        assert np.all(np.diff(c.survival) <= 0) and np.all(c.survival >= 0)


def test_batch_matches_single():
    rng = np.random.default_rng(1)
    ds = random_dataset(rng, 40, p=2)
    fit = fit_cox(ds)
    X = rng.normal(size=(5, 2))
    S, _ = survival_matrix(fit, X)
    for i, c in enumerate(survival_curves(fit, X)):
        np.testing.assert_array_equal(c.survival, survival_curve(fit, X[i]).survival)
        np.testing.assert_array_equal(c.survival, S[i])
    t = float(np.median(fit.baseline_times))
    np.testing.assert_allclose(horizon_risks(fit, X, t), [horizon_risk(fit, x, t) for x in X], rtol=0, atol=0)


def test_curve_csv_round_trip(tmp_path):
    curves = [SurvivalCurve([1.0, 2.5], [0.9, 0.1 + 1e-17]), SurvivalCurve([1.0, 2.5], [1 / 3, 1 / 7])]
    write_curves(tmp_path / "c.csv", ["a", "b"], curves, horizon=2.0)
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "subject_id,time,survival,risk"
    assert len(lines) == 5
    ids, back = read_curves(tmp_path / "c.csv")
    assert ids == ["a", "b"]
    for c, b in zip(curves, back):
        np.testing.assert_array_equal(c.times, b.times)
        np.testing.assert_array_equal(c.survival, b.survival)
