import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from survstack.curve import SurvivalCurve
from survstack.data import SurvivalDataset
from survstack.metrics import (DroppedSubjectsWarning, UndefinedMetricError, auc_at, brier_at, cindex,
                               evaluate, integrated, integrated_auc, integrated_brier, read_report,
                               resolve_horizon, time_grid, write_report)

from conftest import datasets


# --- brute-force oracles -------------------------------------------------------

def oracle_G(entry, time, event, t, left=False):
    """Censoring Kaplan-Meier by looping over censoring times."""
    g = 1.0
    for c in sorted(set(time[event == 0].tolist())):
        if c > t or (left and c >= t):
            break
        n = sum(1 for i in range(len(time)) if entry[i] < c <= time[i])
        m = sum(1 for i in range(len(time)) if time[i] == c and event[i] == 0)
        g *= 1.0 - m / n
    return g


def oracle_cindex(risk, entry, time, event):
    num = den = 0.0
    for i in range(len(time)):
        for j in range(len(time)):
            if event[i] and time[i] < time[j] and entry[j] < time[i]:
                den += 1
                num += 1.0 if risk[i] > risk[j] else 0.5 if risk[i] == risk[j] else 0.0
    return num / den


def oracle_auc(risk, entry, time, event, t):
    num = wc_sum = wn_sum = 0.0
    for i in range(len(time)):
        if not (event[i] and time[i] <= t):
            continue
        wi = 1.0 / oracle_G(entry, time, event, time[i], left=True)
        wc_sum += wi
        for j in range(len(time)):
            if time[j] > t:
                wj = 1.0 / oracle_G(entry, time, event, t)
                num += wi * wj * (1.0 if risk[i] > risk[j] else 0.5 if risk[i] == risk[j] else 0.0)
    for j in range(len(time)):
        if time[j] > t:
            wn_sum += 1.0 / oracle_G(entry, time, event, t)
    return num / (wc_sum * wn_sum)


def oracle_brier(S, entry, time, event, t):
    total = 0.0
    for i in range(len(time)):
        if event[i] and time[i] <= t:
            total += S[i] ** 2 / oracle_G(entry, time, event, time[i], left=True)
        elif time[i] > t:
            total += (1 - S[i]) ** 2 / oracle_G(entry, time, event, t)
    return total / len(time)


def oracle_trapezoid(ts, vs):
    area = 0.0
    for a in range(len(ts) - 1):
        area += (ts[a + 1] - ts[a]) * (vs[a] + vs[a + 1]) / 2
    return area / (ts[-1] - ts[0])


def arrays(ds):
    return ds.entry, ds.time, ds.event


def random_curves(rng, n, times):
    h = rng.uniform(0, 0.6, size=(n, len(times)))
    return [SurvivalCurve(times, np.cumprod(1 - h[i])) for i in range(n)]


# --- trivial cases ------------------------------------------------------------

def uncensored(times):
    return SurvivalDataset.from_arrays(np.asarray(times, float), np.ones(len(times), int))


def test_cindex_trivial():
    ds = uncensored([1, 2, 3, 4])
    assert cindex([4, 3, 2, 1], ds) == 1.0
    assert cindex([1, 1, 1, 1], ds) == 0.5
    assert cindex([1, 2, 3, 4], ds) == 0.0


def test_cindex_truncation_comparability():
    # subject 2 enters at 1.5, after subject 1's event: the pair is not comparable
    ds = SurvivalDataset.from_arrays([1.0, 2.0, 3.0], [1, 1, 0], entry=[0, 1.5, 0])
    assert cindex([0.0, 1.0, -1.0], ds) == pytest.approx(oracle_cindex([0.0, 1.0, -1.0], *arrays(ds)))
    assert cindex([0.0, 1.0, -1.0], ds) == 1.0


def test_cindex_undefined():
    with pytest.raises(UndefinedMetricError):
        cindex([1, 2], SurvivalDataset.from_arrays([1.0, 2.0], [0, 0]))


def test_auc_trivial():
    ds = uncensored([1, 2, 3, 4])
    assert auc_at([9, 8, 1, 0], ds, 2.0) == 1.0
    assert auc_at([5, 5, 5, 5], ds, 2.0) == 0.5
    with pytest.raises(UndefinedMetricError, match="no cases"):
        auc_at([1, 2, 3, 4], ds, 0.5)
    with pytest.raises(UndefinedMetricError, match="no controls"):
        auc_at([1, 2, 3, 4], ds, 4.0)


def test_auc_six_subjects_one_censored():
    ds = SurvivalDataset.from_arrays([1.0, 2.0, 2.5, 3.0, 4.0, 5.0], [1, 0, 1, 1, 1, 0])
    risk = np.array([0.9, 0.4, 0.5, 0.7, 0.2, 0.3])
    # G drops to 4/5 at 2: case weights 1, 5/4, 5/4 for t <= 3; controls weight 5/4
    wc = np.array([1.0, 1.25, 1.25])
    wn = np.array([1.25, 1.25])
    rc, rn = risk[[0, 2, 3]], risk[[4, 5]]
    expected = sum(wc[a] * wn[b] * (rc[a] > rn[b]) for a in range(3) for b in range(2)) / (wc.sum() * wn.sum())
    assert auc_at(risk, ds, 3.0) == pytest.approx(expected, abs=1e-15)


def test_brier_trivial():
    ds = uncensored([1, 2, 3, 4])
    S = np.array([0.0, 0.0, 1.0, 1.0])
    assert brier_at(S, ds, 2.0) == 0.0
    assert brier_at(np.full(4, 0.5), ds, 2.0) == 0.25
    curves = [SurvivalCurve([2.0], [0.5])] * 4
    assert brier_at(curves, ds, 2.0) == 0.25


def test_brier_trivial_predictor_is_weighted_case_fraction():
    ds = SurvivalDataset.from_arrays([1.0, 2.0, 2.5, 3.0, 4.0, 5.0], [1, 0, 1, 1, 1, 0])
    t = 3.5
    w = [1.0 / oracle_G(*arrays(ds), ti, left=True) for ti in (1.0, 2.5, 3.0)]
    assert brier_at(np.ones(6), ds, t) == pytest.approx(sum(w) / 6, abs=1e-15)


def test_integrated_trivial():
    assert integrated(lambda t: 0.3, [1.0, 2.0, 5.0]) == pytest.approx(0.3)
    assert integrated(lambda t: {1.0: 0.6, 2.0: 0.8}[t], [1.0, 2.0]) == pytest.approx(0.7)
    with pytest.raises(UndefinedMetricError):
        integrated(lambda t: 0.3, [1.0])


def test_integrated_skips_undefined_points():
    def f(t):
        if t == 2.0:
            raise UndefinedMetricError("x")
        return t

    with pytest.warns(UserWarning, match="undefined"):
        v = integrated(f, [1.0, 2.0, 3.0])
    assert v == pytest.approx(2.0)

    def never(t):
        raise UndefinedMetricError("x")

    with pytest.raises(UndefinedMetricError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        integrated(never, [1.0, 2.0])


def test_zero_censoring_survival_drops_subjects():
    # the only subject at risk at t=2 is censored there, so G(2) = 0
    ds = SurvivalDataset.from_arrays([1.0, 2.0, 3.0], [1, 0, 0], entry=[0, 0, 2.5])
    with pytest.warns(DroppedSubjectsWarning):
        v = brier_at(np.array([0.2, 0.5, 0.9]), ds, 2.5)
    assert 0.0 <= v <= 1.0


# --- oracle comparisons --------------------------------------------------------

@pytest.mark.parametrize("seed", range(10))
def test_metrics_match_oracles(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(5, 13))
    while True:
        time = rng.integers(1, 7, size=n).astype(float)
        event = (rng.random(n) < 0.7).astype(int)
        ds = SurvivalDataset.from_arrays(time, event)
        if event.sum() >= 2:
            break
    risk = np.round(rng.normal(size=n), 1)
    entry, time, event = arrays(ds)
    assert cindex(risk, ds) == pytest.approx(oracle_cindex(risk, entry, time, event), abs=1e-12)
    for t in np.unique(time[event == 1]):
        if np.any(time > t):
            assert auc_at(risk, ds, t) == pytest.approx(oracle_auc(risk, entry, time, event, t), abs=1e-12)
        S = rng.uniform(size=n)
        if oracle_G(entry, time, event, t) > 0:
            assert brier_at(S, ds, t) == pytest.approx(oracle_brier(S, entry, time, event, t), abs=1e-12)


def test_five_subject_cindex():
    ds = SurvivalDataset.from_arrays([2.0, 3.0, 3.0, 5.0, 6.0], [1, 0, 1, 1, 0])
    risk = [0.5, 0.9, 0.2, 0.3, 0.1]
    assert cindex(risk, ds) == pytest.approx(oracle_cindex(risk, *arrays(ds)), abs=1e-15)


def test_integrated_matches_trapezoid_oracle():
    rng = np.random.default_rng(2)
    n = 12
    ds = SurvivalDataset.from_arrays(rng.integers(1, 9, size=n).astype(float), (rng.random(n) < 0.7).astype(int))
    times = np.arange(1.0, 9.0)
    curves = random_curves(rng, n, times)
    grid = time_grid(ds, 6.0)
    entry, time, event = arrays(ds)
    S = lambda t: np.array([c(t) for c in curves])
    ts = [t for t in grid if np.any(event[time <= t]) and np.any(time > t)]
    vs = [oracle_auc(1 - S(t), entry, time, event, t) for t in ts]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        assert integrated_auc(curves, ds, ts) == pytest.approx(oracle_trapezoid(ts, vs), abs=1e-12)
        vs = [oracle_brier(S(t), entry, time, event, t) for t in grid]
        assert integrated_brier(curves, ds, grid) == pytest.approx(oracle_trapezoid(list(grid), vs), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(datasets(max_n=12, p=0), st.lists(st.integers(-20, 20), min_size=12, max_size=12))
def test_rank_invariance(ds, raw):
    # coarse grid so the transforms below cannot merge distinct values
    risk = np.array(raw[:ds.n_rows]) / 4.0
    for f in (np.exp, lambda r: 3 * r + 1, np.arctan):
        try:
            a = cindex(risk, ds)
        except UndefinedMetricError:
            return
        assert cindex(f(risk), ds) == pytest.approx(a, abs=1e-12)
    t = float(np.median(ds.time))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            a = auc_at(risk, ds, t)
            assert auc_at(np.exp(risk / 10), ds, t) == pytest.approx(a, abs=1e-12)
    except UndefinedMetricError:
        pass


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=12), st.data())
def test_auc_without_censoring_is_roc(times, data):
    n = len(times)
    ds = uncensored(times)
    risk = np.array(data.draw(st.lists(st.integers(0, 4), min_size=n, max_size=n)), float)
    t = data.draw(st.sampled_from(sorted(set(times))))
    y = np.array(times) <= t
    if y.all():
        return
    pos, neg = risk[y], risk[~y]
    roc = sum((a > b) + 0.5 * (a == b) for a in pos for b in neg) / (len(pos) * len(neg))
    assert auc_at(risk, ds, t) == pytest.approx(roc, abs=1e-12)


def test_resolve_horizon():
    ds = uncensored([1, 2, 3, 4])
    assert resolve_horizon(ds, "q0.75") == 3.0
    assert resolve_horizon(ds, 2.5) == 2.5
    assert resolve_horizon(ds, "2.5") == 2.5
    single = SurvivalDataset.from_arrays([2.0, 5.0], [1, 0])
    assert resolve_horizon(single, "q0.1") == resolve_horizon(single, "q0.9") == 2.0
    for bad in ("q0", "q1", "q1.5", "qx"):
        with pytest.raises(ValueError):
            resolve_horizon(ds, bad)
    with pytest.raises(UndefinedMetricError):
        resolve_horizon(SurvivalDataset.from_arrays([1.0], [0]), "q0.5")


def test_resolve_horizon_ties():
    # events at 1, 1, 1, 2: counting ties puts the 0.75 quantile at 1
    ds = uncensored([1, 1, 1, 2])
    assert resolve_horizon(ds, "q0.75") == 1.0
    assert resolve_horizon(ds, "q0.75", distinct=True) == 1.0
    ds = uncensored([1, 2, 2, 2, 3, 4])
    assert resolve_horizon(ds, "q0.5") == 2.0
    assert resolve_horizon(ds, "q0.75", distinct=True) == 3.0
    assert resolve_horizon(ds, "q0.75") == 2.0


def test_evaluate_and_report_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    n = 40
    ds = SurvivalDataset.from_arrays(rng.integers(1, 11, size=n).astype(float), (rng.random(n) < 0.7).astype(int))
    curves = random_curves(rng, n, np.arange(1.0, 11.0))
    h = resolve_horizon(ds, "q0.75")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        reps = evaluate(curves, ds, h)
    assert [r.metric for r in reps] == ["auc_t", "brier_t", "cindex", "iauc", "ibrier"]
    risk = 1 - np.array([c(h) for c in curves])
    assert reps[0].value == pytest.approx(auc_at(risk, ds, h), abs=1e-15)
    assert reps[2].value == pytest.approx(cindex(risk, ds), abs=1e-15)
    for r in reps:
        assert 0.0 <= r.value <= 1.0
    write_report(reps, tmp_path / "r.csv")
    assert read_report(tmp_path / "r.csv") == reps
    with pytest.raises(ValueError):
        evaluate(curves, ds, h, ["nope"])
