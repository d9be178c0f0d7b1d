import numpy as np
import pytest
from hypothesis import strategies as st

from survstack.data import SurvivalDataset

# 3 subjects, 2 covariates, t1 < t2 < t3 with the middle subject censored
EXAMPLE_X = np.array([[1.0, 2.0], [3.0, 1.0], [2.0, 5.0]])
EXAMPLE_T = np.array([1.0, 2.0, 3.0])
EXAMPLE_D = np.array([1, 0, 1])


@pytest.fixture
def example_ds():
    return SurvivalDataset.from_arrays(EXAMPLE_T, EXAMPLE_D, EXAMPLE_X, ids=[1, 2, 3],
                                       covariate_names=["covariate1", "covariate2"])


def random_dataset(rng, n, p=2, n_times=None, truncate=False, min_events=1):
    """Random single-record data; ``n_times`` limits distinct times to force ties."""
    while True:
        if n_times:
            time = rng.integers(1, n_times + 1, size=n).astype(float)
        else:
            time = np.round(rng.uniform(0.5, 10.0, size=n), 3)
        event = rng.integers(0, 2, size=n)
        if event.sum() >= min_events:
            break
    entry = np.zeros(n)
    if truncate:
        mask = rng.random(n) < 0.4
        entry[mask] = rng.uniform(0, 1, size=mask.sum()) * time[mask]
    x = rng.normal(size=(n, p))
    return SurvivalDataset.from_arrays(time, event, x, entry=entry)


@st.composite
def datasets(draw, max_n=12, p=2, truncation=True, need_event=True):
    n = draw(st.integers(1, max_n))
    times = draw(st.lists(st.integers(1, 8), min_size=n, max_size=n))
    events = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    if need_event and sum(events) == 0:
        events[draw(st.integers(0, n - 1))] = 1
    entries = [0.0] * n
    if truncation:
        fr = draw(st.lists(st.sampled_from([0.0, 0.0, 0.25, 0.5, 0.9]), min_size=n, max_size=n))
        entries = [f * t for f, t in zip(fr, times)]
    x = draw(st.lists(st.lists(st.floats(-3, 3, allow_nan=False), min_size=p, max_size=p),
                      min_size=n, max_size=n))
    return SurvivalDataset.from_arrays(np.array(times, float), np.array(events),
                                       np.array(x, float).reshape(n, p), entry=np.array(entries))
