import numpy as np
import pytest

from probssi.bench import BenchConfig, TrialResult, run_bench, summarise
from probssi.robust import EmConfig

SMALL = dict(num_samples=2048, em=EmConfig(max_iters=3))


def test_single_trial_gives_one_row_per_method():
    res = run_bench(BenchConfig(trials=1, **SMALL))
    assert [(r.trial, r.method) for r in res] == [(0, "cov"), (0, "robust")]
    assert all(r.frequencies.shape == (3,) for r in res)


def test_results_do_not_depend_on_jobs():
    cfg = dict(trials=3, preset="random-0.1pct", seed=5, **SMALL)
    serial = run_bench(BenchConfig(jobs=1, **cfg))
    pooled = run_bench(BenchConfig(jobs=2, **cfg))
    assert [(r.trial, r.seed, r.method) for r in serial] == [(r.trial, r.seed, r.method) for r in pooled]
    for a, b in zip(serial, pooled):
        np.testing.assert_array_equal(a.frequencies, b.frequencies)


def test_clean_cov_trial_near_truth():
    (r,) = run_bench(BenchConfig(trials=1, methods=("cov",), num_samples=8192))
    # a single order-6 trial scatters by a couple of percent around the truth
    np.testing.assert_allclose(r.frequencies, [4.74, 6.44, 10.65], rtol=0.03)
    assert r.error == ""


def test_summary_skips_missing_poles():
    res = [
        TrialResult(0, 0, "cov", np.array([1.0, 2.0])),
        TrialResult(1, 1, "cov", np.array([3.0, np.nan]), "only 1 oscillatory poles"),
        TrialResult(2, 2, "cov", np.array([5.0, 4.0])),
    ]
    s = summarise(res)["cov"]
    np.testing.assert_allclose(s["mean"], [3.0, 3.0])
    np.testing.assert_allclose(s["std"], [2.0, np.sqrt(2.0)])
    np.testing.assert_array_equal(s["valid"], [3, 2])
    assert s["failures"] == 1


@pytest.mark.parametrize("kwargs", [dict(trials=0), dict(jobs=0), dict(order=5), dict(order=0)])
def test_config_validation(kwargs):
    with pytest.raises(ValueError):
        BenchConfig(**kwargs)
