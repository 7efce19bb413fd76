import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from probssi import SimulationConfig, benchmark_3dof, build_hankel, covariances, simulate_response

settings.register_profile(
    "default", max_examples=40, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def system():
    return benchmark_3dof()


@pytest.fixture(scope="session")
def clean_record(system):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return simulate_response(system, SimulationConfig(seed=11))


@pytest.fixture(scope="session")
def bench_cov(clean_record):
    return covariances(build_hankel(clean_record, 10))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)



# ---- shared, expensive reproduction runs (computed once per session) ----------

CLEAN_SEED = 2025
CORRUPTED_SEEDS = tuple(range(20))
OUTLIER_SEED_OFFSET = 1000


def _sweep(record, method):
    from probssi.ssi import SWEEP_EM, SWEEP_ORDERS, run_ssi

    return run_ssi(record, 10, SWEEP_ORDERS, method, em=SWEEP_EM)


@pytest.fixture(scope="session")
def clean_sweeps(system):
    """Clean benchmark record at the fixed reproduction seed, swept by both methods."""
    import time

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rec = simulate_response(system, SimulationConfig(seed=CLEAN_SEED))
        out = {}
        for method in ("cov", "robust"):
            t0 = time.perf_counter()
            out[method] = _sweep(rec, method)
            out[method + "_seconds"] = time.perf_counter() - t0
    return out


@pytest.fixture(scope="session")
def corrupted_sweeps(system):
    """Twenty forcing/outlier seeds with the random-0.1pct preset, both methods."""
    from probssi import inject_outliers, outlier_preset

    runs = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for seed in CORRUPTED_SEEDS:
            rec = simulate_response(system, SimulationConfig(seed=seed))
            bad, _ = inject_outliers(rec, outlier_preset("random-0.1pct", seed=OUTLIER_SEED_OFFSET + seed))
            runs.append({"seed": seed, "cov": _sweep(bad, "cov"), "robust": _sweep(bad, "robust")})
    return runs
