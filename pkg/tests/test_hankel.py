import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from helpers import random_spd
from probssi import CovarianceSet, HankelPair, build_hankel, cholesky_sqrt, covariances


def test_benchmark_dimensions(clean_record):
    h = build_hankel(clean_record, 10)
    assert h.past.shape == (30, 8173)
    assert h.future.shape == (30, 8173)
    assert h.ncols == 8192 - 20 + 1


def test_smallest_case():
    y = np.array([[1.0, 2.0, 4.0, 8.0]])
    c = y - y.mean()
    h = build_hankel(y, 1)
    np.testing.assert_array_equal(h.past, c[:, :3])
    np.testing.assert_array_equal(h.future, c[:, 1:])


def test_constant_signal_is_all_zero():
    h = build_hankel(np.full((2, 30), 3.7), 3)
    assert not h.past.any() and not h.future.any()
    cov = covariances(h)
    for m in (cov.spp, cov.sfp, cov.sff):
        assert not m.any()


def test_too_short_record_rejected():
    with pytest.raises(ValueError, match="too short"):
        build_hankel(np.zeros((1, 5)), 3)
    with pytest.raises(ValueError):
        build_hankel(np.zeros((1, 5)), 0)


@given(st.integers(1, 3), st.integers(1, 4), st.integers(0, 10), st.integers(0, 2**31))
def test_index_layout(l, j, extra, seed):
    n = 2 * j + extra
    y = np.random.default_rng(seed).standard_normal((l, n))
    yc = y - y.mean(axis=1, keepdims=True)
    h = build_hankel(y, j)
    for t in range(h.ncols):
        for b in range(j):
            for c in range(l):
                assert h.past[b * l + c, t] == yc[c, t + b]
                assert h.future[b * l + c, t] == yc[c, t + j + b]


def test_covariances_match_outer_product_sum(rng):
    y = rng.standard_normal((2, 53))
    h = build_hankel(y, 2)
    assert h.ncols == 50
    cov = covariances(h)
    spp = np.zeros((4, 4))
    sfp = np.zeros((4, 4))
    sff = np.zeros((4, 4))
    for t in range(h.ncols):
        p, f = h.past[:, t], h.future[:, t]
        for a in range(4):
            for b in range(4):
                spp[a, b] += p[a] * p[b]
                sfp[a, b] += f[a] * p[b]
                sff[a, b] += f[a] * f[b]
    np.testing.assert_allclose(cov.spp, spp / 50, atol=1e-10)
    np.testing.assert_allclose(cov.sfp, sfp / 50, atol=1e-10)
    np.testing.assert_allclose(cov.sff, sff / 50, atol=1e-10)


def test_identical_halves(rng):
    x = rng.standard_normal((3, 40))
    cov = covariances(HankelPair(past=x, future=x.copy(), l=3, j=1))
    np.testing.assert_allclose(cov.sff, cov.spp)
    np.testing.assert_allclose(cov.sfp, cov.spp)


def test_spf_is_exact_transpose(bench_cov):
    assert np.array_equal(bench_cov.spf, bench_cov.sfp.T)
    assert np.array_equal(bench_cov.spp, bench_cov.spp.T)
    assert np.array_equal(bench_cov.sff, bench_cov.sff.T)


def test_autocovariances_are_psd(bench_cov):
    for m in (bench_cov.spp, bench_cov.sff):
        assert np.linalg.eigvalsh(m).min() > -1e-12 * np.abs(m).max()


@given(arrays(float, 3, elements=st.floats(-1e3, 1e3)), st.integers(0, 2**31))
def test_offset_invariance(offset, seed):
    y = np.random.default_rng(seed).standard_normal((3, 40))
    a = covariances(build_hankel(y, 3))
    b = covariances(build_hankel(y + offset[:, None], 3))
    for m1, m2 in ((a.spp, b.spp), (a.sfp, b.sfp), (a.sff, b.sff)):
        np.testing.assert_allclose(m1, m2, atol=1e-8)


def test_white_noise_lag_blocks_shrink(rng):
    # off-diagonal lag blocks of white noise decay like 1/sqrt(N)
    norms = []
    for n in (1000, 16000, 256000):
        cov = covariances(build_hankel(rng.standard_normal((2, n)), 2))
        norms.append(np.abs(cov.sfp).max())
    assert norms[1] < norms[0] and norms[2] < norms[1]
    assert norms[2] * np.sqrt(256000) < 10 * norms[0] * np.sqrt(1000)


def test_cholesky_examples():
    np.testing.assert_array_equal(cholesky_sqrt(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(cholesky_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))


@given(st.integers(0, 2**31), st.floats(0.0, 1e-3))
def test_cholesky_multiply_back(seed, jitter):
    m = random_spd(np.random.default_rng(seed), 6)
    low = cholesky_sqrt(m, jitter)
    assert np.allclose(low, np.tril(low))
    target = m + jitter * np.eye(6)
    assert np.linalg.norm(low @ low.T - target) / np.linalg.norm(target) < 1e-10


def test_cholesky_jitter_rescues_semidefinite():
    v = np.array([[1.0, 2.0, 3.0]])
    m = v.T @ v
    low = cholesky_sqrt(m)
    assert np.allclose(low @ low.T, m, atol=1e-6)


def test_cholesky_gives_up_on_indefinite():
    with pytest.raises(np.linalg.LinAlgError):
        cholesky_sqrt(np.diag([1.0, -1.0]))


def test_cholesky_rejects_asymmetric():
    with pytest.raises(ValueError):
        cholesky_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_covariance_set_dim(bench_cov):
    assert isinstance(bench_cov, CovarianceSet) and bench_cov.dim == 30
