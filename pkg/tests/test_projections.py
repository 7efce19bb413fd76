import numpy as np
import pytest
import scipy.linalg as la
from hypothesis import given
from hypothesis import strategies as st

from helpers import principal_angles, random_spd
from probssi import CovarianceSet, RankDeficiencyError, cca, pcca_mle, subspaces
from probssi.projections import singular_value_gap


def _random_cov(rng, d1, d2, n=400):
    x = rng.standard_normal((d1 + d2, n))
    mix = rng.standard_normal((d1 + d2, d1 + d2))
    x = mix @ x
    x -= x.mean(axis=1, keepdims=True)
    s = x @ x.T / n
    return CovarianceSet(spp=s[d1:, d1:], sfp=s[:d1, d1:], sff=s[:d1, :d1])


def _geneig_rho(cov):
    """Canonical correlations from the dense symmetric-definite generalized eigenproblem."""
    d1, d2 = cov.sff.shape[0], cov.spp.shape[0]
    lhs = np.zeros((d1 + d2, d1 + d2))
    lhs[:d1, d1:] = cov.sfp
    lhs[d1:, :d1] = cov.sfp.T
    rhs = la.block_diag(cov.sff, cov.spp)
    vals = la.eigh(lhs, rhs, eigvals_only=True)
    return np.sort(vals)[::-1][:min(d1, d2)]


def _inv_sqrtm(m):
    vals, vecs = np.linalg.eigh(m)
    return (vecs / np.sqrt(vals)) @ vecs.T


@given(st.integers(0, 2**31), st.integers(1, 4), st.integers(1, 4))
def test_cca_matches_generalized_eigenproblem(seed, d1, d2):
    cov = _random_cov(np.random.default_rng(seed), d1, d2)
    d = min(d1, d2)
    res = cca(cov, d)
    np.testing.assert_allclose(res.rho, _geneig_rho(cov), atol=1e-10)


def test_cca_two_by_two_hand_built():
    cov = CovarianceSet(
        spp=np.array([[2.0, 0.3], [0.3, 1.0]]),
        sfp=np.array([[0.5, 0.1], [-0.2, 0.4]]),
        sff=np.array([[1.5, -0.2], [-0.2, 1.0]]),
    )
    np.testing.assert_allclose(cca(cov, 2).rho, _geneig_rho(cov), atol=1e-10)


@given(st.integers(0, 2**31))
def test_rho_matches_symmetric_whitening(seed):
    cov = _random_cov(np.random.default_rng(seed), 6, 6)
    k = _inv_sqrtm(cov.sff) @ cov.sfp @ _inv_sqrtm(cov.spp)
    s = np.linalg.svd(k, compute_uv=False)
    np.testing.assert_allclose(cca(cov, 6).rho, s, atol=1e-10)


def test_rho_matches_symmetric_whitening_on_benchmark(bench_cov):
    # noise-free displacement data leaves the autocovariances with condition
    # numbers near 1e10, so two whitening routes only agree to about eps * cond
    k = _inv_sqrtm(bench_cov.sff) @ bench_cov.sfp @ _inv_sqrtm(bench_cov.spp)
    s = np.linalg.svd(k, compute_uv=False)
    np.testing.assert_allclose(cca(bench_cov, 30).rho, s, atol=1e-6)


def test_perfect_correlation(rng):
    s = random_spd(rng, 4)
    res = cca(CovarianceSet(spp=s, sfp=s, sff=s), 4)
    np.testing.assert_allclose(res.rho, 1.0, atol=1e-10)


def test_independence(rng):
    res = cca(CovarianceSet(spp=random_spd(rng, 3), sfp=np.zeros((3, 3)), sff=random_spd(rng, 3)), 3)
    np.testing.assert_allclose(res.rho, 0.0, atol=1e-12)


def test_cca_invariants(bench_cov):
    res = cca(bench_cov, 8)
    np.testing.assert_allclose(res.v1.T @ res.v1, np.eye(8), atol=1e-10)
    np.testing.assert_allclose(res.v2.T @ res.v2, np.eye(8), atol=1e-10)
    assert np.all(np.diff(res.rho) <= 0)
    assert np.all((res.rho >= 0) & (res.rho <= 1 + 1e-10))
    # sign convention: largest-magnitude entry of every v1 column is positive
    idx = np.argmax(np.abs(res.v1), axis=0)
    assert np.all(res.v1[idx, np.arange(8)] > 0)


@given(st.integers(0, 2**31))
def test_rho_invariant_under_per_half_transforms(seed):
    rng = np.random.default_rng(seed)
    cov = _random_cov(rng, 3, 3)
    t1 = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    t2 = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    moved = CovarianceSet(spp=t2 @ cov.spp @ t2.T, sfp=t1 @ cov.sfp @ t2.T, sff=t1 @ cov.sff @ t1.T)
    np.testing.assert_allclose(cca(moved, 3).rho, cca(cov, 3).rho, atol=1e-8)


def test_rank_deficiency_named():
    v = np.array([[1.0], [2.0], [0.5]])
    low_rank = v @ v.T
    cov = CovarianceSet(spp=np.eye(3), sfp=np.zeros((3, 3)), sff=low_rank)
    with pytest.raises(RankDeficiencyError, match="rank 1"):
        cca(cov, 2)
    with pytest.raises(RankDeficiencyError):
        cca(CovarianceSet(spp=np.eye(2), sfp=np.zeros((3, 2)), sff=np.eye(3)), 3)


def test_zero_order_rejected(bench_cov):
    with pytest.raises(ValueError):
        cca(bench_cov, 0)
    with pytest.raises(ValueError):
        cca(bench_cov, 4).truncate(0)


def test_full_rank_reconstructs_cross_covariance(bench_cov):
    sp = subspaces(cca(bench_cov, 30), bench_cov)
    err = np.linalg.norm(sp.observability @ sp.controllability - bench_cov.sfp)
    assert err / np.linalg.norm(bench_cov.sfp) < 1e-8


@pytest.mark.parametrize("d", [2, 6, 12])
def test_truncation_error_is_discarded_energy(bench_cov, d):
    full = cca(bench_cov, 30)
    sp = subspaces(full.truncate(d), bench_cov)
    resid = bench_cov.sfp - sp.observability @ sp.controllability
    # map the residual back to whitened coordinates, where Eckart-Young applies
    w = la.solve_triangular(full.sqrt_ff, resid, lower=True)
    w = la.solve_triangular(full.sqrt_pp, w.T, lower=True).T
    np.testing.assert_allclose(np.linalg.norm(w), np.sqrt(np.sum(full.rho[d:] ** 2)), rtol=1e-6)


def test_pcca_identity_rotation_equals_subspaces(bench_cov):
    res = cca(bench_cov, 6)
    sp = subspaces(res, bench_cov)
    model = pcca_mle(bench_cov, 6)
    scale = np.abs(sp.observability).max()
    assert np.abs(model.w1 - sp.observability).max() < 1e-12 * scale
    assert np.abs(model.w2.T - sp.controllability).max() < 1e-12 * np.abs(sp.controllability).max()
    assert np.all(model.mu == 0)


@given(st.integers(0, 2**31))
def test_rotation_keeps_column_space(seed):
    from scipy.stats import ortho_group

    cov = _random_cov(np.random.default_rng(seed), 5, 4)
    r = ortho_group.rvs(3, random_state=seed % (2**32 - 1))
    a = pcca_mle(cov, 3)
    b = pcca_mle(cov, 3, rotation=r)
    assert principal_angles(a.w1, b.w1).max() < 1e-10
    assert principal_angles(a.w2, b.w2).max() < 1e-10


def test_pcca_noise_blocks(bench_cov):
    model = pcca_mle(bench_cov, 6)
    s11 = model.sigma[:30, :30]
    np.testing.assert_allclose(s11 + model.w1 @ model.w1.T, bench_cov.sff, atol=1e-14)
    assert not model.sigma[:30, 30:].any()
    assert np.linalg.eigvalsh(s11).min() > -1e-12


def test_non_orthogonal_rotation_rejected(bench_cov):
    with pytest.raises(ValueError, match="orthogonal"):
        pcca_mle(bench_cov, 2, rotation=np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_singular_value_gap():
    assert singular_value_gap(np.array([0.99, 0.98, 0.97, 0.2, 0.19])) == 3
    assert singular_value_gap(np.array([0.5])) == 1
