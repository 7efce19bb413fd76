"""Classical CCA between future and past, and the closed-form PCCA solution."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as la

from .errors import RankDeficiencyError
from .hankel import CovarianceSet, cholesky_sqrt


@dataclass
class CcaResult:
    v1: np.ndarray
    v2: np.ndarray
    rho: np.ndarray
    # Cholesky factors used for whitening, kept so later steps share them
    sqrt_ff: np.ndarray
    sqrt_pp: np.ndarray

    @property
    def d(self) -> int:
        return self.rho.size

    def truncate(self, d: int) -> "CcaResult":
        if not 1 <= d <= self.d:
            raise ValueError(f"cannot truncate {self.d} canonical pairs to {d}")
        return CcaResult(self.v1[:, :d], self.v2[:, :d], self.rho[:d], self.sqrt_ff, self.sqrt_pp)


@dataclass
class SubspacePair:
    observability: np.ndarray
    controllability: np.ndarray


@dataclass
class ProjectionModel:
    w1: np.ndarray
    w2: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    @property
    def d(self) -> int:
        return self.w1.shape[1]

    @property
    def w(self) -> np.ndarray:
        return np.vstack([self.w1, self.w2])


def _numerical_rank(m: np.ndarray) -> int:
    s = np.linalg.svd(m, compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * max(m.shape) * np.finfo(float).eps))


def fix_signs(v1: np.ndarray, v2: Optional[np.ndarray] = None):
    """Flip column pairs so the largest-magnitude entry of each ``v1`` column is positive."""
    idx = np.argmax(np.abs(v1), axis=0)
    s = np.sign(v1[idx, np.arange(v1.shape[1])])
    s[s == 0] = 1.0
    if v2 is None:
        return v1 * s
    return v1 * s, v2 * s


def cca(cov: CovarianceSet, d: int) -> CcaResult:
    """Top-``d`` canonical correlations of future vs past via a whitened SVD.

    Whitening uses lower Cholesky factors: K = Lf^-1 Sfp Lp^-T = V1 diag(rho) V2^T.
    """
    dim_f, dim_p = cov.sff.shape[0], cov.spp.shape[0]
    if d < 1:
        raise ValueError("model order d must be at least 1")
    if d > min(dim_f, dim_p):
        raise RankDeficiencyError(min(dim_f, dim_p), d, "cross-covariance")
    for name, m in (("future auto-covariance", cov.sff), ("past auto-covariance", cov.spp)):
        r = _numerical_rank(m)
        if r < d:
            raise RankDeficiencyError(r, d, name)
    lf = cholesky_sqrt(cov.sff)
    lp = cholesky_sqrt(cov.spp)
    k = la.solve_triangular(lf, cov.sfp, lower=True)
    k = la.solve_triangular(lp, k.T, lower=True).T
    u, s, vt = np.linalg.svd(k)
    v1, v2 = fix_signs(u[:, :d], vt[:d].T)
    return CcaResult(v1=v1, v2=v2, rho=s[:d], sqrt_ff=lf, sqrt_pp=lp)


def subspaces(res: CcaResult, cov: CovarianceSet = None) -> SubspacePair:
    """Observability Lf V1 P^1/2 and controllability P^1/2 V2^T Lp^T."""
    if res.d < 1:
        raise ValueError("model order must be at least 1")
    root = np.sqrt(res.rho)
    obs = res.sqrt_ff @ (res.v1 * root)
    ctrl = (res.v2 * root).T @ res.sqrt_pp.T
    return SubspacePair(observability=obs, controllability=ctrl)


def _check_rotation(r: np.ndarray, d: int) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if r.shape != (d, d):
        raise ValueError(f"rotation must be {d}x{d}, got {r.shape}")
    if not np.allclose(r.T @ r, np.eye(d), atol=1e-10):
        raise ValueError("rotation matrix is not orthogonal")
    return r


def pcca_mle(cov: CovarianceSet, d: int, rotation: Optional[np.ndarray] = None,
             res: Optional[CcaResult] = None) -> ProjectionModel:
    """Maximum-likelihood PCCA weights built from the CCA solution.

    ``w1`` (future half) equals the observability matrix and ``w2`` the
    transposed controllability matrix when ``rotation`` is the identity.
    """
    res = cca(cov, d) if res is None else res.truncate(d)
    r = np.eye(d) if rotation is None else _check_rotation(rotation, d)
    root = np.sqrt(res.rho)
    w1 = res.sqrt_ff @ (res.v1 * root) @ r
    w2 = res.sqrt_pp @ (res.v2 * root) @ r
    d1, d2 = w1.shape[0], w2.shape[0]
    sigma = np.zeros((d1 + d2, d1 + d2))
    sigma[:d1, :d1] = cov.sff - w1 @ w1.T
    sigma[d1:, d1:] = cov.spp - w2 @ w2.T
    return ProjectionModel(w1=w1, w2=w2, mu=np.zeros(d1 + d2), sigma=sigma)


def singular_value_gap(rho: np.ndarray) -> int:
    """Order suggested by the largest ratio between consecutive canonical correlations."""
    rho = np.asarray(rho, dtype=float)
    if rho.size < 2:
        return int(rho.size)
    tiny = np.finfo(float).tiny
    ratios = rho[:-1] / np.maximum(rho[1:], tiny)
    return int(np.argmax(ratios)) + 1
