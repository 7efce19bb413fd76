"""Robust probabilistic CCA with Student-t noise, fitted by EM.

Generative model, with x = [x1; x2] stacked over the two views:

    u_n ~ Gamma(nu/2, nu/2)
    z_n | u_n ~ N(0, I_d / u_n)
    x_n | z_n, u_n ~ N(W z_n + mu, Sigma / u_n)

Sigma is block diagonal with one full block per view.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
import scipy.linalg as la
from scipy import optimize, special, stats

from .errors import IdentificationError
from .hankel import CovarianceSet, cholesky_sqrt
from .projections import fix_signs, pcca_mle

log = logging.getLogger(__name__)


@dataclass
class RobustModel:
    w: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    nu: float
    split: int
    converged: bool = False
    n_iter: int = 0
    trace: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        D, d = self.w.shape
        if self.sigma.shape != (D, D) or self.mu.shape != (D,):
            raise ValueError("inconsistent RobustModel dimensions")
        if not 0 < self.split < D:
            raise ValueError(f"split {self.split} must lie strictly inside (0, {D})")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")

    @property
    def d(self) -> int:
        return self.w.shape[1]

    @property
    def dim(self) -> int:
        return self.w.shape[0]

    @property
    def w1(self) -> np.ndarray:
        return self.w[:self.split]

    @property
    def w2(self) -> np.ndarray:
        return self.w[self.split:]

    @property
    def sigma11(self) -> np.ndarray:
        return self.sigma[:self.split, :self.split]

    @property
    def sigma22(self) -> np.ndarray:
        return self.sigma[self.split:, self.split:]

    def blocks(self):
        s = self.split
        return ((slice(0, s), self.sigma[:s, :s]), (slice(s, self.dim), self.sigma[s:, s:]))


@dataclass
class EStepStats:
    """Posterior expectations from one E-step.

    ``s_bar`` (E[u z z^T] per sample) is materialised on demand; the M-step only
    needs its sum, which is n B^-1 + sum_n u_n z_n z_n^T.
    """

    u_bar: np.ndarray
    log_u_tilde: np.ndarray
    z_bar: np.ndarray
    b_inv: np.ndarray
    delta: np.ndarray

    @property
    def n(self) -> int:
        return self.u_bar.size

    @property
    def s_bar(self) -> np.ndarray:
        zz = np.einsum("in,jn->nij", self.z_bar, self.z_bar)
        return self.b_inv[None] + self.u_bar[:, None, None] * zz

    def s_sum(self) -> np.ndarray:
        return self.n * self.b_inv + (self.z_bar * self.u_bar) @ self.z_bar.T


@dataclass
class EmConfig:
    max_iters: int = 500
    rel_tol: float = 1e-8
    nu_bounds: tuple = (1e-3, 1e3)
    nu_init: float = 5.0
    learn_nu: bool = True
    init: str = "cca-perturbed"
    perturbation_std: float = 1e-2
    seed: int = 0
    # weight W S_n W^T by u_n a second time in the Sigma update (printed form; breaks monotonicity)
    extra_sigma_weight: bool = False
    # solve the nu equation with 2*digamma as printed instead of the exact derivative
    printed_nu_equation: bool = False

    def __post_init__(self):
        lo, hi = self.nu_bounds
        if not 0 < lo < hi:
            raise ValueError(f"nu_bounds must satisfy 0 < lo < hi, got {self.nu_bounds}")
        if self.rel_tol <= 0:
            raise ValueError("rel_tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be positive")
        if self.init not in ("cca-perturbed", "random"):
            raise ValueError(f"unknown init {self.init!r}")
        if self.perturbation_std < 0:
            raise ValueError("perturbation_std must be non-negative")


def _block_precision(model: RobustModel):
    """Per-block inverse of Sigma and its log-determinant."""
    blocks = []
    logdet = 0.0
    for sl, blk in model.blocks():
        try:
            low = cholesky_sqrt(blk)
        except np.linalg.LinAlgError:
            raise IdentificationError(
                f"noise covariance block {sl.start}:{sl.stop} is not positive definite"
            ) from None
        inv = la.cho_solve((low, True), np.eye(low.shape[0]))
        blocks.append((sl, (inv + inv.T) / 2))
        logdet += 2 * np.sum(np.log(np.diag(low)))
    return blocks, float(logdet)


def _sigma_solve(blocks, r: np.ndarray) -> np.ndarray:
    out = np.empty_like(r)
    for sl, inv in blocks:
        out[sl] = inv @ r[sl]
    return out


def e_step(model: RobustModel, x: np.ndarray) -> EStepStats:
    """Posterior moments of (u_n, z_n) for every column of ``x``.

    Uses the Woodbury form of A^-1 = (Sigma + W W^T)^-1 so only d x d systems
    are solved beyond the per-block Sigma factorisations.
    """
    x = np.asarray(x, dtype=float)
    D, n = x.shape
    if D != model.dim:
        raise ValueError(f"data dimension {D} does not match model dimension {model.dim}")
    if n < 1:
        raise ValueError("need at least one sample")
    blocks, _ = _block_precision(model)
    r = x - model.mu[:, None]
    sr = _sigma_solve(blocks, r)
    sw = _sigma_solve(blocks, model.w)
    b = model.w.T @ sw + np.eye(model.d)
    try:
        b_chol = la.cho_factor(b, lower=True)
    except la.LinAlgError:
        raise IdentificationError("B = W^T Sigma^-1 W + I is not positive definite") from None
    q = model.w.T @ sr
    z_bar = la.cho_solve(b_chol, q)
    delta = np.einsum("ij,ij->j", r, sr) - np.einsum("ij,ij->j", q, z_bar)
    delta = np.maximum(delta, 0.0)
    nu = model.nu
    u_bar = (D + nu) / (delta + nu)
    log_u_tilde = special.digamma((D + nu) / 2) - np.log((delta + nu) / 2)
    b_inv = la.cho_solve(b_chol, np.eye(model.d))
    return EStepStats(u_bar=u_bar, log_u_tilde=log_u_tilde, z_bar=z_bar,
                      b_inv=(b_inv + b_inv.T) / 2, delta=delta)


def nu_equation(nu: float, stats: EStepStats, printed: bool = False) -> float:
    """Stationarity condition of the expected log-likelihood in nu.

    Exact form: 1 + ln(nu/2) - psi(nu/2) + mean(ln u~ - u_bar). ``printed``
    switches to the variant with a doubled digamma term.
    """
    c = float(np.mean(stats.log_u_tilde - stats.u_bar))
    k = 2.0 if printed else 1.0
    return 1.0 + np.log(nu / 2) - k * special.digamma(nu / 2) + c


def solve_nu(stats: EStepStats, bounds=(1e-3, 1e3), printed: bool = False,
             widen: bool = True) -> float:
    """Root of the nu equation inside ``bounds`` (widened 10x once if unbracketed)."""
    lo, hi = bounds
    g = lambda v: nu_equation(v, stats, printed)  # noqa: E731
    glo, ghi = g(lo), g(hi)
    if np.sign(glo) == np.sign(ghi) and not widen:
        raise IdentificationError(
            f"nu equation not bracketed on [{lo:g}, {hi:g}]: g(lo)={glo:.6g}, g(hi)={ghi:.6g}"
        )
    if np.sign(glo) == np.sign(ghi):
        lo, hi = lo / 10, hi * 10
        glo, ghi = g(lo), g(hi)
        if np.sign(glo) == np.sign(ghi):
            raise IdentificationError(
                f"nu equation not bracketed on [{lo:g}, {hi:g}]: g(lo)={glo:.6g}, g(hi)={ghi:.6g}"
            )
    if glo == 0:
        return lo
    if ghi == 0:
        return hi
    root = optimize.brentq(g, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(root)


def _update_nu(stats: EStepStats, config: EmConfig, current: float) -> float:
    if not config.learn_nu:
        return current
    try:
        return solve_nu(stats, config.nu_bounds, config.printed_nu_equation, widen=False)
    except IdentificationError:
        # g keeps one sign on the bounds, so the constrained maximiser sits on one of them
        lo, hi = config.nu_bounds
        return hi if nu_equation(hi, stats, config.printed_nu_equation) > 0 else lo


def m_step(x: np.ndarray, stats: EStepStats, old: RobustModel,
           config: Optional[EmConfig] = None) -> RobustModel:
    """Conditional-maximisation updates: W given old mu, mu given new W, Sigma given both, then nu."""
    config = config or EmConfig()
    x = np.asarray(x, dtype=float)
    n = x.shape[1]
    u = stats.u_bar
    s_sum = stats.s_sum()
    try:
        s_chol = la.cho_factor(s_sum, lower=True)
    except la.LinAlgError:
        raise IdentificationError("sum of E[u z z^T] is singular; cannot update W") from None

    r = x - old.mu[:, None]
    uz = stats.z_bar * u
    w = la.cho_solve(s_chol, (r @ uz.T).T).T

    wz = w @ stats.z_bar
    mu = (x - wz) @ u / u.sum()

    r = x - mu[:, None]
    ru = r * u
    sigma = np.zeros_like(old.sigma)
    extra = config.extra_sigma_weight
    for sl, _ in old.blocks():
        ws = w[sl]
        cross = ru[sl] @ stats.z_bar.T @ ws.T
        if extra:
            zzu = (stats.z_bar * u ** 2) @ stats.z_bar.T + u.sum() * stats.b_inv
            latent = ws @ zzu @ ws.T
        else:
            latent = ws @ s_sum @ ws.T
        blk = ru[sl] @ r[sl].T - cross - cross.T + latent
        sigma[sl, sl] = (blk + blk.T) / (2 * n)

    nu = _update_nu(stats, config, old.nu)
    return replace(old, w=w, mu=mu, sigma=sigma, nu=nu, trace=old.trace)


def q_function(model: RobustModel, x: np.ndarray, stats: EStepStats) -> float:
    """Per-sample expected complete-data log-likelihood at ``model`` under ``stats``.

    Includes every term of ln p(x, z, u): Gamma prior on u, the latent Gaussian
    (which contributes (d/2) ln u) and the observation Gaussian ((D/2) ln u).
    """
    x = np.asarray(x, dtype=float)
    D, n = x.shape
    d = model.d
    nu = model.nu
    blocks, logdet = _block_precision(model)
    r = x - model.mu[:, None]
    sr = _sigma_solve(blocks, r)
    sw = _sigma_solve(blocks, model.w)
    u, lu, z = stats.u_bar, stats.log_u_tilde, stats.z_bar

    quad = np.einsum("ij,ij->j", r, sr)
    cross = np.einsum("ij,ij->j", model.w.T @ sr, z)
    s_sum = stats.s_sum()
    wsw = model.w.T @ sw
    resid = u @ quad - 2 * (u @ cross) + np.sum(wsw * s_sum)
    tr_s = np.trace(s_sum)

    terms = {
        "normalisers": -0.5 * (D + d) * np.log(2 * np.pi) * n,
        "log_u": (0.5 * (D + d) + 0.5 * nu - 1.0) * lu.sum(),
        "latent": -0.5 * tr_s,
        "gamma": n * (0.5 * nu * np.log(nu / 2) - special.gammaln(nu / 2)) - 0.5 * nu * u.sum(),
        "logdet": -0.5 * n * logdet,
        "residual": -0.5 * resid,
    }
    for name, val in terms.items():
        if not np.isfinite(val):
            raise IdentificationError(f"Q-function term {name!r} is not finite")
    return float(sum(terms.values()) / n)


def log_likelihood(model: RobustModel, x: np.ndarray) -> float:
    """Mean marginal log-density: x ~ Student-t(mu, Sigma + W W^T, nu)."""
    x = np.asarray(x, dtype=float)
    D, n = x.shape
    a = model.sigma + model.w @ model.w.T
    return float(np.mean(stats.multivariate_t.logpdf(x.T, loc=model.mu, shape=a, df=model.nu)))


def _sample_covariance(x: np.ndarray) -> np.ndarray:
    r = x - x.mean(axis=1, keepdims=True)
    return r @ r.T / x.shape[1]


def _cov_set(x: np.ndarray, split: int) -> CovarianceSet:
    s = _sample_covariance(x)
    return CovarianceSet(spp=s[split:, split:], sfp=s[:split, split:], sff=s[:split, :split])


def initial_model(x: np.ndarray, d: int, split: int, config: EmConfig,
                  init_from: Optional[CovarianceSet] = None) -> RobustModel:
    """Starting point: perturbed PCCA solution (or random W), inverse-Wishart Sigma blocks."""
    D = x.shape[0]
    rng = np.random.default_rng(config.seed)
    if config.init == "cca-perturbed":
        cov = init_from if init_from is not None else _cov_set(x, split)
        mle = pcca_mle(cov, d)
        w = mle.w + config.perturbation_std * rng.standard_normal((D, d))
    else:
        w = rng.standard_normal((D, d)) * np.sqrt(np.mean(np.var(x, axis=1)))
    sigma = np.zeros((D, D))
    for sl in (slice(0, split), slice(split, D)):
        p = sl.stop - sl.start
        draw = stats.invwishart.rvs(df=D + 2, scale=np.eye(p), random_state=rng)
        sigma[sl, sl] = np.atleast_2d(draw)
    return RobustModel(w=w, mu=x.mean(axis=1), sigma=sigma, nu=config.nu_init, split=split)


def fit(x: np.ndarray, d: int, split: int, config: Optional[EmConfig] = None,
        init_from: Optional[CovarianceSet] = None, model: Optional[RobustModel] = None) -> RobustModel:
    """Fit robust PCCA to the columns of ``x`` (first ``split`` rows form view 1).

    Stops when the relative change of the monitored Q value drops below
    ``config.rel_tol`` or after ``config.max_iters`` iterations; in the latter
    case the returned model has ``converged=False``. Each trace row is
    (iteration, Q before M-step, Q after M-step, nu, max |dW|).
    """
    config = config or EmConfig()
    x = np.asarray(x, dtype=float)
    D = x.shape[0]
    if not 1 <= d <= min(split, D - split):
        raise ValueError(f"latent dimension {d} must lie in [1, {min(split, D - split)}]")
    if model is None:
        model = initial_model(x, d, split, config, init_from)
    trace = []
    prev_q = None
    converged = False
    it = 0
    for it in range(1, config.max_iters + 1):
        st = e_step(model, x)
        q_old = q_function(model, x, st)
        new = m_step(x, st, model, config)
        q_new = q_function(new, x, st)
        dw = float(np.max(np.abs(new.w - model.w)))
        trace.append((it, q_old, q_new, new.nu, dw))
        model = new
        if prev_q is not None and abs(q_new - prev_q) <= config.rel_tol * abs(prev_q):
            converged = True
            break
        prev_q = q_new
    if not converged:
        log.info("robust PCCA stopped after %d iterations without converging", it)
    return replace(model, converged=converged, n_iter=it, trace=trace)


@dataclass
class CanonicalDirections:
    u1: np.ndarray
    u2: np.ndarray
    rho: np.ndarray
    r1: np.ndarray
    r2: np.ndarray
    # eigenvalues of J1 and J2, descending; equal in exact arithmetic
    eig_j1: np.ndarray = None
    eig_j2: np.ndarray = None


def _sym_power(m: np.ndarray, p: float) -> np.ndarray:
    vals, vecs = la.eigh((m + m.T) / 2)
    return (vecs * vals ** p) @ vecs.T


def recover_rotation(model: RobustModel) -> CanonicalDirections:
    """Canonical directions and correlations implied by a fitted model.

    With G_m = I - B_m^-1, R1 and R2 are the eigenvectors of
    G1^1/2 G2 G1^1/2 and G2^1/2 G1 G2^1/2; both share the eigenvalues rho^2.
    """
    d = model.d
    eye = np.eye(d)
    w1, w2 = model.w1, model.w2
    s11, s22 = cholesky_sqrt(model.sigma11), cholesky_sqrt(model.sigma22)
    s11w1 = la.cho_solve((s11, True), w1)
    s22w2 = la.cho_solve((s22, True), w2)
    g = []
    for w, sw in ((w1, s11w1), (w2, s22w2)):
        b = w.T @ sw + eye
        gm = eye - la.inv(b)
        gm = (gm + gm.T) / 2
        if np.linalg.eigvalsh(gm).min() <= 0:
            raise IdentificationError("I - B^-1 is not positive definite: degenerate latent dimension")
        g.append(gm)
    g1h, g2h = _sym_power(g[0], 0.5), _sym_power(g[1], 0.5)
    j1 = g1h @ g[1] @ g1h
    j2 = g2h @ g[0] @ g2h
    e1, r1 = la.eigh((j1 + j1.T) / 2)
    e2, r2 = la.eigh((j2 + j2.T) / 2)
    e1, r1 = e1[::-1], r1[:, ::-1]
    e2, r2 = e2[::-1], r2[:, ::-1]
    u1 = s11w1 @ _sym_power(g[0], -0.5) @ r1
    u2 = s22w2 @ _sym_power(g[1], -0.5) @ r2
    u1, r1 = fix_signs(u1, r1)
    # pair signs so each canonical pair correlates positively under the model
    pair = np.sign(np.einsum("ki,ki->k", u1.T @ w1, u2.T @ w2))
    pair[pair == 0] = 1.0
    u2, r2 = u2 * pair, r2 * pair
    rho = np.sqrt(np.clip(e1, 0.0, None))
    return CanonicalDirections(u1=u1, u2=u2, rho=rho, r1=r1, r2=r2, eig_j1=e1, eig_j2=e2)


def canonical_observability(model: RobustModel, directions: Optional[CanonicalDirections] = None) -> np.ndarray:
    """View-1 weights rotated onto the canonical basis, i.e. W1 R1."""
    directions = directions or recover_rotation(model)
    return model.w1 @ directions.r1
