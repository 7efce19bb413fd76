"""State-space realisation from an observability matrix and modal extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import IdentificationError

log = logging.getLogger(__name__)


@dataclass
class StateSpaceEstimate:
    a_d: np.ndarray
    c_out: np.ndarray
    dt: float

    @property
    def order(self) -> int:
        return self.a_d.shape[0]

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        n = self.a_d.shape[0]
        if self.a_d.shape != (n, n) or self.c_out.shape[1] != n:
            raise ValueError(
                f"inconsistent dimensions: a_d {self.a_d.shape}, c_out {self.c_out.shape}"
            )


@dataclass
class ModalSet:
    """Modal parameters found at one model order.

    ``mode_shapes`` holds one column per pole. ``spurious`` marks poles that
    came from real eigenvalues (no conjugate partner).
    """

    frequencies: np.ndarray
    damping_ratios: np.ndarray
    mode_shapes: np.ndarray
    order: int
    spurious: np.ndarray = field(default=None)

    def __post_init__(self):
        self.frequencies = np.asarray(self.frequencies, dtype=float).reshape(-1)
        self.damping_ratios = np.asarray(self.damping_ratios, dtype=float).reshape(-1)
        m = self.frequencies.size
        self.mode_shapes = np.asarray(self.mode_shapes, dtype=float)
        if self.mode_shapes.ndim == 1:
            self.mode_shapes = self.mode_shapes.reshape(-1, m) if m else np.zeros((0, 0))
        if self.spurious is None:
            self.spurious = np.zeros(m, dtype=bool)
        self.spurious = np.asarray(self.spurious, dtype=bool).reshape(-1)
        if self.damping_ratios.size != m or self.spurious.size != m:
            raise ValueError("frequency, damping and spurious lists differ in length")
        if m and self.mode_shapes.shape[1] != m:
            raise ValueError(
                f"mode_shapes has {self.mode_shapes.shape[1]} columns for {m} poles"
            )

    def __len__(self):
        return self.frequencies.size

    @classmethod
    def empty(cls, order: int, nchannels: int = 0) -> "ModalSet":
        return cls(np.zeros(0), np.zeros(0), np.zeros((nchannels, 0)), order)

    def to_dict(self) -> dict:
        poles = []
        for k in range(len(self)):
            pole = {
                "freq_hz": float(self.frequencies[k]),
                "zeta": float(self.damping_ratios[k]),
                "shape": [float(v) for v in self.mode_shapes[:, k]],
            }
            if self.spurious[k]:
                pole["spurious"] = True
            poles.append(pole)
        return {"order": int(self.order), "poles": poles}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModalSet":
        poles = obj.get("poles", [])
        if not poles:
            return cls.empty(int(obj["order"]))
        shapes = np.array([p["shape"] for p in poles], dtype=float).T
        return cls(
            np.array([p["freq_hz"] for p in poles]),
            np.array([p["zeta"] for p in poles]),
            shapes,
            int(obj["order"]),
            np.array([bool(p.get("spurious", False)) for p in poles]),
        )


def system_matrices(obs: np.ndarray, l: int, dt: float) -> StateSpaceEstimate:
    """Recover (A, C) from an extended observability matrix by shift invariance.

    ``obs`` is (l*j) x d with block rows [C; CA; CA^2; ...]. Needs j >= 2.
    """
    obs = np.asarray(obs, dtype=float)
    rows, d = obs.shape
    if rows % l:
        raise ValueError(f"observability rows {rows} not a multiple of l={l}")
    if rows // l < 2:
        raise ValueError("need at least two block rows (j >= 2) for shift invariance")
    upper = obs[:-l]
    lower = obs[l:]
    rank = np.linalg.matrix_rank(upper)
    if rank < d:
        raise IdentificationError(
            f"shifted observability has rank {rank} < order {d}; cannot form A"
        )
    a_d = np.linalg.pinv(upper) @ lower
    return StateSpaceEstimate(a_d=a_d, c_out=obs[:l].copy(), dt=dt)


def _normalise_phase(shapes: np.ndarray) -> np.ndarray:
    # rotate each complex shape so its largest component is real positive
    if shapes.size == 0:
        return shapes
    idx = np.argmax(np.abs(shapes), axis=0)
    ref = shapes[idx, np.arange(shapes.shape[1])]
    ref = np.where(np.abs(ref) > 0, ref, 1.0)
    return shapes * (np.abs(ref) / ref)


def poles_to_modal(
    mu: np.ndarray, shapes: np.ndarray, dt: float, order: int
) -> ModalSet:
    """Convert continuous-time-scaled poles ``mu`` (= log of discrete poles) to a ModalSet.

    Conjugate pairs are merged (only Im(mu) > 0 kept); real poles are kept
    and flagged spurious.
    """
    mu = np.asarray(mu, dtype=complex)
    tol = 1e-12
    keep = (mu.imag > tol) | (np.abs(mu.imag) <= tol)
    mu, shapes = mu[keep], shapes[:, keep]
    absmu = np.abs(mu)
    freqs = absmu / dt / (2 * np.pi)
    zeta = -mu.real / absmu
    spurious = np.abs(mu.imag) <= tol
    phi = np.real(_normalise_phase(shapes))
    norms = np.linalg.norm(phi, axis=0)
    phi = phi / np.where(norms > 0, norms, 1.0)
    order_idx = np.argsort(freqs, kind="stable")
    return ModalSet(
        freqs[order_idx],
        zeta[order_idx],
        phi[:, order_idx],
        order,
        spurious[order_idx],
    )


def modal_properties(est: StateSpaceEstimate) -> ModalSet:
    lam, psi = la.eig(est.a_d)
    # defective A shows up as a near-singular eigenvector matrix
    if np.linalg.cond(psi) > 1e12:
        raise IdentificationError("state matrix is defective (eigenvectors not independent)")
    zero = np.abs(lam) < 1e-300
    if zero.any():
        log.warning("skipping %d pole(s) at the origin", int(zero.sum()))
    lam, psi = lam[~zero], psi[:, ~zero]
    mu = np.log(lam.astype(complex))
    # mu == 0 carries no frequency or damping information
    degenerate = np.abs(mu) < 1e-14
    if degenerate.any():
        log.warning("skipping %d pole(s) with log(lambda) = 0", int(degenerate.sum()))
        mu, psi = mu[~degenerate], psi[:, ~degenerate]
    shapes = est.c_out @ psi
    return poles_to_modal(mu, shapes, est.dt, est.order)
