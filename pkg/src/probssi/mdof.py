"""Linear MDOF response simulation and outlier injection."""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as la

from .modal import ModalSet, _normalise_phase

log = logging.getLogger(__name__)

# broadband forcing amplitude is "of order 1e-2" with unit standard deviation
FORCING_SCALE = 1e-2

OUTLIER_KINDS = ("random-dropout", "periodic-block", "clipping", "zero-block")


@dataclass
class MdofSystem:
    mass_matrix: np.ndarray
    stiffness_matrix: np.ndarray
    damping_matrix: np.ndarray

    def __post_init__(self):
        self.mass_matrix = np.atleast_2d(np.asarray(self.mass_matrix, dtype=float))
        self.stiffness_matrix = np.atleast_2d(np.asarray(self.stiffness_matrix, dtype=float))
        self.damping_matrix = np.atleast_2d(np.asarray(self.damping_matrix, dtype=float))
        n = self.mass_matrix.shape[0]
        for name in ("mass_matrix", "stiffness_matrix", "damping_matrix"):
            m = getattr(self, name)
            if m.shape != (n, n):
                raise ValueError(f"{name} has shape {m.shape}, expected ({n}, {n})")
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} is not symmetric")
        try:
            np.linalg.cholesky(self.mass_matrix)
        except np.linalg.LinAlgError:
            raise ValueError("mass matrix is not positive definite") from None

    @property
    def ndof(self) -> int:
        return self.mass_matrix.shape[0]

    def state_matrices(self):
        """Continuous first-order form x' = A x + B f with x = [q; q']."""
        n = self.ndof
        minv = np.linalg.inv(self.mass_matrix)
        a = np.block(
            [
                [np.zeros((n, n)), np.eye(n)],
                [-minv @ self.stiffness_matrix, -minv @ self.damping_matrix],
            ]
        )
        b = np.vstack([np.zeros((n, n)), minv])
        return a, b


def benchmark_3dof(k: float = 1e4, m: float = 10.0, damping_factor: float = 1e-4) -> MdofSystem:
    """Three-mass chain used throughout the benchmark studies (C = K * 1e-4)."""
    mass = m * np.eye(3)
    stiff = k * np.array([[2.0, -1.0, 0.0], [-1.0, 4.0, -0.5], [0.0, -0.5, 1.0]])
    return MdofSystem(mass, stiff, damping_factor * stiff)


@dataclass
class SimulationConfig:
    sample_rate: float = 1000.0
    num_samples: int = 8192
    forcing_std: float = 1.0
    seed: int = 0
    output: str = "displacement"
    burn_in: int = 0

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.num_samples < 2:
            raise ValueError("num_samples must be at least 2")
        if self.output not in ("displacement", "acceleration"):
            raise ValueError(f"unknown output quantity {self.output!r}")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate


@dataclass
class MultiChannelRecord:
    """Channel-major l x N samples at interval ``dt``."""

    data: np.ndarray
    dt: float
    channel_labels: list = field(default=None)
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        self.data = np.atleast_2d(np.asarray(self.data, dtype=float))
        l, n = self.data.shape
        if l < 1 or n < 1:
            raise ValueError(f"record must have at least one channel and sample, got {self.data.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.channel_labels is None:
            self.channel_labels = [f"ch{c}" for c in range(l)]
        if len(self.channel_labels) != l:
            raise ValueError("one label per channel required")
        if self.mask is None and not np.all(np.isfinite(self.data)):
            raise ValueError("record contains non-finite samples")

    @property
    def nchannels(self) -> int:
        return self.data.shape[0]

    @property
    def nsamples(self) -> int:
        return self.data.shape[1]

    @property
    def duration(self) -> float:
        return self.nsamples * self.dt


def ground_truth_modal(system: MdofSystem) -> ModalSet:
    """Modal parameters from the continuous state matrix, one entry per DOF."""
    if abs(np.linalg.det(system.mass_matrix)) == 0:
        raise ValueError("singular mass matrix")
    a, _ = system.state_matrices()
    lam, psi = la.eig(a)
    n = system.ndof
    upper = lam.imag >= 0
    lam, psi = lam[upper], psi[:n, upper]
    if lam.size > n:
        # overdamped/undamped degenerate cases: keep the n lowest
        keep = np.argsort(np.abs(lam))[:n]
        lam, psi = lam[keep], psi[:, keep]
    wn = np.abs(lam)
    zeta = np.where(wn > 0, -lam.real / np.where(wn > 0, wn, 1.0), 0.0)
    shapes = _normalise_phase(psi).real
    shapes /= np.linalg.norm(shapes, axis=0)
    idx = np.argsort(wn, kind="stable")
    return ModalSet(wn[idx] / (2 * np.pi), zeta[idx], shapes[:, idx], order=2 * n)


def discretize(system: MdofSystem, dt: float):
    """Zero-order-hold discretisation, returns (A_d, B_d)."""
    a, b = system.state_matrices()
    ns, ni = b.shape
    aug = np.zeros((ns + ni, ns + ni))
    aug[:ns, :ns] = a
    aug[:ns, ns:] = b
    ex = la.expm(aug * dt)
    return ex[:ns, :ns], ex[:ns, ns:]


def simulate_response(system: MdofSystem, config: SimulationConfig) -> MultiChannelRecord:
    """Response to independent Gaussian white-noise forces on every DOF."""
    fmax = ground_truth_modal(system).frequencies.max()
    if config.sample_rate < 2 * fmax:
        warnings.warn(
            f"sample rate {config.sample_rate} Hz is below twice the highest natural "
            f"frequency ({fmax:.3g} Hz)",
            RuntimeWarning,
            stacklevel=2,
        )
    n = system.ndof
    dt = config.dt
    ad, bd = discretize(system, dt)
    total = config.num_samples + config.burn_in
    rng = np.random.default_rng(config.seed)
    force = rng.standard_normal((total, n)) * (config.forcing_std * FORCING_SCALE)

    states = np.empty((total, 2 * n))
    x = np.zeros(2 * n)
    adt, bdt = ad.T, bd.T
    for k in range(total):
        states[k] = x
        x = x @ adt + force[k] @ bdt

    if config.output == "displacement":
        y = states[:, :n]
    else:
        minv = np.linalg.inv(system.mass_matrix)
        y = (
            -states[:, :n] @ (minv @ system.stiffness_matrix).T
            - states[:, n:] @ (minv @ system.damping_matrix).T
            + force @ minv.T
        )
    y = y[config.burn_in:]
    return MultiChannelRecord(np.ascontiguousarray(y.T), dt, [f"dof{i + 1}" for i in range(n)])


@dataclass
class OutlierSpec:
    """Outlier pattern to inject.

    Values given as ``*_rel`` are fractions of each channel's clean peak
    magnitude; an explicit ``pinned_value`` / ``noise_std`` overrides them.
    """

    kind: str = "random-dropout"
    rate: float = 0.001
    pinned_value: Optional[float] = None
    pinned_rel: float = -5.0
    noise_std: Optional[float] = None
    noise_rel: float = 0.01
    block_duration: float = 0.01
    period: Optional[float] = None
    clip_fraction: float = 0.8
    start: float = 3.0
    duration: float = 1.0
    channels: Optional[Sequence[int]] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in OUTLIER_KINDS:
            raise ValueError(f"unknown outlier kind {self.kind!r}; choose from {OUTLIER_KINDS}")
        if not 0 <= self.rate <= 1:
            raise ValueError("rate must lie in [0, 1]")
        if not 0 < self.clip_fraction <= 1:
            raise ValueError("clip_fraction must lie in (0, 1]")
        for name in ("block_duration", "start", "duration", "noise_rel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.period is not None and self.period <= 0:
            raise ValueError("period must be positive")


OUTLIER_PRESETS = {
    "random-0.1pct": dict(kind="random-dropout", rate=0.001),
    "random-0.5pct": dict(kind="random-dropout", rate=0.005),
    # 0.1% of all samples in a three-channel record, concentrated in channel 0
    "periodic-block": dict(kind="periodic-block", rate=0.003, block_duration=0.01,
                           pinned_rel=0.0, channels=(0,)),
    "clip-80": dict(kind="clipping", clip_fraction=0.8),
    "zero-block": dict(kind="zero-block", start=3.0, duration=1.0, channels=(0,)),
}


def outlier_preset(name: str, **overrides) -> OutlierSpec:
    try:
        base = dict(OUTLIER_PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown outlier preset {name!r}; choose from {sorted(OUTLIER_PRESETS)}") from None
    base.update(overrides)
    return OutlierSpec(**base)


def _pinned(spec: OutlierSpec, peak: float, size: int, rng) -> np.ndarray:
    value = spec.pinned_value if spec.pinned_value is not None else spec.pinned_rel * peak
    std = spec.noise_std if spec.noise_std is not None else spec.noise_rel * peak
    noise = rng.standard_normal(size)
    return value + std * noise


def inject_outliers(record: MultiChannelRecord, spec: OutlierSpec):
    """Return a corrupted copy of ``record`` and the boolean mask of touched samples."""
    data = record.data.copy()
    l, n = data.shape
    channels = list(range(l)) if spec.channels is None else list(spec.channels)
    for c in channels:
        if not 0 <= c < l:
            raise ValueError(f"outlier spec references channel {c}, record has {l} channels")
    mask = np.zeros((l, n), dtype=bool)
    rng = np.random.default_rng(spec.seed)
    dt = record.dt
    duration = record.duration

    for c in channels:
        peak = np.max(np.abs(record.data[c]))
        if spec.kind == "random-dropout":
            hit = rng.random(n) < spec.rate
        elif spec.kind == "periodic-block":
            hit = np.zeros(n, dtype=bool)
            if spec.rate > 0 and spec.block_duration > 0:
                if spec.block_duration > duration:
                    raise ValueError("periodic block longer than the record")
                width = max(1, int(round(spec.block_duration / dt)))
                if spec.period is not None:
                    if spec.period > duration:
                        raise ValueError("block period longer than the record")
                    step = max(width, int(round(spec.period / dt)))
                else:
                    # as many evenly spaced blocks as the rate asks for, at least one
                    nblocks = max(1, int(round(spec.rate * n / width)))
                    step = max(width, n // nblocks)
                # each block sits in the middle of its period
                for s in range(max(0, (step - width) // 2), n - width + 1, step):
                    hit[s:s + width] = True
        elif spec.kind == "clipping":
            limit = spec.clip_fraction * peak
            hit = np.abs(data[c]) > limit
            data[c] = np.clip(data[c], -limit, limit)
            mask[c] = hit
            continue
        else:
            if spec.start + spec.duration > duration + 1e-12:
                raise ValueError("zero block extends beyond the record")
            s0 = int(round(spec.start / dt))
            s1 = min(n, s0 + int(round(spec.duration / dt)))
            hit = np.zeros(n, dtype=bool)
            hit[s0:s1] = True
            data[c, hit] = 0.0
            mask[c] = hit
            continue
        vals = _pinned(spec, peak, int(hit.sum()), rng)
        data[c, hit] = vals
        mask[c] = hit

    corrupted = replace(record, data=data, channel_labels=list(record.channel_labels), mask=mask)
    return corrupted, mask
