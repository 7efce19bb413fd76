"""Past/future block Hankel matrices and their block covariances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mdof import MultiChannelRecord

DEFAULT_BLOCK_ROWS = 10
JITTER_LADDER = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass
class HankelPair:
    past: np.ndarray
    future: np.ndarray
    l: int
    j: int

    @property
    def ncols(self) -> int:
        return self.past.shape[1]

    def stacked(self) -> np.ndarray:
        """Columns as samples of [future; past], the layout used for projections."""
        return np.vstack([self.future, self.past])


@dataclass
class CovarianceSet:
    """Block covariances of the future/past halves.

    Only ``sfp`` is stored; ``spf`` is its transpose by construction.
    """

    spp: np.ndarray
    sfp: np.ndarray
    sff: np.ndarray

    @property
    def spf(self) -> np.ndarray:
        return self.sfp.T

    @property
    def dim(self) -> int:
        return self.spp.shape[0]


def build_hankel(record: MultiChannelRecord | np.ndarray, j: int = DEFAULT_BLOCK_ROWS) -> HankelPair:
    """Stack mean-centred data into past (samples t..t+j-1) and future (t+j..t+2j-1) blocks.

    Past row ``b*l + c`` at column ``t`` holds channel ``c`` at sample ``t + b``.
    """
    y = record.data if isinstance(record, MultiChannelRecord) else np.atleast_2d(record)
    if j < 1:
        raise ValueError(f"j must be a positive integer, got {j}")
    l, n = y.shape
    ncols = n - 2 * j + 1
    if ncols <= 0:
        raise ValueError(f"record of {n} samples is too short for j={j} (needs at least {2 * j})")
    y = y - y.mean(axis=1, keepdims=True)
    # a constant channel should centre to exact zeros, not rounding residue
    y[np.ptp(y, axis=1) == 0] = 0.0
    rows = np.empty((2 * j * l, ncols))
    for b in range(2 * j):
        rows[b * l:(b + 1) * l] = y[:, b:b + ncols]
    return HankelPair(past=rows[:j * l], future=rows[j * l:], l=l, j=j)


def covariances(h: HankelPair) -> CovarianceSet:
    if h.past.shape != h.future.shape:
        raise ValueError(f"past {h.past.shape} and future {h.future.shape} differ in shape")
    n = h.ncols
    spp = h.past @ h.past.T / n
    sff = h.future @ h.future.T / n
    sfp = h.future @ h.past.T / n
    return CovarianceSet(spp=(spp + spp.T) / 2, sfp=sfp, sff=(sff + sff.T) / 2)


def cholesky_sqrt(m: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Lower Cholesky factor of ``m``, adding diagonal jitter if the plain factorisation fails.

    The ladder escalates through 1e-12, 1e-10, 1e-8 times trace/dim after the
    caller's ``jitter``. Raises ``np.linalg.LinAlgError`` if all rungs fail.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=1e-10, atol=1e-14 * max(1.0, np.abs(m).max(initial=0.0))):
        raise ValueError("matrix is not symmetric")
    dim = m.shape[0]
    scale = np.trace(m) / dim if dim else 0.0
    if scale <= 0:
        scale = 1.0
    eye = np.eye(dim)
    ladder = [jitter] + [max(jitter, r * scale) for r in JITTER_LADDER[1:]]
    for eps in ladder:
        try:
            return np.linalg.cholesky(m + eps * eye)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError(
        f"Cholesky failed for {dim}x{dim} matrix even with jitter {ladder[-1]:.3g}"
    )
