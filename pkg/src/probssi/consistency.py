"""Consistency (stabilisation) diagrams across model orders."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .modal import ModalSet


@dataclass(frozen=True)
class ConsistencyCriteria:
    freq_rel_tol: float = 0.02
    damp_abs_tol: float = 0.05
    mac_min: float = 0.98

    def __post_init__(self):
        for name in ("freq_rel_tol", "damp_abs_tol", "mac_min"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")


@dataclass
class PoleRecord:
    order: int
    freq_hz: float
    zeta: float
    shape: np.ndarray
    freq_stable: bool = False
    damp_stable: bool = False
    shape_stable: bool = False

    @property
    def fully_consistent(self) -> bool:
        return self.freq_stable and self.damp_stable and self.shape_stable


@dataclass
class ConsistencyDiagram:
    records: list
    orders: list
    spectrum: Optional[tuple] = field(default=None)

    def poles_at(self, order: int) -> list:
        return [r for r in self.records if r.order == order]

    def consistent(self) -> list:
        return [r for r in self.records if r.fully_consistent]


def mac(shape_a, shape_b) -> float:
    """Modal assurance criterion |a^T b|^2 / ((a^T a)(b^T b))."""
    a = np.asarray(shape_a, dtype=float).ravel()
    b = np.asarray(shape_b, dtype=float).ravel()
    if a.shape != b.shape:
        raise ValueError(f"shapes differ in length: {a.size} vs {b.size}")
    na, nb = a @ a, b @ b
    if na == 0 or nb == 0:
        raise ValueError("MAC undefined for a zero-norm mode shape")
    return float(min(1.0, (a @ b) ** 2 / (na * nb)))


def classify(current: ModalSet, previous: Optional[ModalSet],
             crit: ConsistencyCriteria = ConsistencyCriteria()) -> list:
    """Flag each pole of ``current`` against its nearest-frequency pole in ``previous``.

    A pole whose nearest neighbour lies outside the frequency tolerance (or
    with no previous poles at all) is new and gets all-false flags.
    """
    if previous is not None and len(previous) and previous.order >= current.order:
        raise ValueError("previous order must be lower than current order")
    prev_f = previous.frequencies if previous is not None else np.zeros(0)
    out = []
    for k in range(len(current)):
        f, z = current.frequencies[k], current.damping_ratios[k]
        shape = current.mode_shapes[:, k]
        rec = PoleRecord(current.order, float(f), float(z), shape)
        if prev_f.size:
            gap = np.abs(prev_f - f)
            # ties go to the lower previous frequency (argmin on ascending keys)
            m = int(np.lexsort((prev_f, gap))[0])
            denom = max(f, prev_f[m])
            rel = gap[m] / denom if denom > 0 else np.inf
            if rel <= crit.freq_rel_tol:
                rec.freq_stable = True
                rec.damp_stable = abs(z - previous.damping_ratios[m]) <= crit.damp_abs_tol
                try:
                    rec.shape_stable = mac(shape, previous.mode_shapes[:, m]) >= crit.mac_min
                except ValueError:
                    rec.shape_stable = False
        out.append(rec)
    return out


def build_diagram(modal_sets: Sequence[ModalSet], crit: ConsistencyCriteria = ConsistencyCriteria(),
                  spectrum: Optional[tuple] = None) -> ConsistencyDiagram:
    orders = [ms.order for ms in modal_sets]
    if any(b <= a for a, b in zip(orders, orders[1:])):
        raise ValueError(f"model orders must be strictly increasing, got {orders}")
    records = []
    previous = None
    for ms in modal_sets:
        records.extend(classify(ms, previous, crit))
        previous = ms
    return ConsistencyDiagram(records=records, orders=list(orders), spectrum=spectrum)


def consistent_run(diagram: ConsistencyDiagram, freq_hz: float, rel_tol: float = 0.02) -> int:
    """Longest run of consecutive sweep orders holding a fully consistent pole near ``freq_hz``."""
    hits = set()
    for r in diagram.records:
        if r.fully_consistent and abs(r.freq_hz - freq_hz) <= rel_tol * freq_hz:
            hits.add(r.order)
    best = cur = 0
    for o in diagram.orders:
        cur = cur + 1 if o in hits else 0
        best = max(best, cur)
    return best


def welch_spectrum(data: np.ndarray, dt: float, nperseg: int = 1024):
    """Channel-summed Welch PSD, used as the diagram overlay."""
    from scipy.signal import welch

    f, p = welch(np.atleast_2d(data), fs=1.0 / dt, nperseg=min(nperseg, np.atleast_2d(data).shape[1]))
    return f, p.sum(axis=0)
