"""Density-based grouping of identified poles and per-dataset frequency trends.

Pole distance is |f_i - f_j| / max(f_i, f_j) + (1 - MAC(phi_i, phi_j)). The MAC
term means the triangle inequality does not hold, which DBSCAN does not need.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from sklearn.cluster import DBSCAN

from .consistency import ConsistencyCriteria, PoleRecord, build_diagram, mac

NOISE = -1


@dataclass(frozen=True)
class ClusteringConfig:
    eps: float = 5e-5
    min_pts: int = 25
    max_clusters: Optional[int] = None
    # cluster only fully consistent poles instead of every pole in the diagram
    consistent_only: bool = False

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be at least 1, got {self.min_pts}")
        if self.max_clusters is not None and self.max_clusters < 1:
            raise ValueError("max_clusters must be positive when given")


@dataclass
class PoleCluster:
    label: int
    members: np.ndarray
    freq_hz: float
    zeta: float
    shape: np.ndarray

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "members": self.members.tolist(),
            "freq_hz": self.freq_hz,
            "zeta": self.zeta,
            "shape": self.shape.tolist(),
        }


def pole_distance(p_i: PoleRecord, p_j: PoleRecord) -> float:
    top = max(p_i.freq_hz, p_j.freq_hz)
    if top <= 0:
        raise ValueError("pole distance undefined when both frequencies are zero")
    return abs(p_i.freq_hz - p_j.freq_hz) / top + 1.0 - mac(p_i.shape, p_j.shape)


def distance_matrix(poles: Sequence[PoleRecord]) -> np.ndarray:
    """All pairwise pole distances, vectorised."""
    f = np.array([p.freq_hz for p in poles], dtype=float)
    shapes = np.array([np.asarray(p.shape, dtype=float).ravel() for p in poles])
    if shapes.ndim != 2:
        raise ValueError("all poles need mode shapes of equal length")
    norms = np.einsum("ij,ij->i", shapes, shapes)
    if np.any(norms == 0):
        raise ValueError("MAC undefined for a zero-norm mode shape")
    top = np.maximum.outer(f, f)
    if np.any(top <= 0):
        raise ValueError("pole distance undefined when both frequencies are zero")
    g = shapes @ shapes.T
    macs = np.minimum(g * g / np.outer(norms, norms), 1.0)
    dist = np.abs(f[:, None] - f[None, :]) / top + 1.0 - macs
    np.fill_diagonal(dist, 0.0)
    return np.maximum(dist, 0.0)


def _center(poles: Sequence[PoleRecord], idx: np.ndarray) -> tuple:
    f = np.median([poles[i].freq_hz for i in idx])
    z = np.median([poles[i].zeta for i in idx])
    shapes = np.array([np.asarray(poles[i].shape, dtype=float) for i in idx])
    ref = shapes[0]
    # shapes are defined up to sign; align them with the first member before averaging
    signs = np.sign(shapes @ ref)
    signs[signs == 0] = 1.0
    mean = (shapes * signs[:, None]).mean(axis=0)
    nrm = np.linalg.norm(mean)
    return float(f), float(z), mean / nrm if nrm > 0 else mean


def cluster_labels(dist: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """DBSCAN labels for a precomputed distance matrix (noise is -1).

    A point's neighbourhood includes itself, and border points join the first
    cluster (in order of lowest core index) that reaches them.
    """
    model = DBSCAN(eps=eps, min_samples=min_pts, metric="precomputed")
    return model.fit_predict(dist)


def dbscan(poles: Sequence[PoleRecord], config: ClusteringConfig = ClusteringConfig()) -> list:
    """Cluster poles; returns clusters in label order, largest first when capped."""
    if not len(poles):
        raise ValueError("need at least one pole to cluster")
    labels = cluster_labels(distance_matrix(poles), config.eps, config.min_pts)
    clusters = []
    for lab in range(labels.max() + 1):
        idx = np.flatnonzero(labels == lab)
        f, z, shape = _center(poles, idx)
        clusters.append(PoleCluster(int(lab), idx, f, z, shape))
    if config.max_clusters is not None and len(clusters) > config.max_clusters:
        keep = sorted(clusters, key=lambda c: (-c.members.size, c.label))[:config.max_clusters]
        clusters = sorted(keep, key=lambda c: c.label)
    return clusters


@dataclass
class TrendRow:
    timestamp: str
    frequencies: list
    clusters: list


def trend_row(timestamp, sweep: Sequence, config: ClusteringConfig = ClusteringConfig(),
              criteria: ConsistencyCriteria = ConsistencyCriteria()) -> TrendRow:
    """Diagram, clustering and frequency-sorted centres for one dataset."""
    if not len(sweep):
        raise ValueError("each dataset needs a nonempty sweep of modal sets")
    diagram = build_diagram(sweep, criteria)
    poles = diagram.consistent() if config.consistent_only else diagram.records
    clusters = dbscan(poles, config) if poles else []
    clusters = sorted(clusters, key=lambda c: c.freq_hz)
    return TrendRow(str(timestamp), [c.freq_hz for c in clusters], clusters)


def _trend_task(args):
    return trend_row(*args)


def temporal_trend(datasets: Sequence, config: ClusteringConfig = ClusteringConfig(),
                   criteria: ConsistencyCriteria = ConsistencyCriteria(), jobs: int = 1) -> list:
    """One ``TrendRow`` per ``(timestamp, sweep)`` pair, in input order.

    Datasets are independent, so ``jobs > 1`` spreads them over worker
    processes; the rows are identical to a serial run.
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    tasks = [(ts, sweep, config, criteria) for ts, sweep in datasets]
    if jobs == 1 or len(tasks) < 2:
        return [_trend_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_trend_task, tasks))
