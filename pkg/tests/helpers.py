"""Small shared builders for the test suite."""

import numpy as np


def random_spd(rng, n, cond=10.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    vals = np.geomspace(1.0, cond, n)
    return (q * vals) @ q.T


def principal_angles(a, b):
    """Principal angles (radians) between the column spans of ``a`` and ``b``."""
    from scipy.linalg import subspace_angles

    return subspace_angles(np.asarray(a, float), np.asarray(b, float))
