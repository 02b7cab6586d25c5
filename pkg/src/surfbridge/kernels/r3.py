"""Variance-preserving diffusion on R^3 and centre-of-mass projection."""

import numpy as np

from ..errors import EmptyInput, InvalidTime


def r3_transition(m0, t):
    """Mean and isotropic variance of ``m_t | m_0`` under the VP-SDE."""
    if t < 0:
        raise InvalidTime(f"t must be >= 0, got {t}")
    m0 = np.asarray(m0, dtype=float)
    if np.isinf(t):
        return np.zeros_like(m0), 1.0
    return np.exp(-t / 2.0) * m0, -np.expm1(-t)


def r3_score(m0, mt, t):
    """Gradient of ``log p(m_t | m_0)`` with respect to ``m_t``."""
    if not t > 0:
        raise InvalidTime(f"t must be > 0, got {t}")
    mt = np.asarray(mt, dtype=float)
    if np.isinf(t):
        return -mt
    return (np.exp(-t / 2.0) * np.asarray(m0, dtype=float) - mt) / -np.expm1(-t)


def r3_log_density(m0, mt, t):
    mean, var = r3_transition(m0, t)
    d = np.asarray(mt, dtype=float) - mean
    return -0.5 * np.sum(d * d, axis=-1) / var - 1.5 * np.log(2 * np.pi * var)


def com_project(points):
    """Subtract the centroid over the second-to-last axis."""
    points = np.asarray(points, dtype=float)
    if points.ndim < 2 or points.shape[-2] == 0:
        raise EmptyInput("need at least one point")
    return points - points.mean(axis=-2, keepdims=True)
