"""Logit-normal diffusion for residue types."""

import numpy as np

from ..errors import InvalidK, InvalidType
from .schedule import DdpmSchedule

NUM_TYPES = 20
DEFAULT_K = 10.0


def _check_k(K):
    if not (np.isfinite(K) and K > 0):
        raise InvalidK(f"K must be positive, got {K}")


def logit_encode(a, K=DEFAULT_K):
    """Sharp one-hot: ``K`` at the type index, ``-K`` elsewhere."""
    _check_k(K)
    a = np.asarray(a)
    if not np.issubdtype(a.dtype, np.integer) or np.any((a < 0) | (a >= NUM_TYPES)):
        raise InvalidType(f"residue type must be an integer in 0..{NUM_TYPES - 1}")
    v = np.full(a.shape + (NUM_TYPES,), -float(K))
    np.put_along_axis(v, a[..., None], float(K), axis=-1)
    return v


def logit_decode(v):
    """Argmax; ``np.argmax`` already breaks ties toward the lowest index."""
    return np.argmax(np.asarray(v), axis=-1)


def softmax(v):
    v = np.asarray(v, dtype=float)
    e = np.exp(v - v.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def logit_sample(v, rng):
    """Draw ``a ~ softmax(v)`` independently per residue (inverse CDF)."""
    p = softmax(v)
    u = rng.random(p.shape[:-1] + (1,))
    idx = (np.cumsum(p, axis=-1) < u).sum(axis=-1)
    return np.minimum(idx, NUM_TYPES - 1)


def logit_forward(v0, t, schedule: DdpmSchedule, K, rng, eps=None):
    """``sqrt(abar) v0 + sqrt(1 - abar) eps``, ``eps ~ N(0, K^2 I)``.

    ``eps`` if given is the unit-variance draw; it is scaled by ``K`` here.
    """
    _check_k(K)
    t = schedule.check(t)
    v0 = np.asarray(v0, dtype=float)
    if eps is None:
        eps = rng.standard_normal(v0.shape)
    ab = schedule.alpha_bars[t]
    return np.sqrt(ab) * v0 + np.sqrt(1.0 - ab) * K * eps


def logit_reverse_renoise(v0_hat, t, schedule: DdpmSchedule, K, rng, noise=True):
    """Re-noise the predicted clean logits to obtain ``v_{t-1}``.

    Uses ``abar_t`` as written in the method; at ``t = 1`` returns ``v0_hat``.
    """
    _check_k(K)
    t = schedule.check(t)
    v0_hat = np.asarray(v0_hat, dtype=float)
    if t == 1:
        return v0_hat.copy()
    ab = schedule.alpha_bars[t]
    out = np.sqrt(ab) * v0_hat
    if noise:
        out = out + np.sqrt(1.0 - ab) * K * rng.standard_normal(v0_hat.shape)
    return out


def clean_logits_from_eps(v_t, eps_hat, t, schedule: DdpmSchedule, K):
    """Invert the forward map given a (unit-variance) noise prediction."""
    t = schedule.check(t)
    ab = schedule.alpha_bars[t]
    return (np.asarray(v_t, float) - np.sqrt(1.0 - ab) * K * eps_hat) / np.sqrt(ab)
