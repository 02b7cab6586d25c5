"""DDPM on the flat torus with wrapped-Gaussian transitions."""

import numpy as np

from .schedule import DdpmSchedule

TWO_PI = 2.0 * np.pi


def wrap(x):
    """Map angles to ``[-pi, pi)``."""
    out = np.mod(np.asarray(x, dtype=float) + np.pi, TWO_PI) - np.pi
    # mod can round up to exactly pi for tiny negative inputs
    return np.where(out >= np.pi, -np.pi, out)


def torus_forward(chi0, t, schedule: DdpmSchedule, rng, eps=None):
    """Closed-form noising ``wrap(sqrt(abar) chi0 + sqrt(1 - abar) eps)``."""
    t = schedule.check(t)
    chi0 = np.asarray(chi0, dtype=float)
    if eps is None:
        eps = rng.standard_normal(chi0.shape)
    ab = schedule.alpha_bars[t]
    return wrap(np.sqrt(ab) * chi0 + np.sqrt(1.0 - ab) * eps)


def torus_step(chi_prev, t, schedule: DdpmSchedule, rng, eps=None):
    """Single transition ``chi_{t-1} -> chi_t``."""
    t = schedule.check(t)
    chi_prev = np.asarray(chi_prev, dtype=float)
    if eps is None:
        eps = rng.standard_normal(chi_prev.shape)
    a = schedule.alphas[t]
    return wrap(np.sqrt(a) * chi_prev + np.sqrt(1.0 - a) * eps)


def torus_posterior_mean(chi_t, eps_hat, t, schedule: DdpmSchedule):
    t = schedule.check(t)
    a, ab = schedule.alphas[t], schedule.alpha_bars[t]
    return wrap((np.asarray(chi_t, float) - (1.0 - a) / np.sqrt(1.0 - ab) * eps_hat) / np.sqrt(a))


def torus_reverse_step(chi_t, eps_hat, t, schedule: DdpmSchedule, rng, variance=None):
    """Draw ``chi_{t-1}`` from the wrapped normal around the predicted mean.

    ``variance`` defaults to ``beta_t`` (zero at ``t = 1``). Sampling a
    wrapped normal is exact as ``wrap(mu + sigma z)``.
    """
    t = schedule.check(t)
    mu = torus_posterior_mean(chi_t, eps_hat, t, schedule)
    if variance is None:
        variance = 0.0 if t == 1 else schedule.betas[t]
    if variance == 0.0:
        return mu
    return wrap(mu + np.sqrt(variance) * rng.standard_normal(mu.shape))


def wrapped_normal_logpdf(x, mu, variance, windows=3):
    """Log density of the wrapped normal, summing ``2 windows + 1`` images."""
    d = wrap(np.asarray(x, float) - mu)[..., None] + TWO_PI * np.arange(-windows, windows + 1)
    log_terms = -0.5 * d**2 / variance - 0.5 * np.log(2 * np.pi * variance)
    m = log_terms.max(axis=-1, keepdims=True)
    return (m + np.log(np.exp(log_terms - m).sum(axis=-1, keepdims=True)))[..., 0]
