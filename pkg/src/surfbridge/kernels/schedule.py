"""Discrete DDPM noise schedule shared by the torus and logit diffusions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import IndexOutOfSchedule


@dataclass(frozen=True)
class DdpmSchedule:
    """Per-step ``beta_t`` for ``t = 1..steps`` and derived products.

    Arrays are stored 1-indexed: entry 0 holds the ``t = 0`` values
    (``beta = 0``, ``alpha_bar = 1``) so ``alpha_bar[t]`` reads naturally.
    """

    betas: np.ndarray
    alphas: np.ndarray = field(init=False)
    alpha_bars: np.ndarray = field(init=False)

    def __post_init__(self):
        betas = np.concatenate([[0.0], np.asarray(self.betas, dtype=float)])
        if np.any(betas[1:] <= 0.0) or np.any(betas[1:] >= 1.0):
            raise ValueError("betas must lie in (0, 1)")
        alphas = 1.0 - betas
        object.__setattr__(self, "betas", betas)
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "alpha_bars", np.cumprod(alphas))

    @classmethod
    def linear(cls, steps=1000, beta_start=1e-4, beta_end=0.02):
        if steps < 1:
            raise ValueError("steps must be positive")
        if steps == 1:
            return cls(np.array([beta_start]))
        return cls(np.linspace(beta_start, beta_end, steps))

    @property
    def steps(self):
        return len(self.betas) - 1

    def check(self, t):
        if not (1 <= int(t) <= self.steps) or int(t) != t:
            raise IndexOutOfSchedule(f"step {t} outside 1..{self.steps}")
        return int(t)
