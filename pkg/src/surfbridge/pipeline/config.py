"""Run configuration: training, embedding sizes, and loss weights."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np
import torch

from ..errors import NonFiniteComponent


@dataclass(frozen=True)
class LossWeights:
    """Weights of the surface, rotation, translation, type and angle losses."""

    surface: float = 0.5
    rotation: float = 1.0
    position: float = 1.0
    type: float = 1.0
    angle: float = 1.0

    def __post_init__(self):
        w = self.as_array()
        if np.any(w < 0) or not np.any(w > 0) or not np.all(np.isfinite(w)):
            raise ValueError(f"loss weights must be nonnegative with one positive: {w}")

    def as_array(self):
        return np.array([self.surface, self.rotation, self.position, self.type, self.angle])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 5e-4
    batch_size: int = 8
    train_steps: int = 1000
    sample_steps: int = 1000
    d_node: int = 128
    d_edge: int = 64
    d_surface: int = 16
    attn_heads: int = 8
    w_surface: float = 0.5
    w_position: float = 1.0
    w_rotation: float = 1.0
    w_type: float = 1.0
    w_angle: float = 1.0
    gamma: float = 6.0
    K: float = 10.0
    seed: int = 0
    decay_factor: float = 0.6
    min_lr: float = 1e-6

    def __post_init__(self):
        positive = ("learning_rate", "batch_size", "train_steps", "sample_steps", "d_node", "d_edge",
                    "d_surface", "attn_heads", "gamma", "K", "min_lr")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.decay_factor <= 1:
            raise ValueError("decay_factor must lie in (0, 1]")
        if self.d_edge % self.attn_heads:
            raise ValueError("d_edge must be divisible by attn_heads")
        self.weights  # validates

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.w_surface, self.w_rotation, self.w_position, self.w_type, self.w_angle)

    @property
    def embedding(self) -> "EmbeddingConfig":
        return EmbeddingConfig(d_b=self.d_node, d_u=self.d_edge, d_edge=self.d_edge,
                               d_surface=self.d_surface, heads=self.attn_heads, gamma=self.gamma)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def keys(cls):
        return [f.name for f in fields(cls)]


@dataclass(frozen=True)
class EmbeddingConfig:
    d_b: int = 128
    d_u: int = 64
    d_edge: int = 64
    d_surface: int = 16
    heads: int = 8
    gamma: float = 6.0
    n_freq: int = 8
    n_layers: int = 2

    def __post_init__(self):
        for name in ("d_b", "d_u", "d_edge", "d_surface", "heads", "n_freq", "n_layers"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")


def check_finite_components(components):
    c = np.asarray([float(x.detach()) if isinstance(x, torch.Tensor) else float(x) for x in components])
    if c.shape != (5,):
        raise ValueError("expected five loss components")
    if not np.all(np.isfinite(c)):
        raise NonFiniteComponent(f"non-finite loss component in {c}")
    return c
