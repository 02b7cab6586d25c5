"""Initial node, edge and surface-point features."""

from __future__ import annotations

import torch
from torch import nn

from ..sfmnet import Mlp, child_seed, sinusoidal, time_encoding, TIME_FREQS
from ..torch_ops import DTYPE, as_tensor, so3_log, safe_norm
from .config import EmbeddingConfig

N_TYPES = 20
N_TORSIONS = 5
D_TIME = 2 * TIME_FREQS
POS_FREQS = 4


def position_encoding(pos):
    """Per-coordinate sinusoids with periods from ~6 Å to ~60 Å."""
    enc = sinusoidal(as_tensor(pos), POS_FREQS, max_period=20.0)
    return enc.reshape(*enc.shape[:-2], 3 * 2 * POS_FREQS)


class NodeEmbed(nn.Module):
    """Residue features from index, torsions, type logits and time."""

    def __init__(self, cfg: EmbeddingConfig, K=10.0, seed=0):
        super().__init__()
        self.cfg, self.K = cfg, float(K)
        d_in = 2 * cfg.n_freq + 2 * N_TORSIONS + N_TYPES + D_TIME
        self.mlp = Mlp([d_in, cfg.d_b, cfg.d_b], seed)

    def forward(self, chi, v, tau):
        """``chi (..., L, 5)``, ``v (..., L, 20)``, ``tau`` of shape ``(...)``."""
        L = chi.shape[-2]
        idx = sinusoidal(torch.arange(L, dtype=DTYPE), self.cfg.n_freq, 100.0)
        idx = idx.expand(*chi.shape[:-2], L, -1)
        t = time_encoding(tau)[..., None, :].expand(*chi.shape[:-1], D_TIME)
        x = torch.cat([idx, torch.sin(chi), torch.cos(chi), v / self.K, t], -1)
        return self.mlp(x)


class EdgeEmbed(nn.Module):
    """Pair features from both types, signed offset, distance, relative angle, time."""

    def __init__(self, cfg: EmbeddingConfig, K=10.0, seed=0):
        super().__init__()
        self.cfg, self.K = cfg, float(K)
        d_in = 2 * N_TYPES + 3 * 2 * cfg.n_freq + D_TIME
        self.mlp = Mlp([d_in, cfg.d_edge, cfg.d_edge], seed)

    def forward(self, v, rot, trans, tau):
        L = v.shape[-2]
        vi = (v / self.K)[..., :, None, :].expand(*v.shape[:-2], L, L, N_TYPES)
        vj = (v / self.K)[..., None, :, :].expand(*v.shape[:-2], L, L, N_TYPES)
        ar = torch.arange(L, dtype=DTYPE)
        off = sinusoidal(ar[:, None] - ar[None, :], self.cfg.n_freq, 100.0).expand(*v.shape[:-2], L, L, -1)
        dist = safe_norm(trans[..., :, None, :] - trans[..., None, :, :])
        rel = rot[..., :, None, :, :].transpose(-1, -2) @ rot[..., None, :, :, :]
        ori = safe_norm(so3_log(rel))
        t = time_encoding(tau)[..., None, None, :].expand(*v.shape[:-2], L, L, D_TIME)
        x = torch.cat([
            vi, vj, off,
            sinusoidal(dist, self.cfg.n_freq, 100.0),
            sinusoidal(ori, self.cfg.n_freq, 10.0),
            t,
        ], -1)
        return self.mlp(x)


class SurfaceEmbed(nn.Module):
    """Point features: receptor points carry hbond/hphob, peptide points only positions."""

    def __init__(self, cfg: EmbeddingConfig, seed=0):
        super().__init__()
        d_pos = 3 * 2 * POS_FREQS
        self.receptor = Mlp([d_pos + 2, 2 * cfg.d_surface, cfg.d_surface], child_seed(seed, 0))
        self.peptide = Mlp([d_pos, 2 * cfg.d_surface, cfg.d_surface], child_seed(seed, 1))

    def forward(self, pos, features=None):
        enc = position_encoding(pos)
        if features is None:
            return self.peptide(enc)
        return self.receptor(torch.cat([enc, as_tensor(features)], -1))


def node_embed(module: NodeEmbed, chi, v, tau):
    return module(as_tensor(chi), as_tensor(v), as_tensor(tau))


def edge_embed(module: EdgeEmbed, v, rot, trans, tau):
    return module(as_tensor(v), as_tensor(rot), as_tensor(trans), as_tensor(tau))


def surface_embed(module: SurfaceEmbed, pos, features=None):
    return module(as_tensor(pos), features)
