"""Joint denoising network: surface, frames, torsions and residue types.

All four processes share one discrete grid ``k = 1..S``. The surface bridge
runs on ``[0, T]``, the SE(3) processes on ``[0, T_F]`` and the torsion and
type chains are indexed by ``k`` directly.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from ..bridge import BridgeSchedule
from ..kernels.schedule import DdpmSchedule
from ..sfmnet import N_RBF, Mlp, NodeState, SfmStack, child_seed, rbf, time_encoding
from ..torch_ops import DTYPE, safe_norm
from .config import EmbeddingConfig
from .embed import D_TIME, N_TORSIONS, N_TYPES, EdgeEmbed, NodeEmbed, SurfaceEmbed

SE3_HORIZON = 10.0
# translations diffuse in nm; the network and files work in Å
NM_PER_ANGSTROM = 0.1
SURFACE_KNN = 16
# length scale (Å) of the bounded offset features and of the frame envelope
SURFACE_REACH = 10.0
# per-axis spread of pocket-centred Cα positions (nm) assumed by the frame prior
TRANS_PRIOR_STD = 0.5


@dataclass(frozen=True)
class JointSchedule:
    steps: int = 1000
    se3_horizon: float = SE3_HORIZON
    bridge: BridgeSchedule = field(default_factory=BridgeSchedule)

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @functools.cached_property
    def ddpm(self) -> DdpmSchedule:
        return DdpmSchedule.linear(self.steps)

    def tau(self, k):
        return k / self.steps

    def bridge_time(self, k):
        return self.bridge.T * k / self.steps

    def se3_time(self, k):
        return self.se3_horizon * k / self.steps

    @property
    def se3_dt(self):
        return self.se3_horizon / self.steps


def shrink_factor(tau, horizon=SE3_HORIZON, prior_std=TRANS_PRIOR_STD):
    """Posterior-mean coefficient ``E[m_0 | m_t] = c m_t`` under a Gaussian prior.

    Frames are moved to ``c m_t`` before message passing so that the network
    only refines a sensible guess instead of undoing all of the noise.
    """
    t = horizon * tau
    a = torch.exp(-t / 2)
    var0 = prior_std**2
    return a * var0 / (a**2 * var0 - torch.expm1(-t))


class ScoreNetwork(nn.Module):
    """Maps a noisy complex at step ``k`` to clean-state predictions.

    Inputs are batched tensors (leading dim ``B``); see :meth:`forward`.
    Parameters are created in a fixed declaration order from ``seed``.
    """

    def __init__(self, cfg: EmbeddingConfig | None = None, K=10.0, seed=0):
        super().__init__()
        cfg = cfg or EmbeddingConfig()
        self.cfg, self.K, self.seed = cfg, float(K), int(seed)
        s = functools.partial(child_seed, seed)
        self.node = NodeEmbed(cfg, K, s(1))
        self.edge = EdgeEmbed(cfg, K, s(2))
        self.pair = Mlp([cfg.d_b + cfg.d_edge, cfg.d_b, cfg.d_b], s(3))
        self.surface = SurfaceEmbed(cfg, s(4))
        self.lift = Mlp([cfg.d_surface + D_TIME, cfg.d_u, cfg.d_u], s(5))
        self.sfm = SfmStack(cfg.n_layers, seed=s(6), d_b=cfg.d_b, d_u=cfg.d_u, heads=cfg.heads, gamma=cfg.gamma)
        self.head_angle = Mlp([cfg.d_b + 2 * N_TORSIONS + D_TIME, cfg.d_b, N_TORSIONS], s(7))
        self.head_type = Mlp([cfg.d_b + N_TYPES + D_TIME, cfg.d_b, N_TYPES], s(8))
        # surface denoiser
        self.surf_knn = Mlp([N_RBF + 4 + D_TIME, 64, 1], s(9), last_scale=0.1)
        self.surf_normal = Mlp([4 + N_RBF + 1 + D_TIME, 64, 1], s(10), last_scale=0.1)
        self.frame_proj = Mlp([cfg.d_b, 16], s(11))
        self.surf_frame = Mlp([N_RBF + 16 + D_TIME, 64, 1], s(12), last_scale=0.1)
        self.surf_gate = Mlp([D_TIME, 32, 1], s(13), last_scale=0.1)
        self.surf_feat = Mlp([4 + D_TIME, 64, 2], s(14))

    def forward(self, rec_pos, rec_feat, rec_normal, U_t, rot, trans, chi, v, tau):
        """Shapes: surfaces ``(B, N, 3)`` (features ``(B, N, 2)``), frames
        ``(B, L, 3, 3)`` / ``(B, L, 3)`` in Å, ``chi (B, L, 5)``, ``v (B, L, 20)``,
        ``tau (B,)`` in ``(0, 1]``.

        Returns a dict with ``U0`` and ``feat0`` (clean surface), ``rot0`` and
        ``trans0`` (clean frames), ``eps_angle`` and ``eps_type``.
        """
        B, L = chi.shape[:2]
        t_enc = time_encoding(tau)  # (B, D_TIME)

        trans = shrink_factor(tau)[:, None, None] * trans
        h = self.node(chi, v, tau)
        z = self.edge(v, rot, trans, tau)
        hj = h[:, None, :, :].expand(B, L, L, -1)
        h = h + self.pair(torch.cat([hj, z], -1)).mean(2)

        tn = t_enc[:, None, :]
        h_pep = self.lift(torch.cat([self.surface(U_t), tn.expand(*U_t.shape[:2], -1)], -1))
        h_rec = self.lift(torch.cat([self.surface(rec_pos, rec_feat), tn.expand(*rec_pos.shape[:2], -1)], -1))
        state = NodeState(torch.cat([h_pep, h_rec], 1), torch.cat([U_t, rec_pos], 1), h, rot, trans)
        state = self.sfm(state, tau)

        te = tn.expand(B, L, -1)
        eps_angle = self.head_angle(torch.cat([state.h_b, torch.sin(chi), torch.cos(chi), te], -1))
        eps_type = self.head_type(torch.cat([state.h_b, v / self.K, te], -1))
        U0, feat0 = self._surface_head(rec_pos, rec_feat, rec_normal, U_t, state, t_enc)
        return {
            "U0": U0, "feat0": feat0, "rot0": state.rot, "trans0": state.trans,
            "eps_angle": eps_angle, "eps_type": eps_type,
        }

    def _surface_head(self, rec_pos, rec_feat, normal, U_t, state, t_enc):
        B, N = rec_pos.shape[:2]
        k = min(SURFACE_KNN, N)
        with torch.no_grad():
            nn_idx = torch.cdist(rec_pos, rec_pos).topk(k, largest=False).indices  # (B, N, k)
        gather = lambda a: torch.take_along_dim(a[:, None], nn_idx[..., None], 2)  # noqa: E731
        nb_pos = gather(rec_pos.expand(B, N, 3))
        nb_feat = gather(rec_feat)
        diff = rec_pos[:, :, None] - nb_pos
        tk = t_enc[:, None, None, :].expand(B, N, k, -1)
        fk = torch.cat([rec_feat[:, :, None].expand(B, N, k, 2), nb_feat], -1)
        w = self.surf_knn(torch.cat([rbf(safe_norm(diff)), fk, tk], -1))
        disp = (w * diff).mean(2)

        tn = t_enc[:, None, :].expand(B, N, -1)
        feat_ctx = torch.cat([rec_feat, nb_feat.mean(2)], -1)
        rel = U_t - rec_pos
        along = torch.tanh((rel * normal).sum(-1, keepdim=True) / SURFACE_REACH)
        s = self.surf_normal(torch.cat([feat_ctx, rbf(safe_norm(rel)), along, tn], -1))

        # every term below is bounded or contracting in U_t, so the reverse
        # integration cannot run away from the receptor
        L = state.trans.shape[1]
        to_frames = U_t[:, :, None] - state.trans[:, None]  # (B, N, L, 3)
        d = safe_norm(to_frames, keepdim=True)
        proj = self.frame_proj(state.h_b)[:, None].expand(B, N, L, -1)
        tl = t_enc[:, None, None, :].expand(B, N, L, -1)
        wf = self.surf_frame(torch.cat([rbf(d[..., 0]), proj, tl], -1))
        frame_disp = (wf * torch.exp(-((d / SURFACE_REACH) ** 2)) * to_frames).mean(2)

        gate = torch.sigmoid(self.surf_gate(t_enc))[:, None, :]
        U0 = rec_pos + gate * rel + s * normal + disp + frame_disp
        feat0 = self.surf_feat(torch.cat([feat_ctx, tn], -1))
        return U0, feat0

    def n_parameters(self):
        return sum(p.numel() for p in self.parameters())


def to_batch(*arrays):
    """Stack numpy arrays into float64 tensors with a leading batch axis."""
    return [torch.as_tensor(np.stack(a), dtype=DTYPE) for a in arrays]
