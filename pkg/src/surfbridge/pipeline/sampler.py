"""Joint reverse-time generation of a peptide surface and structure."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from ..bridge import SurfaceCloud, estimate_normals, farthest_point_sample
from ..errors import EmptyReceptor, NonFiniteState
from ..geom3 import orthonormalize, random_rotation, so3_exp
from ..kernels.igso3 import igso3_score
from ..kernels.logits import NUM_TYPES, clean_logits_from_eps, logit_decode, logit_reverse_renoise
from ..kernels.r3 import com_project, r3_score
from ..kernels.torus import torus_reverse_step, wrap
from ..structure import N_TORSIONS, Chain
from ..torch_ops import DTYPE
from .config import TrainConfig
from .model import NM_PER_ANGSTROM, JointSchedule, ScoreNetwork


@dataclass
class GeneratedPeptide:
    surface: SurfaceCloud
    chain: Chain


def _tensor(a):
    return torch.as_tensor(np.asarray(a, dtype=float)[None], dtype=DTYPE)


def prepare_receptor(receptor: SurfaceCloud, n_surface=None) -> SurfaceCloud:
    if len(receptor) == 0:
        raise EmptyReceptor("receptor surface has no points")
    if n_surface is not None and n_surface != len(receptor):
        if n_surface > len(receptor):
            raise EmptyReceptor(f"receptor has {len(receptor)} points, need {n_surface}")
        receptor = receptor.subset(farthest_point_sample(receptor.positions, n_surface))
    return receptor


@torch.no_grad()
def sample_complex(receptor: SurfaceCloud, model: ScoreNetwork, config: TrainConfig, rng,
                   length=8, n_surface=None) -> GeneratedPeptide:
    """Run the four reverse processes on the shared grid ``k = S..1``.

    The surface starts at the (pocket-centred) receptor surface, rotations
    are Haar-uniform, translations unit Gaussian in nm with zero centroid,
    torsions uniform, and type logits ``N(0, K^2)``. Each step the network
    sees the whole current state; the last step lands on its clean-state
    predictions.
    """
    receptor = prepare_receptor(receptor, n_surface)
    sched = JointSchedule(config.sample_steps)
    ddpm, bridge, K = sched.ddpm, sched.bridge, config.K
    UT = receptor.positions
    rec_pos, rec_feat = _tensor(UT), _tensor(receptor.features())
    rec_normal = _tensor(estimate_normals(UT))

    U = UT.copy()
    rot = random_rotation(rng, length)
    m = com_project(rng.standard_normal((length, 3)))
    chi = rng.uniform(-np.pi, np.pi, (length, N_TORSIONS))
    v = K * rng.standard_normal((length, NUM_TYPES))
    dt_se3 = sched.se3_dt
    feat = receptor.features()

    for k in range(sched.steps, 0, -1):
        out = model(rec_pos, rec_feat, rec_normal, _tensor(U), _tensor(rot), _tensor(m / NM_PER_ANGSTROM),
                    _tensor(chi), _tensor(v), torch.tensor([sched.tau(k)], dtype=DTYPE))
        U0_hat = out["U0"][0].numpy()
        rot0_hat = out["rot0"][0].numpy()
        m0_hat = out["trans0"][0].numpy() * NM_PER_ANGSTROM
        tb, tr = sched.bridge_time(k), sched.se3_time(k)
        dtb = bridge.T / sched.steps

        U = U + bridge.g2(tb) * (U0_hat - U) / bridge.sigma2(tb) * dtb
        if k > 1:
            U = U + np.sqrt(bridge.g2(tb) * dtb) * rng.standard_normal(U.shape)
            s_r = igso3_score(rot0_hat, rot, tr)
            rot = orthonormalize(rot @ so3_exp(dt_se3 * s_r + np.sqrt(dt_se3) * rng.standard_normal((length, 3))))
            s_m = r3_score(m0_hat, m, tr)
            m = com_project(m + (0.5 * m + s_m) * dt_se3 + np.sqrt(dt_se3) * rng.standard_normal(m.shape))
        else:
            rot = orthonormalize(rot0_hat)
            m = com_project(m0_hat)
        chi = torus_reverse_step(chi, out["eps_angle"][0].numpy(), k, ddpm, rng)
        # clean logits lie in [-K, K]; clipping keeps a poor noise estimate from compounding
        v0_hat = np.clip(clean_logits_from_eps(v, out["eps_type"][0].numpy(), k, ddpm, K), -K, K)
        v = logit_reverse_renoise(v0_hat, k, ddpm, K, rng)
        if k == 1:
            feat = out["feat0"][0].numpy()
        bad = [name for name, a in (("surface", U), ("rotation", rot), ("translation", m), ("torsion", chi),
                                    ("type", v)) if not np.all(np.isfinite(a))]
        if bad:
            raise NonFiniteState(f"non-finite {', '.join(bad)} state at step {k}")

    chain = Chain(rot, m / NM_PER_ANGSTROM, wrap(chi), logit_decode(v))
    return GeneratedPeptide(SurfaceCloud(U, feat[:, 0], feat[:, 1]), chain)
