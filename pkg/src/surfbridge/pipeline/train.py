"""Desk-scale training of the joint network on paired complexes."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import torch

from ..bridge import bridge_sample_t, estimate_normals
from ..errors import EmptyInput, NonFiniteLoss
from ..kernels.igso3 import igso3_sample
from ..kernels.logits import logit_encode, logit_forward
from ..kernels.r3 import com_project
from ..kernels.torus import torus_forward
from ..structure import ComplexPair
from ..torch_ops import DTYPE, igso3_score
from .config import TrainConfig
from .losses import loss_ang, loss_rotation, loss_surface, loss_total, loss_translation, loss_type
from .model import NM_PER_ANGSTROM, JointSchedule, ScoreNetwork

log = logging.getLogger(__name__)

# learning-rate plateau check: every EVAL_EVERY steps on the mean recent loss
EVAL_EVERY = 10
PLATEAU_PATIENCE = 10
COMPONENTS = ("surface", "rotation", "position", "type", "angle")


@dataclass
class Example:
    """Arrays of one complex in network units (Å, radians, type indices)."""

    rec_pos: np.ndarray
    rec_feat: np.ndarray
    rec_normal: np.ndarray
    pep_pos: np.ndarray
    pep_feat: np.ndarray
    rot0: np.ndarray
    trans0: np.ndarray
    chi0: np.ndarray
    types: np.ndarray


def prepare(pair: ComplexPair) -> Example:
    rec = pair.receptor_surface
    pep = pair.peptide_surface
    return Example(
        rec.positions, rec.features(), estimate_normals(rec.positions),
        pep.positions, pep.features(),
        pair.peptide.rot, pair.peptide.trans, pair.peptide.torsions, pair.peptide.types,
    )


def noisy_example(ex: Example, k, sched: JointSchedule, K, rng):
    """Draw the noised state at step ``k`` together with its targets."""
    ddpm = sched.ddpm
    L = len(ex.types)
    tb, tr = sched.bridge_time(k), sched.se3_time(k)
    U_t = bridge_sample_t(ex.pep_pos, ex.rec_pos, tb, sched.bridge, rng)
    rot_t = ex.rot0 @ igso3_sample(tr, rng, L)
    m0 = com_project(ex.trans0) * NM_PER_ANGSTROM
    z = com_project(rng.standard_normal((L, 3)))
    m_t = np.exp(-tr / 2) * m0 + np.sqrt(-np.expm1(-tr)) * z
    eps_angle = rng.standard_normal(ex.chi0.shape)
    chi_t = torus_forward(ex.chi0, k, ddpm, rng, eps_angle)
    eps_type = rng.standard_normal((L, 20))
    v_t = logit_forward(logit_encode(ex.types, K), k, ddpm, K, rng, eps_type)
    return {
        "rec_pos": ex.rec_pos, "rec_feat": ex.rec_feat, "rec_normal": ex.rec_normal,
        "U_t": U_t, "rot": rot_t, "trans": m_t / NM_PER_ANGSTROM, "chi": chi_t, "v": v_t,
        "tau": sched.tau(k),
        # targets
        "U0": ex.pep_pos, "feat0": ex.pep_feat, "rot0": ex.rot0, "m0": m0,
        "eps_angle": eps_angle, "eps_type": eps_type, "t_se3": tr,
    }


INPUTS = ("rec_pos", "rec_feat", "rec_normal", "U_t", "rot", "trans", "chi", "v", "tau")


def collate(items):
    keys = items[0].keys()
    return {k: torch.as_tensor(np.stack([np.asarray(it[k], dtype=float) for it in items]), dtype=DTYPE) for k in keys}


def batch_losses(model: ScoreNetwork, batch):
    """The five loss components (tensors) for a collated batch."""
    out = model(*(batch[k] for k in INPUTS))
    t_se3 = batch["t_se3"].numpy()
    score_pred = torch.stack([igso3_score(out["rot0"][i], batch["rot"][i], float(t)) for i, t in enumerate(t_se3)])
    return [
        loss_surface(out["U0"], batch["U0"], out["feat0"], batch["feat0"]),
        loss_rotation(score_pred, batch["rot0"], batch["rot"], t_se3),
        loss_translation(out["trans0"] * NM_PER_ANGSTROM, batch["m0"]),
        loss_type(out["eps_type"], batch["eps_type"]),
        loss_ang(out["eps_angle"], batch["eps_angle"]),
    ]


@dataclass
class TrainTrace:
    total: np.ndarray
    components: np.ndarray
    lr: np.ndarray

    def smoothed(self, window=50):
        """Trailing moving average of the total loss."""
        c = np.cumsum(np.concatenate([[0.0], self.total]))
        n = np.minimum(np.arange(1, len(self.total) + 1), window)
        idx = np.arange(1, len(self.total) + 1)
        return (c[idx] - c[idx - n]) / n


def build_model(config: TrainConfig) -> ScoreNetwork:
    return ScoreNetwork(config.embedding, config.K, config.seed)


def train_toy(dataset, config: TrainConfig, model: ScoreNetwork | None = None, progress=None):
    """Adam with plateau decay on the weighted total loss.

    Returns ``(model, trace)``. The run is a deterministic function of
    ``(config.seed, dataset, config)``; a non-finite loss aborts with the
    offending step.
    """
    if len(dataset) == 0:
        raise EmptyInput("training needs at least one complex")
    examples = [d if isinstance(d, Example) else prepare(d) for d in dataset]
    model = model or build_model(config)
    sched = JointSchedule(config.sample_steps)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    plateau = torch.optim.lr_scheduler.ReduceLROnPlateau(
        opt, mode="min", factor=config.decay_factor, patience=PLATEAU_PATIENCE, min_lr=config.min_lr
    )
    rng = np.random.default_rng([config.seed, 1])
    weights = config.weights
    totals, comps, lrs = [], [], []
    for step in range(config.train_steps):
        idx = rng.integers(0, len(examples), config.batch_size)
        ks = rng.integers(1, sched.steps + 1, config.batch_size)
        batch = collate([noisy_example(examples[i], int(k), sched, config.K, rng) for i, k in zip(idx, ks)])
        parts = batch_losses(model, batch)
        values = [float(p.detach()) for p in parts]
        total_value = float(np.dot(weights.as_array(), values)) if np.all(np.isfinite(values)) else float("nan")
        if not np.isfinite(total_value):
            raise NonFiniteLoss(step, total_value)
        total = loss_total(parts, weights)
        opt.zero_grad()
        total.backward()
        opt.step()
        totals.append(total_value)
        comps.append(values)
        lrs.append(opt.param_groups[0]["lr"])
        if (step + 1) % EVAL_EVERY == 0:
            plateau.step(float(np.mean(totals[-EVAL_EVERY:])))
        if progress is not None:
            progress(step, total_value)
    return model, TrainTrace(np.array(totals), np.array(comps), np.array(lrs))
