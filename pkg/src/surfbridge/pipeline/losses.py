"""Training losses for the five modalities and their weighted total.

Each function accepts numpy arrays or float64 tensors and returns a scalar
tensor, so the same code serves tests and backpropagation.
"""

from __future__ import annotations

import numpy as np
import torch

from ..errors import InvalidTime, ShapeMismatch
from ..torch_ops import as_tensor, igso3_score, wrap
from .config import LossWeights, check_finite_components
from .weights import lambda_r


def _same(a, b):
    a, b = as_tensor(a), as_tensor(b)
    if a.shape != b.shape:
        raise ShapeMismatch(f"prediction {tuple(a.shape)} vs target {tuple(b.shape)}")
    return a, b


def loss_surface(U0_hat, U0, feat_hat=None, feat=None):
    """Clean-endpoint regression of the bridge, plus the feature channels.

    With weight ``sigma_t^4`` the bridge score-matching loss equals the
    squared error of the predicted endpoint, which is what is computed here.
    """
    U0_hat, U0 = _same(U0_hat, U0)
    loss = ((U0_hat - U0) ** 2).mean()
    if feat_hat is not None:
        feat_hat, feat = _same(feat_hat, feat)
        loss = loss + ((feat_hat - feat) ** 2).mean()
    return loss


def loss_rotation(score_pred, r0, rt, t):
    """``lambda_r(t) |score(r_t | r_0) - score_pred|^2`` averaged over residues.

    ``t`` is a scalar or one time per leading batch row of ``r0``.
    """
    score_pred = as_tensor(score_pred)
    r0, rt = _same(r0, rt)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(t_arr)) or np.any(t_arr <= 0):
        raise InvalidTime("rotation loss needs t > 0")
    if t_arr.size == 1:
        target = igso3_score(r0, rt, float(t_arr[0]))
        lam = torch.tensor(lambda_r(float(t_arr[0])), dtype=target.dtype)
    else:
        target = torch.stack([igso3_score(r0[i], rt[i], float(ti)) for i, ti in enumerate(t_arr)])
        lam = torch.tensor([lambda_r(float(ti)) for ti in t_arr], dtype=target.dtype)
        lam = lam.reshape((-1,) + (1,) * (target.dim() - 2))
    if score_pred.shape != target.shape:
        raise ShapeMismatch(f"score {tuple(score_pred.shape)} vs {tuple(target.shape)}")
    return (lam * ((target - score_pred) ** 2).sum(-1)).mean()


def loss_translation(m_hat, m0):
    """Squared Cα error summed over xyz and averaged over residues."""
    m_hat, m0 = _same(m_hat, m0)
    return ((m_hat - m0) ** 2).sum(-1).mean()


def loss_type(eps_hat, eps):
    eps_hat, eps = _same(eps_hat, eps)
    return ((eps_hat - eps) ** 2).mean()


def loss_ang(eps_hat, eps):
    """Mean squared residual after wrapping it to ``[-pi, pi)``."""
    eps_hat, eps = _same(eps_hat, eps)
    return (wrap(eps_hat - eps) ** 2).mean()


def loss_total(components, weights: LossWeights | None = None):
    """``mu . [L_U, L_r, L_m, L_type, L_ang]``; raises on non-finite parts."""
    weights = weights or LossWeights()
    check_finite_components(components)
    return sum(w * c for w, c in zip(weights.as_array().tolist(), components))
