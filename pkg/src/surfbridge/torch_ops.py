"""Differentiable (torch, float64) counterparts of the geometry and kernel maps.

These mirror :mod:`surfbridge.geom3` and :mod:`surfbridge.kernels.igso3` and
are used wherever gradients must flow (network pose updates and the rotation
loss). Tests cross-check them against the numpy versions.
"""

import math

import numpy as np
import torch

from .kernels.igso3 import IMAGE_MIN_ANGLE, IMAGE_T, N_IMAGES, SERIES_SWITCH, ZERO_SCORE_ANGLE, truncation_order

DTYPE = torch.float64
SMALL = 1e-6


def as_tensor(x):
    if isinstance(x, torch.Tensor):
        return x.to(DTYPE)
    return torch.as_tensor(np.asarray(x, dtype=float), dtype=DTYPE)


def skew(v):
    z = torch.zeros_like(v[..., 0])
    return torch.stack(
        [
            torch.stack([z, -v[..., 2], v[..., 1]], -1),
            torch.stack([v[..., 2], z, -v[..., 0]], -1),
            torch.stack([-v[..., 1], v[..., 0], z], -1),
        ],
        -2,
    )


def vee(m):
    return torch.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], -1)


def so3_exp(v):
    theta2 = (v * v).sum(-1)[..., None, None]
    small = theta2 < SMALL**2
    theta = torch.sqrt(torch.where(small, torch.ones_like(theta2), theta2))
    a = torch.where(small, 1.0 - theta2 / 6.0, torch.sin(theta) / theta)
    b = torch.where(small, 0.5 - theta2 / 24.0, (1.0 - torch.cos(theta)) / theta**2)
    S = skew(v)
    eye = torch.eye(3, dtype=v.dtype).expand(S.shape)
    return eye + a * S + b * (S @ S)


def so3_log(R, pi_margin=1e-7):
    """Axis-angle log; the ``theta / (2 sin theta)`` factor is clamped near pi."""
    anti = vee(R - R.transpose(-1, -2))
    sin_t = 0.5 * torch.sqrt((anti * anti).sum(-1).clamp_min(1e-300))
    cos_t = 0.5 * (torch.diagonal(R, dim1=-2, dim2=-1).sum(-1) - 1.0)
    theta = torch.atan2(sin_t, cos_t)
    small = theta < SMALL
    safe_sin = torch.where(small, torch.ones_like(sin_t), sin_t.clamp_min(math.sin(pi_margin)))
    factor = torch.where(small, 0.5 * (1.0 + theta**2 / 6.0), theta / (2.0 * safe_sin))
    return factor[..., None] * anti


def dlog_density(omega, t, L=None):
    """``d/domega log f(omega, t)`` for the IGSO(3) heat kernel."""
    use_images = L is None and t < IMAGE_T
    L = truncation_order(t) if L is None else int(L)
    ell = torch.arange(L + 1, dtype=DTYPE)
    coef = (2 * ell + 1) * torch.exp(-ell * (ell + 1) * t / 2.0)
    w = omega[..., None]
    big = w >= SERIES_SWITCH
    wb = torch.where(big, w, torch.ones_like(w))
    a = ell + 0.5
    s, c = torch.sin(wb / 2.0), torch.cos(wb / 2.0)
    num = torch.sin(a * wb)
    chi_b = num / s
    dchi_b = (a * torch.cos(a * wb) * s - 0.5 * num * c) / s**2
    ws = torch.where(big, torch.zeros_like(w), w)
    m = ell[1:]
    chi_s = torch.cat([torch.ones_like(ws), 1.0 + 2.0 * torch.cumsum(torch.cos(m * ws), -1)], -1)
    dchi_s = torch.cat([torch.zeros_like(ws), -2.0 * torch.cumsum(m * torch.sin(m * ws), -1)], -1)
    chi = torch.where(big, chi_b, chi_s)
    dchi = torch.where(big, dchi_b, dchi_s)
    series = (dchi @ coef) / (chi @ coef)
    if not use_images:
        return series
    img = omega >= IMAGE_MIN_ANGLE
    wi = torch.where(img, omega, torch.ones_like(omega))[..., None]
    n = torch.arange(-N_IMAGES, N_IMAGES + 1, dtype=DTYPE)
    y = wi + 2.0 * math.pi * n
    e = torch.where(n.remainder(2) == 1, -1.0, 1.0) * torch.exp(-(y * y - wi * wi) / (2.0 * t))
    S, dS = (y * e).sum(-1), ((1.0 - y * y / t) * e).sum(-1)
    wi = wi[..., 0]
    return torch.where(img, dS / S - 0.5 / torch.tan(wi / 2.0), series)


def igso3_score(r0, rt, t):
    v = so3_log(r0.transpose(-1, -2) @ rt)
    omega = torch.sqrt((v * v).sum(-1).clamp_min(1e-300))
    zero = omega < ZERO_SCORE_ANGLE
    safe = torch.where(zero, torch.ones_like(omega), omega)
    ratio = torch.where(zero, torch.zeros_like(omega), dlog_density(safe, t) / safe)
    return v * ratio[..., None]


def wrap(x):
    return torch.remainder(x + math.pi, 2 * math.pi) - math.pi


def safe_norm(x, dim=-1, keepdim=False):
    return torch.sqrt((x * x).sum(dim, keepdim=keepdim).clamp_min(1e-18))
