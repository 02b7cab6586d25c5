"""Shape-frame matching layers: surface points and residue frames exchange
messages through distance-gated cross attention, then frames move.

Everything here is float64 torch so that finite-difference gradient checks
are meaningful. Coordinates enter only through pairwise distances and through
vectors expressed in each residue's local frame, which keeps a stack of layers
E(3)-equivariant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import torch
from torch import nn

from .errors import DimensionMismatch, NegativeDistance
from .torch_ops import DTYPE, as_tensor, safe_norm, so3_exp

DEFAULT_GAMMA = 6.0
N_RBF = 16
RBF_MAX = 20.0
TIME_FREQS = 8


def _uniform(shape, fan_in, gen, scale=1.0):
    bound = scale / math.sqrt(fan_in)
    return (torch.rand(shape, generator=gen, dtype=DTYPE) * 2.0 - 1.0) * bound


def child_seed(seed, k):
    """Deterministic, well-separated seed for the ``k``-th sub-network."""
    return int(np.random.SeedSequence([int(seed), int(k)]).generate_state(1)[0])


class Mlp(nn.Module):
    """Fully connected network with SiLU between layers.

    Weights are drawn uniform in ``+-1/sqrt(fan_in)`` from ``seed``; the last
    layer can be shrunk by ``last_scale`` so fresh heads start near zero.
    """

    activation = "silu"

    def __init__(self, widths, seed=0, last_scale=1.0):
        super().__init__()
        if len(widths) < 2 or min(widths) < 1:
            raise ValueError(f"bad layer widths {widths}")
        self.widths = tuple(int(w) for w in widths)
        self.seed = int(seed)
        gen = torch.Generator().manual_seed(self.seed)
        self.weights = nn.ParameterList()
        self.biases = nn.ParameterList()
        n = len(self.widths) - 1
        for i, (a, b) in enumerate(zip(self.widths[:-1], self.widths[1:])):
            s = last_scale if i == n - 1 else 1.0
            self.weights.append(nn.Parameter(_uniform((a, b), a, gen, s)))
            self.biases.append(nn.Parameter(_uniform((b,), a, gen, s)))

    def forward(self, x):
        if x.shape[-1] != self.widths[0]:
            raise DimensionMismatch(f"Mlp expects {self.widths[0]} inputs, got {x.shape[-1]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            x = x @ w + b
            if i < last:
                x = nn.functional.silu(x)
        return x


def mlp_grad(mlp: Mlp, x, loss=None):
    """Reverse-mode gradients of ``loss(mlp(x))`` (default: sum of outputs).

    Returns ``(weight_grads, bias_grads, input_grad)`` as numpy arrays.
    """
    x = as_tensor(x).detach().requires_grad_(True)
    out = mlp(x)
    value = out.sum() if loss is None else loss(out)
    params = list(mlp.weights) + list(mlp.biases)
    grads = torch.autograd.grad(value, params + [x], allow_unused=True, materialize_grads=True)
    n = len(mlp.weights)
    as_np = [g.detach().numpy().copy() for g in grads]
    return as_np[:n], as_np[n : 2 * n], as_np[-1]


def _fd_relative_error(fd, ad, floor):
    return abs(fd - ad) / max(abs(fd), abs(ad), floor)


def gradient_check(fn, tensors, rel_step=1e-3, probes=6, seed=0):
    """Largest relative error between autograd and central differences.

    ``fn()`` must return a scalar tensor computed from ``tensors`` (leaf
    tensors, modified in place while probing). Each tensor is probed at a few
    random entries and along one random direction; steps are ``rel_step``
    relative to the entry magnitude (absolute for entries below one). Central
    differences at ``h`` and ``h/2`` are Richardson-combined to remove the
    ``h^2`` term. Each probe is tried at ``10h``, ``h`` and ``h/10`` and keeps
    its best agreement: truncation dominates at the large step for strongly
    curved functions, rounding in ``fn`` at the small one, while a wrong
    gradient disagrees at all three. Entries whose gradient is below ``1e-5``
    of the largest one are compared against that floor rather than their own
    magnitude.
    """
    rng = np.random.default_rng(seed)
    tensors = list(tensors)
    for t in tensors:
        t.requires_grad_(True)
    value = fn()
    grads = torch.autograd.grad(value, tensors, allow_unused=True, materialize_grads=True)
    scale = max(max(float(g.abs().max()) for g in grads), 1e-300)
    floor = 1e-5 * scale
    worst = 0.0

    def diff(t, direction, h):
        with torch.no_grad():
            t.add_(h * direction)
            up = float(fn())
            t.sub_(2 * h * direction)
            down = float(fn())
            t.add_(h * direction)
        return (up - down) / (2 * h)

    def error(t, direction, h, expected):
        errs = []
        for step in (10 * h, h, h / 10):
            fd = (4.0 * diff(t, direction, step / 2) - diff(t, direction, step)) / 3.0
            errs.append(_fd_relative_error(fd, expected, floor))
        return min(errs)

    for t, g in zip(tensors, grads):
        flat = t.detach().reshape(-1)
        for idx in rng.choice(flat.numel(), size=min(probes, flat.numel()), replace=False):
            d = torch.zeros_like(t).reshape(-1)
            d[idx] = 1.0
            d = d.reshape(t.shape)
            h = rel_step * max(abs(float(flat[idx])), 1.0)
            worst = max(worst, error(t, d, h, float(g.reshape(-1)[idx])))
        d = torch.as_tensor(rng.standard_normal(tuple(t.shape)), dtype=t.dtype)
        h = rel_step * max(float(t.detach().abs().max()), 1.0)
        worst = max(worst, error(t, d, h, float((g * d).sum())))
    return worst


def sinusoidal(x, n_freq, max_period=10000.0):
    """``[sin(x w_k), cos(x w_k)]`` with geometric frequencies ``1 .. 1/max_period``."""
    x = as_tensor(x)
    k = torch.arange(n_freq, dtype=DTYPE)
    w = torch.exp(-math.log(max_period) * k / max(n_freq, 1))
    arg = x[..., None] * w
    return torch.cat([torch.sin(arg), torch.cos(arg)], -1)


def time_encoding(t, n_freq=TIME_FREQS):
    """Encoding of a time in ``[0, 1]`` (scaled to a 0..1000 index range)."""
    return sinusoidal(as_tensor(t) * 1000.0, n_freq)


def rbf(dist, n=N_RBF, d_max=RBF_MAX):
    centers = torch.linspace(0.0, d_max, n, dtype=DTYPE)
    width = d_max / (n - 1)
    return torch.exp(-(((dist[..., None] - centers) / width) ** 2))


def attention(h_b, h_u, g, W_Q, W_K, heads=1):
    """``(h_b W_Q) . (h_u W_K + g) / sqrt(d)`` per head, shape ``(..., heads)``.

    With one head ``d = d_U``; otherwise ``d_U`` is split into equal chunks of
    size ``d`` and each head gets its own dot product.
    """
    if h_b.shape[-1] != W_Q.shape[0] or h_u.shape[-1] != W_K.shape[0] or g.shape[-1] != W_K.shape[1]:
        raise DimensionMismatch("attention operand dimensions disagree")
    d_u = W_K.shape[1]
    if d_u % heads:
        raise DimensionMismatch(f"d_U={d_u} not divisible by {heads} heads")
    q = h_b @ W_Q
    k = h_u @ W_K + g
    d = d_u // heads
    prod = (q * k).reshape(*torch.broadcast_shapes(q.shape, k.shape)[:-1], heads, d)
    return prod.sum(-1) / math.sqrt(d)


def geodesic_embed(dist, mlp: Mlp):
    """Embedding of a surface-to-frame distance; depends on the scalar only."""
    dist = as_tensor(dist)
    if torch.any(dist < 0):
        raise NegativeDistance("distances must be nonnegative")
    return mlp(rbf(dist))


@dataclass
class NodeState:
    """Surface nodes ``(h_u, x_u)`` and frame nodes ``(h_b, rot, trans)``."""

    h_u: torch.Tensor
    x_u: torch.Tensor
    h_b: torch.Tensor
    rot: torch.Tensor
    trans: torch.Tensor

    @classmethod
    def from_arrays(cls, h_u, x_u, h_b, rot, trans):
        return cls(*(as_tensor(a) for a in (h_u, x_u, h_b, rot, trans)))

    def moved(self, Q, v):
        """Copy with every coordinate moved by ``x -> Q x + v``."""
        Q, v = as_tensor(Q), as_tensor(v)
        return replace(self, x_u=self.x_u @ Q.T + v, rot=Q @ self.rot, trans=self.trans @ Q.T + v)


def neighborhood(i, state: NodeState, gamma):
    """Indices of surface points within ``gamma`` of frame ``i``."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    d = torch.linalg.norm(state.x_u - state.trans[i], dim=-1)
    return torch.nonzero(d <= gamma).reshape(-1).numpy()


def pose_update(rot, trans, h, phi_m: Mlp, phi_r: Mlp, local_vec=None):
    """``m' = m + r phi_m(.)`` and ``r' = r exp(phi_r(.))`` in the local frame.

    The heads read the invariant features ``h`` and, optionally, an invariant
    vector already expressed in the residue frame.
    """
    x = h if local_vec is None else torch.cat([h, local_vec], -1)
    shift = phi_m(x)
    new_trans = trans + (rot @ shift[..., None])[..., 0]
    new_rot = rot @ so3_exp(phi_r(x))
    return new_rot, new_trans


def _canonical_order(x_u, h_u):
    """Permutation-independent (lexicographic) ordering of surface nodes, per batch row.

    Keys are the coordinates and the first feature channel, so only
    coincident points with equal leading feature can tie.
    """
    keys = torch.cat([x_u, h_u[..., :1]], -1).detach().numpy()
    return torch.as_tensor(np.stack([np.lexsort(k.T[::-1]) for k in keys]))


class SfmLayer(nn.Module):
    """One round of frame <- surface message passing and pose update.

    States may carry a leading batch dimension; unbatched states are handled
    as a batch of one.
    """

    def __init__(self, d_b=128, d_u=64, heads=8, gamma=DEFAULT_GAMMA, hidden=None, seed=0, pose_scale=0.1):
        super().__init__()
        if d_u % heads:
            raise DimensionMismatch(f"d_U={d_u} not divisible by {heads} heads")
        if not gamma > 0:
            raise ValueError("gamma must be positive")
        hidden = hidden or d_b
        self.d_b, self.d_u, self.heads, self.gamma = d_b, d_u, heads, float(gamma)
        gen = torch.Generator().manual_seed(child_seed(seed, 0))
        self.W_Q = nn.Parameter(_uniform((d_b, d_u), d_b, gen))
        self.W_K = nn.Parameter(_uniform((d_u, d_u), d_u, gen))
        d_t = 2 * TIME_FREQS
        self.geo = Mlp([N_RBF, hidden, d_u], child_seed(seed, 1))
        self.phi_nu = Mlp([d_b + d_u + heads + d_t + N_RBF, hidden, d_b], child_seed(seed, 2))
        self.phi_h = Mlp([2 * d_b, hidden, d_b], child_seed(seed, 3))
        self.phi_w = Mlp([d_b, 32, 1], child_seed(seed, 4), last_scale=0.1)
        self.phi_m = Mlp([d_b + 3, hidden, 3], child_seed(seed, 5), last_scale=pose_scale)
        self.phi_r = Mlp([d_b + 3, hidden, 3], child_seed(seed, 6), last_scale=pose_scale)

    def forward(self, state: NodeState, t) -> NodeState:
        if state.h_b.shape[-1] != self.d_b or state.h_u.shape[-1] != self.d_u:
            raise DimensionMismatch("node feature widths do not match the layer")
        single = state.h_b.dim() == 2
        if single:
            state = NodeState(*(a[None] for a in (state.h_u, state.x_u, state.h_b, state.rot, state.trans)))
        B, n_b = state.h_b.shape[:2]
        order = _canonical_order(state.x_u, state.h_u)
        x_u = torch.take_along_dim(state.x_u, order[..., None], 1)
        h_u = torch.take_along_dim(state.h_u, order[..., None], 1)

        with torch.no_grad():
            mask = torch.cdist(state.trans, x_u) <= self.gamma
        bb, bi, uj = torch.nonzero(mask, as_tuple=True)
        frame = bb * n_b + bi
        trans = state.trans.reshape(B * n_b, 3)
        diff = x_u[bb, uj] - trans[frame]
        dist = safe_norm(diff)
        rb = rbf(dist)
        g = self.geo(rb)
        h_b = state.h_b.reshape(B * n_b, self.d_b)
        hb = h_b[frame]
        hu = h_u[bb, uj]
        att = attention(hb, hu, g, self.W_Q, self.W_K, self.heads)
        t_enc = time_encoding(torch.as_tensor(t, dtype=DTYPE).reshape(-1).expand(B))[bb]
        nu = self.phi_nu(torch.cat([hb, hu, att, t_enc, rb], -1))

        agg = torch.zeros((B * n_b, self.d_b), dtype=DTYPE).index_add(0, frame, nu)
        h_new = self.phi_h(torch.cat([h_b, agg], -1))

        # invariant summary vector of the neighbourhood, in the residue frame
        count = mask.sum(-1).reshape(-1, 1).clamp_min(1).to(DTYPE)
        w = self.phi_w(nu)
        vec = torch.zeros((B * n_b, 3), dtype=DTYPE).index_add(0, frame, w * diff) / (count * self.gamma)
        rot = state.rot.reshape(B * n_b, 3, 3)
        local = (rot.transpose(-1, -2) @ vec[..., None])[..., 0]

        rot, trans = pose_update(rot, trans, h_new, self.phi_m, self.phi_r, local)
        out = NodeState(
            state.h_u, state.x_u, h_new.reshape(B, n_b, -1), rot.reshape(B, n_b, 3, 3), trans.reshape(B, n_b, 3)
        )
        if single:
            out = NodeState(*(a[0] for a in (out.h_u, out.x_u, out.h_b, out.rot, out.trans)))
        return out


def sfm_layer(state: NodeState, layer: SfmLayer, t) -> NodeState:
    return layer(state, t)


class SfmStack(nn.Module):
    def __init__(self, n_layers=2, seed=0, **kw):
        super().__init__()
        self.layers = nn.ModuleList(SfmLayer(seed=child_seed(seed, 100 + i), **kw) for i in range(n_layers))

    def forward(self, state, t):
        for layer in self.layers:
            state = layer(state, t)
        return state
