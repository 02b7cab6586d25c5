import math

import numpy as np
import pytest
import torch

from sfm_harness import D_B, D_U, equivariance_error, random_motion, random_state
from surfbridge.errors import DimensionMismatch, NegativeDistance
from surfbridge.sfmnet import (
    Mlp,
    NodeState,
    SfmLayer,
    SfmStack,
    attention,
    geodesic_embed,
    gradient_check,
    mlp_grad,
    neighborhood,
    pose_update,
    sfm_layer,
    time_encoding,
)
from surfbridge.torch_ops import DTYPE


def test_attention_examples():
    d = 8
    I = torch.eye(d, dtype=DTYPE)
    e1 = torch.zeros(d, dtype=DTYPE)
    e1[0] = 1
    zero = torch.zeros(d, dtype=DTYPE)
    assert float(attention(e1, e1, zero, I, I)[0]) == pytest.approx(1 / math.sqrt(d))
    g = torch.randn(d, dtype=DTYPE)
    hb, hu = torch.randn(d, dtype=DTYPE), torch.randn(d, dtype=DTYPE)
    W_Q, W_K = torch.randn(d, d, dtype=DTYPE), torch.randn(d, d, dtype=DTYPE)
    diff = attention(hb, hu, g, W_Q, W_K) - attention(hb, hu, zero, W_Q, W_K)
    assert float(diff[0]) == pytest.approx(float((hb @ W_Q) @ g) / math.sqrt(d))
    assert float(attention(zero, hu, g, W_Q, W_K)[0]) == 0.0
    with pytest.raises(DimensionMismatch):
        attention(hb, hu, g, W_Q, W_K, heads=3)


def test_multi_head_attention_splits_channels():
    d = 8
    q = torch.randn(d, dtype=DTYPE)
    k = torch.randn(d, dtype=DTYPE)
    I = torch.eye(d, dtype=DTYPE)
    out = attention(q, k, torch.zeros(d, dtype=DTYPE), I, I, heads=2)
    expected = torch.stack([(q[:4] * k[:4]).sum(), (q[4:] * k[4:]).sum()]) / 2.0
    assert torch.allclose(out, expected)


def test_geodesic_embed():
    mlp = Mlp([16, 32, 8], seed=3)
    d = torch.linspace(0, 100, 51, dtype=DTYPE)
    out = geodesic_embed(d, mlp)
    assert torch.isfinite(out).all()
    assert torch.equal(out, geodesic_embed(d, Mlp([16, 32, 8], seed=3)))
    with pytest.raises(NegativeDistance):
        geodesic_embed(torch.tensor([-1.0], dtype=DTYPE), mlp)


def test_neighborhood_planted():
    x_u = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, -5.0], [7.0, 0, 0], [0, 9.0, 0]])
    state = NodeState.from_arrays(np.zeros((5, 4)), x_u, np.zeros((1, 4)), np.eye(3)[None], np.zeros((1, 3)))
    assert sorted(neighborhood(0, state, 6.0).tolist()) == [0, 1, 2]
    assert len(neighborhood(0, state, 1e-9)) == 0
    assert len(neighborhood(0, state, np.inf)) == 5


def test_mlp_grad_linear_closed_form(rng):
    mlp = Mlp([4, 3], seed=1)
    x = rng.normal(size=(5, 4))
    target = rng.normal(size=(5, 3))
    wg, bg, xg = mlp_grad(mlp, x, loss=lambda y: 0.5 * ((y - torch.as_tensor(target)) ** 2).sum())
    err = x @ mlp.weights[0].detach().numpy() + mlp.biases[0].detach().numpy() - target
    assert np.allclose(wg[0], x.T @ err)
    assert np.allclose(bg[0], err.sum(0))
    assert np.allclose(xg, err @ mlp.weights[0].detach().numpy().T)


def test_mlp_grad_of_constant_is_zero(rng):
    mlp = Mlp([4, 8, 2], seed=2)
    wg, bg, xg = mlp_grad(mlp, rng.normal(size=(3, 4)), loss=lambda y: y.sum() * 0.0 + 1.0)
    assert all(np.all(g == 0) for g in wg + bg + [xg])


@pytest.mark.parametrize("seed", range(5))
def test_mlp_gradient_matches_finite_differences(seed):
    mlp = Mlp([6, 16, 16, 3], seed=seed)
    x = torch.randn(4, 6, dtype=DTYPE, generator=torch.Generator().manual_seed(seed))
    err = gradient_check(lambda: (mlp(x) ** 2).sum(), list(mlp.parameters()) + [x], seed=seed)
    assert err < 1e-4


class _SkewedSquare(torch.autograd.Function):
    @staticmethod
    def forward(ctx, x):
        ctx.save_for_backward(x)
        return x**2

    @staticmethod
    def backward(ctx, g):
        (x,) = ctx.saved_tensors
        return g * 2 * x * 1.001


def test_gradient_check_flags_wrong_gradient(rng):
    x = torch.as_tensor(rng.normal(size=6), dtype=DTYPE)
    assert gradient_check(lambda: (x**2).sum(), [x]) < 1e-8
    assert gradient_check(lambda: _SkewedSquare.apply(x).sum(), [x]) > 5e-4


def test_mlp_determinism_and_shape_check():
    a, b = Mlp([3, 5, 2], seed=9), Mlp([3, 5, 2], seed=9)
    assert all(torch.equal(p, q) for p, q in zip(a.parameters(), b.parameters()))
    with pytest.raises(DimensionMismatch):
        a(torch.zeros(4, dtype=DTYPE))


def test_time_encoding_distinguishes_grid():
    enc = time_encoding(torch.arange(1, 1001, dtype=DTYPE) / 1000)
    assert torch.cdist(enc, enc).fill_diagonal_(1.0).min() > 1e-6


def test_pose_update_zero_heads_is_identity(rng):
    phi_m, phi_r = Mlp([4, 3], seed=0), Mlp([4, 3], seed=1)
    with torch.no_grad():
        for p in list(phi_m.parameters()) + list(phi_r.parameters()):
            p.zero_()
    rot = torch.as_tensor(np.stack([np.eye(3)] * 2))
    trans = torch.randn(2, 3, dtype=DTYPE)
    r2, t2 = pose_update(rot, trans, torch.randn(2, 4, dtype=DTYPE), phi_m, phi_r)
    assert torch.equal(t2, trans) and torch.allclose(r2, rot)


def test_pose_update_equivariant_and_stable(rng):
    phi_m, phi_r = Mlp([4, 8, 3], seed=0), Mlp([4, 8, 3], seed=1)
    state = random_state(rng, n_b=3, d_b=4)
    h = state.h_b
    Q, v = random_motion(rng)
    with torch.no_grad():
        ra, ta = pose_update(Q @ state.rot, state.trans @ Q.T + v, h, phi_m, phi_r)
        rb, tb = pose_update(state.rot, state.trans, h, phi_m, phi_r)
        assert torch.allclose(ra, Q @ rb, atol=1e-12)
        assert torch.allclose(ta, tb @ Q.T + v, atol=1e-12)
        rot, trans = state.rot, state.trans
        for _ in range(1000):
            rot, trans = pose_update(rot, trans, h, phi_m, phi_r)
    dev = (rot @ rot.transpose(-1, -2) - torch.eye(3, dtype=DTYPE)).abs().max()
    assert float(dev) < 1e-10


def _stack(n_layers, seed=0):
    return SfmStack(n_layers, seed=seed, d_b=D_B, d_u=D_U, heads=4)


@pytest.mark.parametrize("n_layers", [1, 2, 3, 4])
def test_stack_equivariance(n_layers, rng):
    stack = _stack(n_layers)
    for _ in range(10):
        feat, coord = equivariance_error(stack, random_state(rng), *random_motion(rng))
        assert feat < 1e-6 and coord < 1e-6


def test_layer_permutation_invariance_is_exact(rng):
    layer = SfmLayer(d_b=D_B, d_u=D_U, heads=4, seed=5)
    state = random_state(rng)
    perm = torch.as_tensor(rng.permutation(state.x_u.shape[0]))
    shuffled = NodeState(state.h_u[perm], state.x_u[perm], state.h_b, state.rot, state.trans)
    with torch.no_grad():
        a, b = layer(state, 0.5), layer(shuffled, 0.5)
    assert torch.equal(a.h_b, b.h_b) and torch.equal(a.rot, b.rot) and torch.equal(a.trans, b.trans)


def test_empty_neighbourhoods_are_finite(rng):
    layer = SfmLayer(d_b=D_B, d_u=D_U, heads=4, seed=1)
    state = random_state(rng)
    far = NodeState(state.h_u, state.x_u + 1000.0, state.h_b, state.rot, state.trans)
    with torch.no_grad():
        out = sfm_layer(far, layer, 0.2)
        # with no neighbours the update depends on h_b alone
        expected_h = layer.phi_h(torch.cat([state.h_b, torch.zeros_like(state.h_b)], -1))
    assert torch.allclose(out.h_b, expected_h)
    assert all(torch.isfinite(a).all() for a in (out.h_b, out.rot, out.trans))


def test_batched_equals_single(rng):
    layer = SfmLayer(d_b=D_B, d_u=D_U, heads=4, seed=2)
    s1, s2 = random_state(rng), random_state(rng)
    batch = NodeState(*(torch.stack([a, b]) for a, b in zip(
        (s1.h_u, s1.x_u, s1.h_b, s1.rot, s1.trans), (s2.h_u, s2.x_u, s2.h_b, s2.rot, s2.trans))))
    with torch.no_grad():
        out = layer(batch, torch.tensor([0.3, 0.3], dtype=DTYPE))
        one = layer(s2, 0.3)
    assert torch.equal(out.h_b[1], one.h_b) and torch.equal(out.trans[1], one.trans)


def test_message_gradient_and_invariance(rng):
    layer = SfmLayer(d_b=D_B, d_u=D_U, heads=4, seed=3)
    state = random_state(rng, n_b=3, n_u=30)
    h_b = state.h_b.clone()

    def loss():
        return (layer(NodeState(state.h_u, state.x_u, h_b, state.rot, state.trans), 0.4).h_b ** 2).sum()

    assert gradient_check(loss, [h_b]) < 1e-4
