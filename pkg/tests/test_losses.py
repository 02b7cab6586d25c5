import numpy as np
import pytest
import torch

from surfbridge.errors import InvalidTime, NonFiniteComponent, ShapeMismatch
from surfbridge.geom3 import random_rotation, so3_exp
from surfbridge.kernels.igso3 import igso3_score
from surfbridge.pipeline.config import LossWeights, check_finite_components
from surfbridge.pipeline.losses import (
    loss_ang,
    loss_rotation,
    loss_surface,
    loss_total,
    loss_translation,
    loss_type,
)
from surfbridge.pipeline.weights import (
    lambda_m,
    lambda_r,
    lambda_r_table,
    mean_sq_rotation_score,
    mean_sq_rotation_score_quadrature,
)


def test_lambda_m():
    assert lambda_m(np.log(2)) == pytest.approx(np.sqrt(2) / 2, abs=1e-12)
    assert lambda_m(1e-12) < 1e-11
    grid = np.geomspace(1e-4, 20, 400)
    assert np.all(np.diff([lambda_m(t) for t in grid]) > 0)
    with pytest.raises(InvalidTime):
        lambda_m(0.0)


def test_lambda_r_positive_and_cached():
    t_grid, lam = lambda_r_table()
    assert len(t_grid) == 200 and np.all(lam > 0)
    assert lambda_r(t_grid[17]) == pytest.approx(lam[17], rel=1e-12)
    for t in (0.01, 0.3, 2.0, 15.0):
        assert lambda_r(t) > 0


def test_lambda_r_matches_fresh_estimates(rng):
    for t in (0.05, 0.5, 3.0):
        ref = 1.0 / mean_sq_rotation_score_quadrature(t)
        assert lambda_r(t) == pytest.approx(ref, rel=0.02)
    fresh = 1.0 / mean_sq_rotation_score(1.0, 1_000_000, rng)
    assert lambda_r(1.0) == pytest.approx(fresh, rel=0.02)


def test_lambda_r_large_t_near_uniform_kernel(rng):
    # the kernel is almost flat: small scores, large weight
    t = 15.0
    assert lambda_r(t) == pytest.approx(1.0 / mean_sq_rotation_score(t, 100_000, rng), rel=0.02)
    assert lambda_r(t) > 1e3


def test_rotation_loss(rng):
    r0 = random_rotation(rng, 6)
    rt = r0 @ so3_exp(0.3 * rng.normal(size=(6, 3)))
    t = 0.4
    target = igso3_score(r0, rt, t)
    assert float(loss_rotation(target, r0, rt, t)) == pytest.approx(0.0, abs=1e-20)
    d = rng.normal(size=target.shape)
    l1 = float(loss_rotation(target + d, r0, rt, t))
    assert l1 > 0
    assert float(loss_rotation(target + 3 * d, r0, rt, t)) == pytest.approx(9 * l1)
    # the score is a body-frame tangent, so a global left rotation leaves it unchanged
    Q = random_rotation(rng)
    assert float(loss_rotation(target + d, Q @ r0, Q @ rt, t)) == pytest.approx(l1, rel=1e-10)
    with pytest.raises(InvalidTime):
        loss_rotation(target, r0, rt, 0.0)
    with pytest.raises(ShapeMismatch):
        loss_rotation(target[:2], r0, rt, t)


def test_rotation_loss_per_example_times(rng):
    r0 = random_rotation(rng, (2, 4))
    rt = r0 @ so3_exp(0.2 * rng.normal(size=(2, 4, 3)))
    ts = np.array([0.2, 1.5])
    pred = rng.normal(size=(2, 4, 3))
    joint = float(loss_rotation(pred, r0, rt, ts))
    parts = [float(loss_rotation(pred[i], r0[i], rt[i], ts[i])) for i in range(2)]
    assert joint == pytest.approx(np.mean(parts))


def test_translation_loss():
    m0 = np.zeros((4, 3))
    assert float(loss_translation(m0, m0)) == 0
    m_hat = m0.copy()
    m_hat[0] = [1, 0, 0]
    assert float(loss_translation(m_hat[:1], m0[:1])) == 1.0
    assert float(loss_translation(m_hat, m0)) == 0.25


def test_type_and_angle_losses(rng):
    eps = rng.normal(size=(5, 20))
    assert float(loss_type(eps, eps)) == 0
    a = rng.normal(size=(3, 5))
    assert float(loss_ang(a + 2 * np.pi, a)) == pytest.approx(0, abs=1e-20)
    one = np.zeros((1, 1))
    assert float(loss_ang(one + np.pi, one)) == pytest.approx(np.pi**2)


def test_surface_loss(rng):
    U = rng.normal(size=(10, 3))
    f = rng.normal(size=(10, 2))
    assert float(loss_surface(U, U, f, f)) == 0
    assert float(loss_surface(U + 1, U)) == pytest.approx(1.0)
    assert float(loss_surface(U, U, f + 2, f)) == pytest.approx(4.0)


def test_total_weights():
    w = LossWeights()
    assert np.array_equal(w.as_array(), [0.5, 1, 1, 1, 1])
    assert float(loss_total([0.0] * 5, w)) == 0
    base = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    tot = float(loss_total(list(base), w))
    for i, mu in enumerate(w.as_array()):
        bumped = base.copy()
        bumped[i] *= 3
        assert float(loss_total(list(bumped), w)) - tot == pytest.approx(2 * base[i] * mu)
    with pytest.raises(NonFiniteComponent):
        loss_total([1.0, np.nan, 0, 0, 0], w)
    with pytest.raises(NonFiniteComponent):
        check_finite_components([1.0, np.inf, 0, 0, 0])


def test_losses_accept_tensors():
    a = torch.zeros(3, 3, dtype=torch.float64, requires_grad=True)
    loss_translation(a, torch.ones(3, 3, dtype=torch.float64)).backward()
    assert torch.allclose(a.grad, torch.full((3, 3), -2 / 3, dtype=torch.float64))
