import numpy as np
import pytest

from oracles import UT as UT_ORACLE
from oracles import endpoint_errors, gaussian_bridge_score
from surfbridge.bridge import (
    BridgeSchedule,
    SurfaceCloud,
    bridge_loss,
    bridge_marginal,
    bridge_reverse_sample,
    bridge_reverse_sample_x0,
    bridge_sample_t,
    bridge_score_target,
    estimate_normals,
    farthest_point_sample,
    h_drift,
    pair_surfaces,
    resample,
)
from surfbridge.errors import DegenerateTime, ShapeMismatch, TimeOutOfRange

SCHED = BridgeSchedule()


@pytest.fixture
def ends(rng):
    return rng.normal(size=(20, 3)), rng.normal(size=(20, 3)) + 4.0


def test_marginal_endpoints_and_midpoint(ends):
    U0, UT = ends
    m0 = bridge_marginal(U0, UT, 0.0, SCHED)
    assert np.array_equal(m0.mean, U0) and m0.var == 0
    mT = bridge_marginal(U0, UT, 1.0, SCHED)
    assert np.allclose(mT.mean, UT, atol=0, rtol=0) and mT.var == 0
    mid = bridge_marginal(U0, UT, 0.5, SCHED)
    assert np.array_equal(mid.mean, (U0 + UT) / 2) and mid.var == 0.25


def test_sample_endpoints_exact(ends, rng):
    U0, UT = ends
    assert np.array_equal(bridge_sample_t(U0, UT, 0.0, SCHED, rng), U0)
    assert np.array_equal(bridge_sample_t(U0, UT, 1.0, SCHED, rng), UT)


@pytest.mark.parametrize("t", [0.1, 0.3, 0.5, 0.7, 0.9])
def test_sample_moments(t, rng):
    U0 = np.array([[0.0, 1.0, -2.0]])
    UT = np.array([[3.0, -1.0, 0.5]])
    N = 100_000
    draws = bridge_sample_t(np.repeat(U0, N, 0), np.repeat(UT, N, 0), t, SCHED, rng)
    m = bridge_marginal(U0, UT, t, SCHED)
    sd = np.sqrt(m.var)
    assert np.all(np.abs(draws.mean(0) - m.mean[0]) < 4 * sd / np.sqrt(N))
    assert np.all(np.abs(draws.var(0) / m.var - 1) < 0.05)


def test_time_out_of_range(ends):
    with pytest.raises(TimeOutOfRange):
        bridge_marginal(*ends, 1.5, SCHED)


def test_score_target(ends, rng):
    U0, UT = ends
    t = 0.4
    m = bridge_marginal(U0, UT, t, SCHED)
    assert np.allclose(bridge_score_target(m.mean, U0, UT, t, SCHED), 0)
    Ut = m.mean + rng.normal(size=m.mean.shape)

    def logq(U):
        return -0.5 * np.sum((U - m.mean) ** 2) / m.var

    h = 1e-5
    fd = np.zeros_like(Ut)
    for idx in np.ndindex(Ut.shape):
        e = np.zeros_like(Ut)
        e[idx] = h
        fd[idx] = (logq(Ut + e) - logq(Ut - e)) / (2 * h)
    s = bridge_score_target(Ut, U0, UT, t, SCHED)
    assert np.abs(fd - s).max() / np.abs(s).max() < 1e-6
    # linear in the offset from the mean
    assert np.allclose(bridge_score_target(m.mean + 2 * (Ut - m.mean), U0, UT, t, SCHED), 2 * s)
    with pytest.raises(DegenerateTime):
        bridge_score_target(Ut, U0, UT, 0.0, SCHED)


def test_h_drift(ends, rng):
    _, UT = ends
    assert np.allclose(h_drift(UT, UT, 0.3, SCHED), 0)
    gap = np.ones_like(UT)
    mags = [np.abs(h_drift(UT - gap, UT, 1 - e, SCHED)).max() for e in (1e-2, 1e-3, 1e-4)]
    assert mags[1] / mags[0] == pytest.approx(10) and mags[2] / mags[1] == pytest.approx(10)
    with pytest.raises(DegenerateTime):
        h_drift(UT, UT, 1.0, SCHED)
    with pytest.raises(ShapeMismatch):
        h_drift(UT[:3], UT, 0.2, SCHED)


def test_h_transform_pins_endpoint(rng):
    # forward Brownian motion with the Doob drift ends at the target
    steps = 2000
    target = np.array([[2.0, -1.0, 0.5]])
    U = np.zeros((500, 3))
    dt = 1.0 / steps
    for k in range(steps - 1):
        t = k * dt
        U = U + h_drift(U, np.repeat(target, 500, 0), t, SCHED) * dt + np.sqrt(dt) * rng.standard_normal(U.shape)
    U = U + h_drift(U, np.repeat(target, 500, 0), (steps - 1) * dt, SCHED) * dt
    assert np.abs(U - target).max() < 3 * np.sqrt(dt)


def test_bridge_loss_properties(ends, rng):
    U0, UT = ends
    t = 0.6
    Ut = bridge_sample_t(U0, UT, t, SCHED, rng)
    target = bridge_score_target(Ut, U0, UT, t, SCHED)
    assert bridge_loss(target, Ut, U0, UT, t, SCHED) == 0.0
    d = rng.normal(size=target.shape)
    l1 = bridge_loss(target + d, Ut, U0, UT, t, SCHED)
    l2 = bridge_loss(target + 2 * d, Ut, U0, UT, t, SCHED)
    assert l1 > 0 and l2 == pytest.approx(4 * l1)
    assert bridge_loss(target + d, Ut, U0, UT, t, SCHED, w=lambda s: s**2) == pytest.approx(t**2 * l1)


def test_reverse_sampler_oracle():
    res = endpoint_errors([500, 1000])
    assert res[1000]["mean_error"] < 0.05
    assert res[1000]["strong_error"] < res[500]["strong_error"]
    assert res[1000]["std"] == pytest.approx(0.3, rel=0.1)


def test_reverse_sampler_single_step_is_finite(rng):
    U = bridge_reverse_sample(UT_ORACLE, gaussian_bridge_score, 1, SCHED, rng)
    assert np.all(np.isfinite(U))


def test_x0_sampler_lands_on_prediction(rng):
    target = rng.normal(size=(5, 3))
    UT = rng.normal(size=(5, 3))
    U, path = bridge_reverse_sample_x0(UT, lambda U, t: target, 50, SCHED, rng, return_path=True)
    assert np.allclose(U, target)
    assert path.shape == (51, 5, 3) and np.array_equal(path[0], UT)


def test_fps_and_resample(rng):
    pts = rng.normal(size=(300, 3))
    idx = farthest_point_sample(pts, 40)
    assert len(set(idx.tolist())) == 40
    cloud = SurfaceCloud(pts, rng.normal(size=300), rng.normal(size=300))
    assert len(resample(cloud, 40)) == 40
    big = resample(cloud.subset(np.arange(10)), 25, rng)
    assert len(big) == 25 and np.array_equal(big.positions[:10], pts[:10])
    rec, pep = pair_surfaces(cloud, cloud.subset(np.arange(50)), 30, rng)
    assert len(rec) == len(pep) == 30


def test_estimate_normals_on_sphere(rng):
    d = rng.normal(size=(2000, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    cap = d[d[:, 2] > 0.3]
    n = estimate_normals(5 * cap)
    assert np.mean(np.sum(n * cap, axis=1)) > 0.99
