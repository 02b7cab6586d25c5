"""Denoising diffusion bridge between paired surface point clouds.

The surface process runs from the ligand surface ``U_0`` at ``t = 0`` to the
receptor surface ``U_T`` at ``t = T``. With signal scale ``alpha`` and noise
variance ``sigma_t^2`` the bridge marginal is Gaussian,

    mean = (alpha_t / alpha_T) (SNR_T / SNR_t) U_T + alpha_t (1 - SNR_T / SNR_t) U_0
    var  = sigma_t^2 (1 - SNR_T / SNR_t),

and generation integrates the time-reversed SDE from the receptor surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DegenerateTime, NonFiniteState, ShapeMismatch, TimeOutOfRange

# The first reverse step evaluates the drift just inside (0, T).
ENDPOINT_OFFSET = 1e-9


@dataclass
class SurfaceCloud:
    """Annotated surface points: positions (N, 3), hbond (N,), hphob (N,)."""

    positions: np.ndarray
    hbond: np.ndarray
    hphob: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        n = len(self.positions)
        self.hbond = np.asarray(self.hbond, dtype=float).reshape(n)
        self.hphob = np.asarray(self.hphob, dtype=float).reshape(n)

    def __len__(self):
        return len(self.positions)

    def subset(self, idx):
        return SurfaceCloud(self.positions[idx], self.hbond[idx], self.hphob[idx])

    def features(self):
        return np.column_stack([self.hbond, self.hphob])


@dataclass(frozen=True)
class BridgeSchedule:
    """Driftless schedule: ``alpha_t = alpha`` constant, ``sigma_t^2 = c t``."""

    T: float = 1.0
    c: float = 1.0
    alpha: float = 1.0

    def __post_init__(self):
        if not (self.T > 0 and self.c > 0 and self.alpha > 0):
            raise ValueError("T, c and alpha must be positive")

    def alpha_t(self, t):
        return self.alpha

    def sigma2(self, t):
        return self.c * t

    def g2(self, t):
        """Squared diffusion coefficient, ``d sigma_t^2 / dt``."""
        return self.c

    def snr(self, t):
        with np.errstate(divide="ignore"):
            return self.alpha_t(t) ** 2 / self.sigma2(t)

    def snr_ratio(self, t):
        """``SNR_T / SNR_t``; zero at ``t = 0`` by continuity."""
        return (self.alpha_t(self.T) ** 2 * self.sigma2(t)) / (self.alpha_t(t) ** 2 * self.sigma2(self.T))

    def check(self, t):
        if not (0.0 <= t <= self.T):
            raise TimeOutOfRange(f"t={t} outside [0, {self.T}]")


@dataclass
class BridgeMarginal:
    mean: np.ndarray
    var: float


def _pair(U0, UT):
    U0 = np.asarray(U0, dtype=float)
    UT = np.asarray(UT, dtype=float)
    if U0.shape != UT.shape:
        raise ShapeMismatch(f"endpoint shapes differ: {U0.shape} vs {UT.shape}")
    return U0, UT


def bridge_marginal(U0, UT, t, sched: BridgeSchedule) -> BridgeMarginal:
    U0, UT = _pair(U0, UT)
    sched.check(t)
    rho = sched.snr_ratio(t)
    a_t = sched.alpha_t(t)
    mean = (a_t / sched.alpha_t(sched.T)) * rho * UT + a_t * (1.0 - rho) * U0
    return BridgeMarginal(mean, sched.sigma2(t) * (1.0 - rho))


def bridge_sample_t(U0, UT, t, sched: BridgeSchedule, rng, eps=None):
    m = bridge_marginal(U0, UT, t, sched)
    if m.var == 0.0:
        return m.mean
    if eps is None:
        eps = rng.standard_normal(m.mean.shape)
    return m.mean + np.sqrt(m.var) * eps


def bridge_score_target(Ut, U0, UT, t, sched: BridgeSchedule):
    """``grad_{U_t} log q(U_t | U_0, U_T)``."""
    m = bridge_marginal(U0, UT, t, sched)
    if m.var <= 0.0:
        raise DegenerateTime(f"bridge variance vanishes at t={t}")
    return -(np.asarray(Ut, dtype=float) - m.mean) / m.var


def score_from_denoised(Ut, U0_hat, UT, t, sched: BridgeSchedule):
    """Score implied by a prediction of the clean endpoint."""
    return bridge_score_target(Ut, U0_hat, UT, t, sched)


def h_drift(Ut, UT, t, sched: BridgeSchedule):
    """Doob term ``grad_{U_t} log p(U_T | U_t)`` for the driftless process."""
    Ut, UT = np.asarray(Ut, dtype=float), np.asarray(UT, dtype=float)
    if Ut.shape != UT.shape:
        raise ShapeMismatch(f"shapes differ: {Ut.shape} vs {UT.shape}")
    if t >= sched.T:
        raise DegenerateTime("Doob drift is singular at t = T")
    sched.check(t)
    return (UT - Ut) / (sched.sigma2(sched.T) - sched.sigma2(t))


def bridge_loss(score_pred, Ut, U0, UT, t, sched: BridgeSchedule, w: Callable | None = None):
    """Weighted denoising score-matching error, averaged over all coordinates."""
    target = bridge_score_target(Ut, U0, UT, t, sched)
    score_pred = np.asarray(score_pred, dtype=float)
    if score_pred.shape != target.shape:
        raise ShapeMismatch(f"prediction {score_pred.shape} vs target {target.shape}")
    weight = 1.0 if w is None else w(t)
    return float(weight * np.mean((score_pred - target) ** 2))


def time_grid(steps, sched: BridgeSchedule):
    if steps < 1:
        raise ValueError("steps must be >= 1")
    return sched.T * np.arange(steps + 1) / steps


def _integrate(UT, drift_fn, steps, sched, rng, return_path, noise=None):
    U = np.array(UT, dtype=float, copy=True)
    ts = time_grid(steps, sched)
    if noise is not None and np.shape(noise) != (steps - 1,) + U.shape:
        raise ShapeMismatch(f"noise must have shape {(steps - 1,) + U.shape}")
    path = [U.copy()] if return_path else None
    for i, k in enumerate(range(steps, 0, -1)):
        t, dt = ts[k], ts[k] - ts[k - 1]
        U = U + sched.g2(t) * drift_fn(U, t) * dt
        if k > 1:
            z = rng.standard_normal(U.shape) if noise is None else noise[i]
            U = U + np.sqrt(sched.g2(t) * dt) * z
        if not np.all(np.isfinite(U)):
            raise NonFiniteState(f"non-finite surface state at t={ts[k - 1]}")
        if return_path:
            path.append(U.copy())
    return (U, np.array(path)) if return_path else U


def bridge_reverse_sample(UT, score_fn, steps, sched: BridgeSchedule, rng, return_path=False, noise=None):
    """Euler-Maruyama for ``dU = -g^2 (s - h) dt + g dW`` from ``t = T`` to 0.

    ``score_fn(U_t, t)`` approximates ``grad log q(U_t | U_T)``. The drift at
    ``t = T`` is evaluated an infinitesimal step inside the interval, where
    ``s - h`` has a finite limit. The last step carries no noise.

    ``noise`` optionally supplies the standard-normal increments, shape
    ``(steps - 1, *UT.shape)``, in integration order (used to couple runs).
    """
    UT = np.asarray(UT, dtype=float)
    t_hi = sched.T * (1.0 - ENDPOINT_OFFSET)

    def drift(U, t):
        t = min(t, t_hi)
        return score_fn(U, t) - h_drift(U, UT, t, sched)

    return _integrate(UT, drift, steps, sched, rng, return_path, noise)


def bridge_reverse_sample_x0(UT, denoise_fn, steps, sched: BridgeSchedule, rng, return_path=False, noise=None):
    """Reverse sampler driven by a clean-endpoint predictor ``denoise_fn(U_t, t)``.

    For ``alpha = 1`` the combination ``s - h`` reduces to
    ``(U0_hat - U_t) / sigma_t^2``, which is regular at ``t = T``; the final
    noise-free step lands exactly on the prediction.
    """
    if sched.alpha != 1.0:
        raise ValueError("the denoiser form assumes alpha = 1")

    def drift(U, t):
        return (denoise_fn(U, t) - U) / sched.sigma2(t)

    return _integrate(np.asarray(UT, dtype=float), drift, steps, sched, rng, return_path, noise)


def farthest_point_sample(points, n, start=0):
    """Indices of ``n`` points chosen greedily to maximize spread."""
    points = np.asarray(points, dtype=float)
    if n >= len(points):
        return np.arange(len(points))
    idx = np.empty(n, dtype=int)
    idx[0] = start
    d = np.linalg.norm(points - points[start], axis=1)
    for i in range(1, n):
        idx[i] = int(np.argmax(d))
        d = np.minimum(d, np.linalg.norm(points - points[idx[i]], axis=1))
    return idx


def resample(cloud: SurfaceCloud, n, rng=None) -> SurfaceCloud:
    """Fixed-size cloud: farthest-point subsampling, or padding by repetition
    with small interpolation toward a random neighbour when too small."""
    if len(cloud) >= n:
        return cloud.subset(farthest_point_sample(cloud.positions, n))
    rng = rng or np.random.default_rng(0)
    extra = rng.integers(0, len(cloud), n - len(cloud))
    partner = rng.integers(0, len(cloud), n - len(cloud))
    lam = rng.uniform(0.0, 0.5, (n - len(cloud), 1))
    pos = cloud.positions[extra] * (1 - lam) + cloud.positions[partner] * lam
    hb = cloud.hbond[extra] * (1 - lam[:, 0]) + cloud.hbond[partner] * lam[:, 0]
    hp = cloud.hphob[extra] * (1 - lam[:, 0]) + cloud.hphob[partner] * lam[:, 0]
    return SurfaceCloud(
        np.vstack([cloud.positions, pos]),
        np.concatenate([cloud.hbond, hb]),
        np.concatenate([cloud.hphob, hp]),
    )


def pair_surfaces(receptor: SurfaceCloud, peptide: SurfaceCloud, n, rng=None):
    """Index-aligned ``(receptor, peptide)`` clouds of ``n`` points each.

    The peptide cloud is resampled to ``n`` points and each point is matched
    to its nearest receptor point, so row ``i`` of both clouds correspond.
    """
    from scipy.spatial import cKDTree

    pep = resample(peptide, n, rng)
    _, nn = cKDTree(receptor.positions).query(pep.positions)
    return receptor.subset(nn), pep


def estimate_normals(points, k=16):
    """Unit normals by local PCA over ``k`` nearest neighbours.

    Signs point away from the cloud centroid, which is outward for the
    cap-shaped interface patches handled here.
    """
    from scipy.spatial import cKDTree

    points = np.asarray(points, dtype=float)
    k = min(k, len(points))
    _, nn = cKDTree(points).query(points, k=k)
    nb = points[nn] - points[nn].mean(axis=1, keepdims=True)
    _, vecs = np.linalg.eigh(np.einsum("nki,nkj->nij", nb, nb))
    normals = vecs[..., 0]
    flip = np.sum(normals * (points - points.mean(axis=0)), axis=1) < 0
    normals[flip] *= -1.0
    return normals
