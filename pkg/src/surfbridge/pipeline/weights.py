"""Time-dependent loss weights for the rotation and translation terms."""

from __future__ import annotations

import functools
import io

import numpy as np

from ..errors import InvalidTime
from ..kernels.igso3 import cache_dir, default_table, dlog_density

LAMBDA_GRID_SIZE = 200
LAMBDA_SAMPLES = 100_000
LAMBDA_T_MIN = 1e-3
LAMBDA_T_MAX = 20.0
LAMBDA_SEED = 2024
LAMBDA_MAGIC = b"LAMBDAR1"
# omega nodes used to interpolate d log f when averaging over samples
DLOG_NODES = 4001


def _check_t(t):
    if not (np.isfinite(t) and t > 0):
        raise InvalidTime(f"t must be positive and finite, got {t}")


def mean_sq_rotation_score(t, n_samples, rng, table=None):
    """Monte-Carlo ``E |grad log p_t(r_t | r_0)|^2`` under the IGSO(3) kernel.

    The score norm equals ``|d log f / d omega|`` at the sampled angle.
    """
    _check_t(t)
    table = table or default_table()
    omega = table.sample_angle(t, rng, n_samples)
    nodes = np.linspace(0.0, np.pi, DLOG_NODES)
    with np.errstate(divide="ignore", invalid="ignore"):
        d = dlog_density(nodes, t)
    # for tiny t the density underflows near pi, where no samples land anyway
    ok = np.isfinite(d)
    return float(np.mean(np.interp(omega, nodes[ok], d[ok]) ** 2))


def mean_sq_rotation_score_quadrature(t, n=20001):
    """Deterministic reference for :func:`mean_sq_rotation_score`."""
    from ..kernels.igso3 import angle_marginal_pdf

    omega = np.linspace(0.0, np.pi, n)
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.nan_to_num(angle_marginal_pdf(omega, t) * dlog_density(omega, t) ** 2)
    return float(np.trapezoid(f, omega) / np.trapezoid(angle_marginal_pdf(omega, t), omega))


@functools.lru_cache(maxsize=1)
def lambda_r_table():
    """``(t_grid, lambda)`` built once and stored next to the IGSO(3) table."""
    d = cache_dir()
    path = d / "lambda_r_v1.bin" if d else None
    if path is not None and path.exists():
        blob = path.read_bytes()
        if blob.startswith(LAMBDA_MAGIC):
            arr = np.load(io.BytesIO(blob[len(LAMBDA_MAGIC):]))
            return arr[0], arr[1]
    t_grid = np.geomspace(LAMBDA_T_MIN, LAMBDA_T_MAX, LAMBDA_GRID_SIZE)
    lam = np.array([
        1.0 / mean_sq_rotation_score(t, LAMBDA_SAMPLES, np.random.default_rng([LAMBDA_SEED, i]))
        for i, t in enumerate(t_grid)
    ])
    if path is not None:
        buf = io.BytesIO()
        np.save(buf, np.stack([t_grid, lam]))
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(LAMBDA_MAGIC + buf.getvalue())
        tmp.replace(path)
    return t_grid, lam


def lambda_r(t):
    """Rotation weight ``1 / E|score|^2``, log-log interpolated from the cache."""
    _check_t(t)
    t_grid, lam = lambda_r_table()
    if not t_grid[0] <= t <= t_grid[-1]:
        rng = np.random.default_rng([LAMBDA_SEED, int(np.float64(t).view(np.int64) & 0xFFFFFFFF)])
        return 1.0 / mean_sq_rotation_score(t, LAMBDA_SAMPLES, rng)
    return float(np.exp(np.interp(np.log(t), np.log(t_grid), np.log(lam))))


def lambda_m(t):
    """Translation weight ``(1 - e^{-t}) / e^{-t/2}``."""
    _check_t(t)
    return float(-np.expm1(-t) * np.exp(t / 2.0))
