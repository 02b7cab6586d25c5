"""Isotropic Gaussian on SO(3): heat-kernel density, score, and sampler.

The density of the relative rotation angle ``omega`` after Brownian motion
for time ``t`` is the character series

    f(omega, t) = sum_l (2l + 1) exp(-l (l + 1) t / 2) chi_l(omega),
    chi_l(omega) = sin((l + 1/2) omega) / sin(omega / 2),

taken with respect to the Haar measure, whose angle marginal is
``(1 - cos omega) / pi``. For small ``t`` the series cancels badly where
the density is tiny, so there the equivalent image sum

    f = sqrt(2 pi) t^{-3/2} e^{t/8} / sin(omega/2)
        * sum_n (-1)^n (omega + 2 pi n) exp(-(omega + 2 pi n)^2 / (2 t))

is used instead (only when ``L`` is left to the default).
"""

from __future__ import annotations

import functools
import io
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import InvalidTime
from ..geom3 import so3_exp, so3_log

TAIL_TOL = 1e-8
MIN_ORDER = 10
# Below this angle the sin-ratio loses digits; use the cosine-sum form.
SERIES_SWITCH = 1e-3
ZERO_SCORE_ANGLE = 1e-6
# image sum region: t below IMAGE_T and angles above IMAGE_MIN_ANGLE
IMAGE_T = 1.0
IMAGE_MIN_ANGLE = 0.05
N_IMAGES = 3

N_OMEGA = 1000
N_T = 100
T_MIN = 1e-3
T_MAX = 20.0

CACHE_MAGIC = b"IGSO3TAB"
CACHE_VERSION = 1


def _check_t(t):
    if not (np.isfinite(t) and t > 0):
        raise InvalidTime(f"t must be positive and finite, got {t}")


def truncation_order(t, tol=TAIL_TOL, min_order=MIN_ORDER):
    """Smallest ``L >= min_order`` with tail bound ``(2L+3)^2 e^{-L(L+1)t/2} < tol``."""
    _check_t(t)
    L = min_order
    while (2 * L + 3) ** 2 * np.exp(-L * (L + 1) * t / 2.0) >= tol:
        L += max(1, L // 8)
    return L


def _characters(omega, L):
    """``chi_l(omega)`` and its derivative, shapes ``(n, L + 1)``."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    ell = np.arange(L + 1)
    chi = np.empty((omega.size, L + 1))
    dchi = np.empty_like(chi)

    big = omega >= SERIES_SWITCH
    if np.any(big):
        w = omega[big, None]
        a = ell + 0.5
        s, c = np.sin(w / 2.0), np.cos(w / 2.0)
        num, dnum = np.sin(a * w), a * np.cos(a * w)
        chi[big] = num / s
        dchi[big] = (dnum * s - 0.5 * num * c) / s**2
    if np.any(~big):
        # chi_l = 1 + 2 sum_{m<=l} cos(m w), exact and cancellation-free at w -> 0
        w = omega[~big, None]
        m = ell[1:]
        chi[~big, 0] = 1.0
        dchi[~big, 0] = 0.0
        chi[~big, 1:] = 1.0 + 2.0 * np.cumsum(np.cos(m * w), axis=1)
        dchi[~big, 1:] = -2.0 * np.cumsum(m * np.sin(m * w), axis=1)
    return chi, dchi


def _coefficients(t, L):
    ell = np.arange(L + 1)
    return (2 * ell + 1) * np.exp(-ell * (ell + 1) * t / 2.0)


def image_sums(omega, t, n_images=N_IMAGES):
    """``S`` and ``dS/domega`` of the image sum, both scaled by ``exp(omega^2 / 2t)``."""
    w = np.asarray(omega, dtype=float)[..., None]
    n = np.arange(-n_images, n_images + 1)
    y = w + 2.0 * np.pi * n
    e = np.where(n % 2, -1.0, 1.0) * np.exp(-(y * y - w * w) / (2.0 * t))
    return (y * e).sum(-1), ((1.0 - y * y / t) * e).sum(-1)


def _use_images(omega, t, L):
    return (np.asarray(omega) >= IMAGE_MIN_ANGLE) & (L is None and t < IMAGE_T)


def _series(omega, t, L):
    L = truncation_order(t) if L is None else int(L)
    chi, dchi = _characters(omega, L)
    coef = _coefficients(t, L)
    return chi @ coef, dchi @ coef


def igso3_density(omega, t, L=None):
    """Heat-kernel density ``f(omega, t)`` w.r.t. the Haar measure."""
    _check_t(t)
    omega = np.asarray(omega, dtype=float)
    f, _ = _series(omega, t, L)
    f = f.reshape(omega.shape)
    img = _use_images(omega, t, L)
    if np.any(img):
        w = omega[img]
        S, _ = image_sums(w, t)
        f[img] = np.sqrt(2 * np.pi) * t**-1.5 * np.exp(t / 8.0 - w * w / (2.0 * t)) * S / np.sin(w / 2.0)
    return f[()] if f.ndim == 0 else f


def igso3_density_domega(omega, t, L=None):
    return igso3_density(omega, t, L) * dlog_density(omega, t, L)


def dlog_density(omega, t, L=None):
    """``d/domega log f(omega, t)``."""
    _check_t(t)
    omega = np.asarray(omega, dtype=float)
    f, df = _series(omega, t, L)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (df / f).reshape(omega.shape)
    img = _use_images(omega, t, L)
    if np.any(img):
        w = omega[img]
        S, dS = image_sums(w, t)
        out[img] = dS / S - 0.5 / np.tan(w / 2.0)
    return out[()] if out.ndim == 0 else out


def angle_marginal_pdf(omega, t, L=None):
    omega = np.asarray(omega, dtype=float)
    return igso3_density(omega, t, L) * (1.0 - np.cos(omega)) / np.pi


def igso3_score(r0, rt, t):
    """Score of ``p(r_t | r_0)`` as a tangent vector in the body frame of ``r_t``.

    The tangent matrix is ``r_t @ skew(score)``; the vector is the relative
    log scaled by ``(df/domega) / f / omega``, and zero at coincidence.
    """
    _check_t(t)
    rel = np.swapaxes(np.asarray(r0, float), -1, -2) @ np.asarray(rt, float)
    v = so3_log(rel)
    omega = np.linalg.norm(v, axis=-1)
    safe = np.where(omega < ZERO_SCORE_ANGLE, 1.0, omega)
    ratio = np.where(omega < ZERO_SCORE_ANGLE, 0.0, dlog_density(safe, t) / safe)
    return v * ratio[..., None]


def _cdf_row(omega_grid, t):
    pdf = angle_marginal_pdf(omega_grid, t)
    h = np.diff(omega_grid)
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * h * (pdf[1:] + pdf[:-1]))])
    return pdf, cdf


@dataclass(frozen=True)
class Igso3Table:
    """Tabulated density and angle CDF on a (t, omega) grid.

    Rows are indexed by ``t_grid``; ``cdf`` is the raw cumulative trapezoid
    integral of the angle marginal (ends at 1 up to quadrature error).
    """

    t_grid: np.ndarray
    omega_grid: np.ndarray
    density: np.ndarray
    cdf: np.ndarray

    @classmethod
    def build(cls, t_grid=None, n_omega=N_OMEGA):
        if t_grid is None:
            t_grid = np.geomspace(T_MIN, T_MAX, N_T)
        t_grid = np.asarray(t_grid, dtype=float)
        omega = np.linspace(0.0, np.pi, n_omega + 1)
        dens = np.empty((len(t_grid), len(omega)))
        cdf = np.empty_like(dens)
        for i, t in enumerate(t_grid):
            dens[i] = igso3_density(omega, t)
            _, cdf[i] = _cdf_row(omega, t)
        for a in (t_grid, omega, dens, cdf):
            a.setflags(write=False)
        return cls(t_grid, omega, dens, cdf)

    def cdf_row(self, t):
        """Angle CDF at ``t``: the stored row on-grid, exact summation off-grid."""
        _check_t(t)
        hit = np.flatnonzero(self.t_grid == t)
        if hit.size:
            return self.cdf[hit[0]]
        return _offgrid_cdf(float(t), len(self.omega_grid) - 1)

    def sample_angle(self, t, rng, size=()):
        cdf = self.cdf_row(t)
        u = rng.random(size) * cdf[-1]
        return np.interp(u, cdf, self.omega_grid)

    def sample(self, t, rng, size=()):
        size = (size,) if np.isscalar(size) else tuple(size)
        omega = self.sample_angle(t, rng, size)
        axis = rng.standard_normal(size + (3,))
        axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
        return so3_exp(axis * omega[..., None])

    # binary cache: magic | version | n_t | n_omega | t_grid | omega | density | cdf
    def to_bytes(self):
        buf = io.BytesIO()
        buf.write(CACHE_MAGIC)
        buf.write(struct.pack("<III", CACHE_VERSION, len(self.t_grid), len(self.omega_grid)))
        for a in (self.t_grid, self.omega_grid, self.density, self.cdf):
            buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, blob):
        if blob[: len(CACHE_MAGIC)] != CACHE_MAGIC:
            raise ValueError("not an IGSO(3) table blob")
        off = len(CACHE_MAGIC)
        version, n_t, n_w = struct.unpack_from("<III", blob, off)
        if version != CACHE_VERSION:
            raise ValueError(f"unsupported table version {version}")
        off += 12
        arrays = []
        for count, shape in ((n_t, (n_t,)), (n_w, (n_w,)), (n_t * n_w, (n_t, n_w)), (n_t * n_w, (n_t, n_w))):
            a = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape).astype(float)
            a.setflags(write=False)
            arrays.append(a)
            off += 8 * count
        return cls(*arrays)


@functools.lru_cache(maxsize=4096)
def _offgrid_cdf(t, n_omega):
    omega = np.linspace(0.0, np.pi, n_omega + 1)
    _, cdf = _cdf_row(omega, t)
    cdf.setflags(write=False)
    return cdf


def cache_dir():
    env = os.environ.get("SURFBRIDGE_CACHE_DIR")
    return Path(env) if env else None


@functools.lru_cache(maxsize=1)
def default_table() -> Igso3Table:
    """Shared table, read from ``$SURFBRIDGE_CACHE_DIR`` when present there."""
    d = cache_dir()
    path = d / f"igso3_v{CACHE_VERSION}.bin" if d else None
    if path is not None and path.exists():
        try:
            return Igso3Table.from_bytes(path.read_bytes())
        except ValueError:
            pass
    table = Igso3Table.build()
    if path is not None:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_bytes(table.to_bytes())
        tmp.replace(path)
    return table


def igso3_sample(t, rng, size=(), table: Igso3Table | None = None):
    """Rotations whose angle follows the IGSO(3) marginal and axis is uniform."""
    _check_t(t)
    return (table or default_table()).sample(t, rng, size)
