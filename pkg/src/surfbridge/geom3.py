"""Rotations and rigid transforms on SO(3) / SE(3).

Rotations are plain ``(..., 3, 3)`` float arrays; axis-angle vectors are
``(..., 3)`` arrays whose norm is the rotation angle. Every function accepts
leading batch dimensions and broadcasts them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this angle so3_log/so3_exp switch to Taylor forms; within this distance
# of pi so3_log reads the axis off the symmetric part.
SMALL_ANGLE = 1e-6


@dataclass(frozen=True)
class Transform:
    """Rigid motion ``p -> rot @ p + trans``.

    ``rot`` has shape ``(..., 3, 3)`` and ``trans`` has shape ``(..., 3)``.
    """

    rot: np.ndarray
    trans: np.ndarray

    @classmethod
    def identity(cls, shape=()):
        rot = np.broadcast_to(np.eye(3), tuple(shape) + (3, 3)).copy()
        return cls(rot, np.zeros(tuple(shape) + (3,)))

    @property
    def shape(self):
        return self.trans.shape[:-1]

    def __getitem__(self, idx):
        return Transform(self.rot[idx], self.trans[idx])

    def __len__(self):
        return len(self.trans)


def skew(v):
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def vee(m):
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def rot_x(theta):
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = 1.0
    out[..., 1, 1] = c
    out[..., 1, 2] = -s
    out[..., 2, 1] = s
    out[..., 2, 2] = c
    return out


def rot_z(theta):
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    out = np.zeros(theta.shape + (3, 3))
    out[..., 0, 0] = c
    out[..., 0, 1] = -s
    out[..., 1, 0] = s
    out[..., 1, 1] = c
    out[..., 2, 2] = 1.0
    return out


def transform_apply(T: Transform, p):
    """Map points ``p`` (``(..., 3)``) through ``T``."""
    p = np.asarray(p, dtype=float)
    return np.einsum("...ij,...j->...i", T.rot, p) + T.trans


def transform_compose(T1: Transform, T2: Transform) -> Transform:
    """``T1 . T2``: apply ``T2`` first, then ``T1``."""
    rot = T1.rot @ T2.rot
    trans = np.einsum("...ij,...j->...i", T1.rot, T2.trans) + T1.trans
    return Transform(rot, trans)


def transform_inverse(T: Transform) -> Transform:
    rinv = np.swapaxes(T.rot, -1, -2)
    return Transform(rinv, -np.einsum("...ij,...j->...i", rinv, T.trans))


def so3_exp(v):
    """Rodrigues map from axis-angle vectors to rotation matrices."""
    v = np.asarray(v, dtype=float)
    theta = np.linalg.norm(v, axis=-1)[..., None, None]
    S = skew(v)
    S2 = S @ S
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / safe**2)
    return np.eye(3) + a * S + b * S2


def so3_log(R):
    """Principal logarithm of rotation matrices, returned as axis-angle.

    The angle lies in ``[0, pi]``. Near the identity a Taylor expansion of
    ``theta / (2 sin theta)`` is used; near ``pi`` the axis is taken from the
    dominant column of the symmetric part, with its sign fixed by the
    antisymmetric part when that is still informative.
    """
    R = np.asarray(R, dtype=float)
    batch = R.shape[:-2]
    R = R.reshape((-1, 3, 3))
    anti = vee(R - np.swapaxes(R, -1, -2))  # 2 sin(theta) * axis
    sin_t = 0.5 * np.linalg.norm(anti, axis=-1)
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    theta = np.arctan2(sin_t, cos_t)

    out = np.empty((R.shape[0], 3))
    small = theta < SMALL_ANGLE
    near_pi = (np.pi - theta) < SMALL_ANGLE
    mid = ~(small | near_pi)

    out[small] = 0.5 * (1.0 + theta[small, None] ** 2 / 6.0) * anti[small]
    out[mid] = (theta[mid] / (2.0 * np.sin(theta[mid])))[:, None] * anti[mid]

    for i in np.flatnonzero(near_pi):
        sym = 0.5 * (R[i] + R[i].T) - cos_t[i] * np.eye(3)  # (1 - cos) a a^T
        k = int(np.argmax(np.diag(sym)))
        axis = sym[:, k] / np.sqrt(max(sym[k, k], 1e-300))
        axis /= np.linalg.norm(axis)
        if axis @ anti[i] < 0.0:
            axis = -axis
        out[i] = theta[i] * axis
    return out.reshape(batch + (3,))


def rotation_angle(R):
    """Angle of rotation, ``[0, pi]``."""
    R = np.asarray(R, dtype=float)
    sin_t = 0.5 * np.linalg.norm(vee(R - np.swapaxes(R, -1, -2)), axis=-1)
    cos_t = 0.5 * (np.trace(R, axis1=-2, axis2=-1) - 1.0)
    return np.arctan2(sin_t, cos_t)


def geodesic_angle(r1, r2):
    """Length of the shortest geodesic between two rotations."""
    return rotation_angle(np.swapaxes(np.asarray(r1, float), -1, -2) @ r2)


def orthonormalize(R):
    """Nearest proper rotation (polar factor) of each matrix."""
    u, _, vt = np.linalg.svd(R)
    d = np.sign(np.linalg.det(u @ vt))
    u = u.copy()
    u[..., :, -1] *= d[..., None]
    return u @ vt


def random_rotation(rng, size=()):
    """Haar-uniform rotations from normalized Gaussian quaternions."""
    size = (size,) if np.isscalar(size) else tuple(size)
    q = rng.standard_normal(size + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    return quat_to_rot(q)


def quat_to_rot(q):
    w, x, y, z = np.moveaxis(np.asarray(q, dtype=float), -1, 0)
    out = np.empty(q.shape[:-1] + (3, 3))
    out[..., 0, 0] = 1 - 2 * (y * y + z * z)
    out[..., 0, 1] = 2 * (x * y - z * w)
    out[..., 0, 2] = 2 * (x * z + y * w)
    out[..., 1, 0] = 2 * (x * y + z * w)
    out[..., 1, 1] = 1 - 2 * (x * x + z * z)
    out[..., 1, 2] = 2 * (y * z - x * w)
    out[..., 2, 0] = 2 * (x * z - y * w)
    out[..., 2, 1] = 2 * (y * z + x * w)
    out[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return out


def random_transform(rng, size=(), scale=10.0):
    size = (size,) if np.isscalar(size) else tuple(size)
    return Transform(random_rotation(rng, size), scale * rng.standard_normal(size + (3,)))


def rotation_error(R1, R2):
    """Max abs entrywise difference, the deviation measure used in tests."""
    return float(np.max(np.abs(np.asarray(R1) - np.asarray(R2))))
