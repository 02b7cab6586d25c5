"""Backbone frames: idealized atoms, frame -> atoms, and Gram-Schmidt recovery."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometry
from .geom3 import Transform, rot_x, transform_apply

N_IDEAL = np.array([-0.525, 1.363, 0.0])
CA_IDEAL = np.array([0.0, 0.0, 0.0])
C_IDEAL = np.array([1.526, 0.0, 0.0])
O_IDEAL = np.array([0.627, 1.062, 0.0])
# Origin of the oxygen sub-frame: the carbonyl carbon.
PSI_TRANS = np.array([1.526, 0.0, 0.0])
# Idealized tetrahedral C-beta in the residue frame (L-amino acid).
CB_LOCAL = np.array([-0.529, -0.774, -1.205])

DEGENERATE_EPS = 1e-8


@dataclass(frozen=True)
class IdealBackbone:
    n: np.ndarray
    ca: np.ndarray
    c: np.ndarray
    o: np.ndarray


@dataclass
class BackboneAtoms:
    """Per-residue backbone coordinates, each ``(..., 3)``."""

    n: np.ndarray
    ca: np.ndarray
    c: np.ndarray
    o: np.ndarray

    def stack(self):
        """``(..., 4, 3)`` array ordered N, CA, C, O."""
        return np.stack([self.n, self.ca, self.c, self.o], axis=-2)


def ideal_backbone() -> IdealBackbone:
    return IdealBackbone(N_IDEAL.copy(), CA_IDEAL.copy(), C_IDEAL.copy(), O_IDEAL.copy())


def psi_transform(psi) -> Transform:
    psi = np.asarray(psi, dtype=float)
    return Transform(rot_x(psi), np.broadcast_to(PSI_TRANS, psi.shape + (3,)).copy())


def frame_to_atoms(T: Transform, psi) -> BackboneAtoms:
    """Place the idealized backbone with frame ``T``; oxygen rotated by ``psi``.

    The oxygen is ``T . (r_x(psi), C*) . O*``, i.e. the ideal oxygen is rotated
    about the local x axis (the CA-C bond) and shifted onto the carbonyl carbon.
    """
    psi = np.broadcast_to(np.asarray(psi, dtype=float), T.shape)
    o_local = np.einsum("...ij,j->...i", rot_x(psi), O_IDEAL) + PSI_TRANS
    return BackboneAtoms(
        n=transform_apply(T, np.broadcast_to(N_IDEAL, T.shape + (3,))),
        ca=T.trans.copy(),
        c=transform_apply(T, np.broadcast_to(C_IDEAL, T.shape + (3,))),
        o=transform_apply(T, o_local),
    )


def _gram_schmidt(n, ca, c):
    n, ca, c = (np.asarray(a, dtype=float) for a in (n, ca, c))
    w1 = c - ca
    w2 = n - ca
    n1 = np.linalg.norm(w1, axis=-1, keepdims=True)
    if np.any(n1 < DEGENERATE_EPS):
        raise DegenerateGeometry("C coincides with CA")
    e1 = w1 / n1
    u2 = w2 - e1 * np.sum(e1 * w2, axis=-1, keepdims=True)
    n2 = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(n2 < DEGENERATE_EPS):
        raise DegenerateGeometry("N is collinear with CA-C")
    e2 = u2 / n2
    e3 = np.cross(e1, e2)
    return np.stack([e1, e2, e3], axis=-1), ca


def atoms_to_frame(n, ca, c) -> Transform:
    """Right-handed frame at CA: x along CA->C, N in the xy half-plane y > 0."""
    rot, ca = _gram_schmidt(n, ca, c)
    return Transform(rot, ca.copy())


def virtual_cbeta(n, ca, c):
    rot, ca = _gram_schmidt(n, ca, c)
    return np.einsum("...ij,j->...i", rot, CB_LOCAL) + ca


def psi_from_atoms(T: Transform, o):
    """Recover psi from a placed oxygen (inverse of the oxygen placement)."""
    local = np.einsum("...ji,...j->...i", T.rot, np.asarray(o, float) - T.trans) - PSI_TRANS
    ref = np.arctan2(O_IDEAL[2], O_IDEAL[1])
    ang = np.arctan2(local[..., 2], local[..., 1]) - ref
    return np.mod(ang + np.pi, 2 * np.pi) - np.pi
