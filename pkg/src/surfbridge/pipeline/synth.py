"""Procedural receptor/peptide complexes for desk-scale training and tests.

A receptor is a smoothly deformed sphere; its surface patch around a random
pocket direction carries smooth hbond/hphob fields. The peptide surface is
the same patch pushed outward along the normals by a fixed offset, so the two
clouds are index-paired by construction. The peptide backbone runs along a
gently curving path just above the peptide surface; residue types and
torsions are functions of the local surface chemistry plus noise, so every
channel has something learnable.
"""

from __future__ import annotations

import numpy as np

from ..bridge import SurfaceCloud, farthest_point_sample
from ..frames import CB_LOCAL, atoms_to_frame
from ..geom3 import so3_exp
from ..kernels.torus import wrap
from ..structure import N_TORSIONS, Chain, ComplexPair

SURFACE_OFFSET = 3.5
BACKBONE_DEPTH = 1.5
CA_SPACING = 3.8
PATCH_ANGLE = np.deg2rad(50.0)
SITE_ANGLE = np.deg2rad(70.0)
TORSION_NOISE = 0.3

# fixed per-type torsion means, shared by every generated dataset
TORSION_MEANS = wrap(np.random.default_rng(12345).uniform(-np.pi, np.pi, (20, N_TORSIONS)))


def fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z**2)
    phi = np.pi * (1.0 + 5**0.5) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


class Blob:
    """Star-shaped surface ``rho(u) u`` with Gaussian bumps on the sphere."""

    def __init__(self, rng, radius=None, n_bumps=6, kappa=4.0):
        self.radius = rng.uniform(11.0, 14.0) if radius is None else radius
        self.centers = _unit(rng.standard_normal((n_bumps, 3)))
        self.amps = rng.uniform(-0.12, 0.12, n_bumps)
        self.kappa = kappa

    def rho(self, u):
        bumps = np.exp(self.kappa * (u @ self.centers.T - 1.0)) @ self.amps
        return self.radius * (1.0 + bumps)

    def point(self, u):
        return self.rho(u)[:, None] * u

    def normal(self, p, h=1e-5):
        """Outward unit normal from the gradient of ``|x| - rho(x / |x|)``."""
        def F(x):
            r = np.linalg.norm(x, axis=-1)
            return r - self.rho(x / r[:, None])

        grad = np.column_stack([(F(p + h * e) - F(p - h * e)) / (2 * h) for e in np.eye(3)])
        return _unit(grad)


class ScalarField:
    """Smooth field on the sphere squashed into ``(-1, 1)``."""

    def __init__(self, rng, n_bumps=5, kappa=3.0, scale=1.5):
        self.centers = _unit(rng.standard_normal((n_bumps, 3)))
        self.amps = rng.normal(0.0, scale, n_bumps)
        self.kappa = kappa

    def __call__(self, u):
        return np.tanh(np.exp(self.kappa * (u @ self.centers.T - 1.0)) @ self.amps)


def _unit(v):
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _rotate(v, axis, angle):
    axis = _unit(axis)
    c, s = np.cos(angle), np.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * (axis @ v) * (1 - c)


def residue_type(hbond, hphob):
    """Type index from quantized chemistry: 4 hbond bins x 5 hphob bins."""
    hb = np.clip(np.digitize(hbond, [-0.5, 0.0, 0.5]), 0, 3)
    hp = np.clip(np.digitize(hphob, [-0.6, -0.2, 0.2, 0.6]), 0, 4)
    return 5 * hb + hp


def _peptide_path(blob, pocket, rng, length):
    tangent = _unit(np.cross(pocket, rng.standard_normal(3)))
    axis = np.cross(pocket, tangent)
    shell = blob.radius + SURFACE_OFFSET + BACKBONE_DEPTH
    step = CA_SPACING / shell
    s = (np.arange(length) - (length - 1) / 2.0) * step
    wiggle = 0.15 * np.sin(rng.uniform(0, 2 * np.pi) + np.arange(length) * rng.uniform(0.5, 1.2))
    dirs = np.array([_rotate(_rotate(pocket, axis, a), pocket, w) for a, w in zip(s, wiggle)])
    dirs = _unit(dirs)
    ca = (blob.rho(dirs) + SURFACE_OFFSET + BACKBONE_DEPTH)[:, None] * dirs
    return ca, dirs


def _backbone_frames(ca, up, rng):
    tan = np.gradient(ca, axis=0)
    tan = _unit(tan)
    perp = _unit(up - tan * np.sum(up * tan, axis=1, keepdims=True))
    twist = rng.uniform(-0.5, 0.5, len(ca))
    side = np.array([_rotate(p, t, a) for p, t, a in zip(perp, tan, twist)])
    c = ca + 1.5 * tan
    n = ca - 0.5 * tan + 1.3 * side
    return atoms_to_frame(n, ca, c)


def _cbeta_outward(dirs, rng):
    """Rotations pointing each residue's Cβ along ``dirs``, with a random spin about it."""
    b = _unit(CB_LOCAL)
    spin = so3_exp(rng.uniform(-np.pi, np.pi, len(dirs))[:, None] * b)
    axis = np.cross(b, dirs)
    angle = np.arctan2(np.linalg.norm(axis, axis=1), dirs @ b)
    align = so3_exp(_unit(axis) * angle[:, None])
    return align @ spin


def make_complex(rng, n_surface=128, length=8) -> ComplexPair:
    blob = Blob(rng)
    hbond, hphob = ScalarField(rng), ScalarField(rng)
    pocket = _unit(rng.standard_normal(3))

    dirs = fibonacci_sphere(4000)
    patch = dirs[dirs @ pocket > np.cos(PATCH_ANGLE)]
    start = int(np.argmax(patch @ pocket))
    patch = patch[farthest_point_sample(blob.point(patch), n_surface, start)]
    rec_pos = blob.point(patch)
    normals = blob.normal(rec_pos)
    rec_surface = SurfaceCloud(rec_pos, hbond(patch), hphob(patch))
    pep_surface = SurfaceCloud(rec_pos + SURFACE_OFFSET * normals, -hbond(patch), hphob(patch))

    ca, up = _peptide_path(blob, pocket, rng, length)
    frames = _backbone_frames(ca, up, rng)
    near = np.argmin(np.linalg.norm(ca[:, None] - pep_surface.positions[None], axis=-1), axis=1)
    types = residue_type(pep_surface.hbond[near], pep_surface.hphob[near])
    torsions = wrap(TORSION_MEANS[types] + TORSION_NOISE * rng.standard_normal((length, N_TORSIONS)))
    peptide = Chain(frames.rot, frames.trans, torsions, types)

    site = fibonacci_sphere(120)
    site = site[site @ pocket > np.cos(SITE_ANGLE)]
    rec_ca = (blob.rho(site) - 2.0)[:, None] * site
    receptor = Chain(_cbeta_outward(site, rng), rec_ca, np.zeros((len(site), N_TORSIONS)),
                     rng.integers(0, 20, len(site)))

    center = ca.mean(axis=0)
    return ComplexPair(
        SurfaceCloud(rec_surface.positions - center, rec_surface.hbond, rec_surface.hphob),
        receptor.shifted(-center),
        SurfaceCloud(pep_surface.positions - center, pep_surface.hbond, pep_surface.hphob),
        peptide.shifted(-center),
    )


def synthetic_pairs(seed, n_complexes, n_surface=128, length=8) -> list[ComplexPair]:
    """``n_complexes`` complexes, each from its own child stream of ``seed``."""
    if n_complexes < 1:
        raise ValueError("n_complexes must be >= 1")
    streams = np.random.SeedSequence(seed).spawn(n_complexes)
    return [make_complex(np.random.default_rng(s), n_surface, length) for s in streams]
