"""Residue chains (frames + torsions + types) and receptor/peptide complexes."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .bridge import SurfaceCloud
from .frames import BackboneAtoms, frame_to_atoms, virtual_cbeta
from .geom3 import Transform

AMINO_ACIDS = (
    "ALA", "ARG", "ASN", "ASP", "CYS", "GLN", "GLU", "GLY", "HIS", "ILE",
    "LEU", "LYS", "MET", "PHE", "PRO", "SER", "THR", "TRP", "TYR", "VAL",
)
AA_INDEX = {name: i for i, name in enumerate(AMINO_ACIDS)}
# psi followed by chi1..chi4
N_TORSIONS = 5


@dataclass
class Chain:
    """Residues as frames with torsions ``(L, 5)`` (psi first) and type indices."""

    rot: np.ndarray
    trans: np.ndarray
    torsions: np.ndarray
    types: np.ndarray

    def __post_init__(self):
        self.rot = np.asarray(self.rot, dtype=float).reshape(-1, 3, 3)
        n = len(self.rot)
        self.trans = np.asarray(self.trans, dtype=float).reshape(n, 3)
        self.torsions = np.asarray(self.torsions, dtype=float).reshape(n, N_TORSIONS)
        self.types = np.asarray(self.types, dtype=int).reshape(n)

    def __len__(self):
        return len(self.trans)

    @property
    def frames(self) -> Transform:
        return Transform(self.rot, self.trans)

    @property
    def psi(self):
        return self.torsions[:, 0]

    def atoms(self) -> BackboneAtoms:
        return frame_to_atoms(self.frames, self.psi)

    def cbeta(self):
        a = self.atoms()
        return virtual_cbeta(a.n, a.ca, a.c)

    def all_atoms(self):
        """``(4L, 3)`` N, CA, C, O coordinates."""
        return self.atoms().stack().reshape(-1, 3)

    def shifted(self, v):
        return Chain(self.rot, self.trans + v, self.torsions, self.types)


@dataclass
class ComplexPair:
    """Receptor surface/structure and the bound peptide surface/structure.

    The two surfaces are index-paired: row ``i`` of the peptide surface is the
    bridge partner of row ``i`` of the receptor surface.
    """

    receptor_surface: SurfaceCloud
    receptor: Chain
    peptide_surface: SurfaceCloud
    peptide: Chain

    def digest(self):
        h = hashlib.sha256()
        for s in (self.receptor_surface, self.peptide_surface):
            for a in (s.positions, s.hbond, s.hphob):
                h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
        for c in (self.receptor, self.peptide):
            for a in (c.rot, c.trans, c.torsions):
                h.update(np.ascontiguousarray(a, dtype="<f8").tobytes())
            h.update(np.ascontiguousarray(c.types, dtype="<i8").tobytes())
        return h.hexdigest()


def dataset_digest(pairs):
    h = hashlib.sha256()
    for p in pairs:
        h.update(p.digest().encode())
    return h.hexdigest()
