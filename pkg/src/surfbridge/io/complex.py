"""Complex directories: receptor/peptide surfaces, structures and torsions.

A complex directory holds ``receptor.surf``, ``receptor.pdb``,
``peptide.surf``, ``peptide.pdb`` and ``peptide.tor``. A dataset directory
holds one complex directory per entry, read in sorted name order.
"""

from __future__ import annotations

from pathlib import Path

from ..structure import ComplexPair
from .atomic import atomic_write
from .pdb import read_pdb_chain, residues_from_chain, write_pdb_backbone
from .surface import read_surface, read_torsions, write_surface, write_torsions

FILES = ("receptor.surf", "receptor.pdb", "peptide.surf", "peptide.pdb", "peptide.tor")


def write_complex(directory, pair: ComplexPair):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_surface(d / "receptor.surf", pair.receptor_surface)
    write_surface(d / "peptide.surf", pair.peptide_surface)
    atomic_write(d / "receptor.pdb", write_pdb_backbone(residues_from_chain(pair.receptor, "R")))
    atomic_write(d / "peptide.pdb", write_pdb_backbone(residues_from_chain(pair.peptide, "P")))
    write_torsions(d / "peptide.tor", pair.peptide.torsions)


def read_complex(directory) -> ComplexPair:
    d = Path(directory)
    torsions = read_torsions(d / "peptide.tor") if (d / "peptide.tor").exists() else None
    return ComplexPair(
        read_surface(d / "receptor.surf"),
        read_pdb_chain(d / "receptor.pdb"),
        read_surface(d / "peptide.surf"),
        read_pdb_chain(d / "peptide.pdb", torsions),
    )


def is_complex_dir(path):
    p = Path(path)
    return p.is_dir() and all((p / f).exists() for f in ("receptor.surf", "peptide.surf", "peptide.pdb"))


def read_dataset(directory):
    d = Path(directory)
    if is_complex_dir(d):
        return [read_complex(d)]
    return [read_complex(p) for p in sorted(d.iterdir()) if is_complex_dir(p)] if d.is_dir() else []
