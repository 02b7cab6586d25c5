"""Minimal fixed-column PDB reading and writing for backbone atoms.

Only ATOM records of the first model are read; for alternate locations the
first one seen wins. Residues lacking any of N, CA or C are dropped and
counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyStructure, MalformedRecord
from ..frames import atoms_to_frame, psi_from_atoms
from ..structure import AA_INDEX, AMINO_ACIDS, N_TORSIONS, Chain

BACKBONE = ("N", "CA", "C", "O")
REQUIRED = ("N", "CA", "C")


@dataclass
class PdbResidue:
    chain: str
    resseq: int
    resname: str
    atoms: dict = field(default_factory=dict)
    icode: str = ""

    def has_backbone(self):
        return all(a in self.atoms for a in REQUIRED)


@dataclass
class PdbBackbone:
    residues: list
    dropped: int = 0

    def chain_ids(self):
        return sorted({r.chain for r in self.residues})


def _parse_atom(line, lineno):
    if len(line) < 54:
        raise MalformedRecord("ATOM record shorter than 54 columns", lineno)
    try:
        x, y, z = float(line[30:38]), float(line[38:46]), float(line[46:54])
        resseq = int(line[22:26])
    except ValueError as exc:
        raise MalformedRecord(f"unreadable ATOM field ({exc})", lineno) from None
    if not np.all(np.isfinite([x, y, z])):
        raise MalformedRecord("non-finite coordinate", lineno)
    return {
        "name": line[12:16].strip(),
        "altloc": line[16].strip(),
        "resname": line[17:20].strip(),
        "chain": line[21].strip(),
        "resseq": resseq,
        "icode": line[26].strip() if len(line) > 26 else "",
        "xyz": np.array([x, y, z]),
    }


def parse_pdb_backbone(text) -> PdbBackbone:
    residues = {}
    order = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.startswith("ENDMDL"):
            break
        if not line.startswith("ATOM  "):
            continue
        rec = _parse_atom(line, lineno)
        key = (rec["chain"], rec["resseq"], rec["icode"])
        res = residues.get(key)
        if res is None:
            res = residues[key] = PdbResidue(rec["chain"], rec["resseq"], rec["resname"], icode=rec["icode"])
            order.append(key)
        res.atoms.setdefault(rec["name"], rec["xyz"])
    if not residues:
        raise EmptyStructure("no ATOM records")
    chain_rank = {}
    for c, _, _ in order:
        chain_rank.setdefault(c, len(chain_rank))
    keys = sorted(order, key=lambda k: (chain_rank[k[0]], k[1], k[2]))
    kept = [residues[k] for k in keys if residues[k].has_backbone()]
    if not kept:
        raise EmptyStructure("no residue has complete N/CA/C backbone")
    return PdbBackbone(kept, dropped=len(keys) - len(kept))


def _atom_name_field(name):
    return f" {name:<3s}" if len(name) < 4 else name


def format_atom(serial, name, resname, chain, resseq, xyz, icode=""):
    x, y, z = xyz
    element = name[0]
    return (
        f"ATOM  {serial:5d} {_atom_name_field(name)} {resname:>3s} {chain or 'A':1s}{resseq:4d}{icode or ' ':1s}"
        f"   {x:8.3f}{y:8.3f}{z:8.3f}{1.0:6.2f}{0.0:6.2f}          {element:>2s}"
    )


def write_pdb_backbone(residues) -> str:
    lines = []
    serial = 1
    for res in residues:
        for name in (*BACKBONE, "CB"):
            if name in res.atoms:
                lines.append(format_atom(serial, name, res.resname, res.chain, res.resseq, res.atoms[name], res.icode))
                serial += 1
    lines += ["TER", "END"]
    return "\n".join(lines) + "\n"


def residues_from_chain(chain: Chain, chain_id="A", start=1):
    atoms = chain.atoms()
    return [
        PdbResidue(chain_id, start + i, AMINO_ACIDS[int(chain.types[i])],
                   {"N": atoms.n[i], "CA": atoms.ca[i], "C": atoms.c[i], "O": atoms.o[i]})
        for i in range(len(chain))
    ]


def chain_from_residues(residues, torsions=None) -> Chain:
    """Frames from N/CA/C; psi from O when present; unknown names map to ALA."""
    n = np.array([r.atoms["N"] for r in residues])
    ca = np.array([r.atoms["CA"] for r in residues])
    c = np.array([r.atoms["C"] for r in residues])
    frames = atoms_to_frame(n, ca, c)
    if torsions is None:
        torsions = np.zeros((len(residues), N_TORSIONS))
        for i, r in enumerate(residues):
            if "O" in r.atoms:
                torsions[i, 0] = psi_from_atoms(frames[i], r.atoms["O"])
    types = np.array([AA_INDEX.get(r.resname, 0) for r in residues])
    return Chain(frames.rot, frames.trans, torsions, types)


def read_pdb_chain(path, torsions=None) -> Chain:
    with open(path, encoding="utf-8") as fh:
        return chain_from_residues(parse_pdb_backbone(fh.read()).residues, torsions)
