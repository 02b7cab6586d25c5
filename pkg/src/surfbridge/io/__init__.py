"""File formats: PDB backbones, surfaces, torsions, configs and checkpoints."""

from .atomic import atomic_directory, atomic_write
from .checkpoint import checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint
from .complex import read_complex, read_dataset, write_complex
from .config import format_config, parse_config, read_config
from .pdb import (
    PdbBackbone,
    PdbResidue,
    chain_from_residues,
    parse_pdb_backbone,
    read_pdb_chain,
    residues_from_chain,
    write_pdb_backbone,
)
from .surface import (
    format_surface,
    format_torsions,
    parse_surface,
    parse_torsions,
    read_surface,
    read_torsions,
    write_surface,
    write_torsions,
)
