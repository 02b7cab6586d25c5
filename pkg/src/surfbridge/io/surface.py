"""Surface point-cloud files and per-residue torsion files.

Surface text form::

    SURF1 N
    x y z hbond hphob        (N lines)

Values are written with 17 significant digits, so a round trip is exact.
Torsion files use the header ``TOR1 L`` followed by five angles per line.
"""

from __future__ import annotations

import numpy as np

from ..bridge import SurfaceCloud
from ..errors import BadMagic, CountMismatch, MalformedRecord, NonFiniteValue
from .atomic import atomic_write

SURFACE_MAGIC = "SURF1"
TORSION_MAGIC = "TOR1"


def _fmt(x):
    return repr(float(x))


def _parse_table(text, magic, width):
    lines = text.splitlines()
    if not lines:
        raise BadMagic("empty file", 1)
    head = lines[0].split()
    if len(head) != 2 or head[0] != magic:
        raise BadMagic(f"expected header '{magic} <count>'", 1)
    try:
        count = int(head[1])
    except ValueError:
        raise BadMagic(f"unreadable count {head[1]!r}", 1) from None
    if count < 0:
        raise BadMagic("negative count", 1)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != width:
            raise MalformedRecord(f"expected {width} values, found {len(parts)}", lineno)
        try:
            row = [float(p) for p in parts]
        except ValueError as exc:
            raise MalformedRecord(str(exc), lineno) from None
        if not all(np.isfinite(row)):
            raise NonFiniteValue("non-finite value", lineno)
        rows.append(row)
    if len(rows) != count:
        raise CountMismatch(f"header declares {count} records, found {len(rows)}", len(lines))
    return np.array(rows, dtype=float).reshape(count, width)


def format_surface(cloud: SurfaceCloud) -> str:
    data = np.column_stack([cloud.positions, cloud.hbond, cloud.hphob])
    if not np.all(np.isfinite(data)):
        raise NonFiniteValue("surface contains non-finite values")
    lines = [f"{SURFACE_MAGIC} {len(cloud)}"]
    lines += [" ".join(_fmt(v) for v in row) for row in data]
    return "\n".join(lines) + "\n"


def parse_surface(text) -> SurfaceCloud:
    data = _parse_table(text, SURFACE_MAGIC, 5)
    return SurfaceCloud(data[:, :3], data[:, 3], data[:, 4])


def read_surface(path) -> SurfaceCloud:
    with open(path, encoding="utf-8") as fh:
        return parse_surface(fh.read())


def write_surface(path, cloud: SurfaceCloud):
    atomic_write(path, format_surface(cloud))


def format_torsions(torsions) -> str:
    torsions = np.asarray(torsions, dtype=float).reshape(-1, 5)
    lines = [f"{TORSION_MAGIC} {len(torsions)}"]
    lines += [" ".join(_fmt(v) for v in row) for row in torsions]
    return "\n".join(lines) + "\n"


def parse_torsions(text):
    return _parse_table(text, TORSION_MAGIC, 5)


def read_torsions(path):
    with open(path, encoding="utf-8") as fh:
        return parse_torsions(fh.read())


def write_torsions(path, torsions):
    atomic_write(path, format_torsions(torsions))
