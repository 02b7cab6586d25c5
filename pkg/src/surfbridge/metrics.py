"""Structure and surface evaluation: superposition, TM-score, diversity,
binding-site recovery, cluster consistency and Chamfer distance."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DegenerateInput,
    DegenerateLabels,
    EmptyCloud,
    EmptyNativeSite,
    LengthMismatch,
    TooFewItems,
)

D0_MIN = 0.5
SITE_CUTOFF = 6.0
# distance scale of the surface dissimilarity (Å)
SURFACE_D0 = 2.0
RANK_TOL = 1e-9


@dataclass(frozen=True)
class Superposition:
    """``B ~ rotation @ A + translation``."""

    rotation: np.ndarray
    translation: np.ndarray
    rmsd: float

    def apply(self, pts):
        return np.asarray(pts, float) @ self.rotation.T + self.translation


def _coords(x):
    if hasattr(x, "trans"):
        return np.asarray(x.trans, dtype=float)
    return np.asarray(x, dtype=float).reshape(-1, 3)


def kabsch(A, B) -> Superposition:
    """Least-squares proper rotation and translation taking ``A`` onto ``B``."""
    A, B = np.asarray(A, float), np.asarray(B, float)
    if A.shape != B.shape:
        raise LengthMismatch(f"point sets differ in shape: {A.shape} vs {B.shape}")
    if len(A) < 3:
        raise DegenerateInput("need at least three points")
    ca, cb = A.mean(0), B.mean(0)
    P, Q = A - ca, B - cb
    for X in (P, Q):
        s = np.linalg.svd(X, compute_uv=False)
        if s[0] == 0 or s[1] <= RANK_TOL * s[0]:
            raise DegenerateInput("points are collinear or coincident after centring")
    U, _, Vt = np.linalg.svd(P.T @ Q)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    t = cb - R @ ca
    diff = A @ R.T + t - B
    return Superposition(R, t, float(np.sqrt(np.mean(np.sum(diff**2, axis=1)))))


def rmsd_ca(gen, ref):
    a, b = _coords(gen), _coords(ref)
    if len(a) != len(b):
        raise LengthMismatch(f"{len(a)} vs {len(b)} residues")
    return kabsch(a, b).rmsd


def tm_d0(L):
    """TM-score distance scale, clamped below at 0.5 Å for short chains."""
    return max(1.24 * np.cbrt(L - 15) - 1.8, D0_MIN)


def _tm_from(A, B, sel, d0):
    try:
        sup = kabsch(A[sel], B[sel])
    except DegenerateInput:
        return -1.0, None
    d = np.linalg.norm(sup.apply(A) - B, axis=1)
    return float(np.mean(1.0 / (1.0 + (d / d0) ** 2))), d


def tm_score(A, B, max_iter=20):
    """TM-score under one-to-one sequential alignment.

    Superpositions are seeded from contiguous fragments (full length, then
    halves, quarters, down to four residues) and refined by re-fitting on
    residues closer than ``2 d0`` until the selection stops changing.
    """
    A, B = _coords(A), _coords(B)
    if len(A) != len(B):
        raise LengthMismatch(f"{len(A)} vs {len(B)} residues")
    L = len(A)
    if L < 3:
        raise DegenerateInput("TM-score needs at least three residues")
    d0 = tm_d0(L)
    best = 0.0
    frag = L
    lengths = []
    while True:
        lengths.append(max(frag, min(4, L)))
        if frag <= 4:
            break
        frag //= 2
    for n in dict.fromkeys(lengths):
        for start in range(0, L - n + 1):
            sel = np.zeros(L, bool)
            sel[start : start + n] = True
            for _ in range(max_iter):
                score, d = _tm_from(A, B, sel, d0)
                best = max(best, score)
                if d is None:
                    break
                new = d < 2.0 * d0
                if new.sum() < 3 or np.array_equal(new, sel):
                    break
                sel = new
    return min(best, 1.0)


def diversity(peptides):
    """Mean of ``1 - TM`` over unordered pairs."""
    if len(peptides) < 2:
        raise TooFewItems("diversity needs at least two items")
    return float(np.mean([1.0 - tm_score(a, b) for a, b in combinations(peptides, 2)]))


def chamfer(U1, U2):
    """Symmetric mean nearest-neighbour distance."""
    U1, U2 = _points(U1), _points(U2)
    if len(U1) == 0 or len(U2) == 0:
        raise EmptyCloud("chamfer distance of an empty cloud")
    d12 = cKDTree(U2).query(U1)[0].mean()
    d21 = cKDTree(U1).query(U2)[0].mean()
    return float(0.5 * (d12 + d21))


def _points(U):
    if hasattr(U, "positions"):
        U = U.positions
    return np.asarray(U, dtype=float).reshape(-1, 3)


def surface_dissimilarity(U1, U2, d0=SURFACE_D0):
    """``1 - 1/(1 + (c/d0)^2)`` of the Chamfer distance ``c`` after alignment.

    Equal-size clouds are index-paired and Kabsch-aligned first; otherwise
    only centroids are matched.
    """
    a, b = _points(U1), _points(U2)
    try:
        a = kabsch(a, b).apply(a) if len(a) == len(b) else a - a.mean(0) + b.mean(0)
    except DegenerateInput:
        a = a - a.mean(0) + b.mean(0)
    c = chamfer(a, b)
    return 1.0 - 1.0 / (1.0 + (c / d0) ** 2)


def surface_diversity(surfaces, d0=SURFACE_D0):
    if len(surfaces) < 2:
        raise TooFewItems("surface diversity needs at least two items")
    return float(np.mean([surface_dissimilarity(a, b, d0) for a, b in combinations(surfaces, 2)]))


def binding_site(receptor, peptide, cutoff=SITE_CUTOFF):
    """Receptor residues whose (virtual) Cβ lies within ``cutoff`` of a peptide atom."""
    cb = receptor.cbeta()
    atoms = np.vstack([peptide.all_atoms(), peptide.cbeta()])
    d, _ = cKDTree(atoms).query(cb)
    return set(np.flatnonzero(d <= cutoff).tolist())


def bsr(gen, native, cutoff=SITE_CUTOFF):
    """Fraction of the native binding site recovered by the generated peptide.

    ``gen`` and ``native`` expose ``.receptor`` and ``.peptide`` chains; the
    receptor of ``native`` is used for both.
    """
    site_native = binding_site(native.receptor, native.peptide, cutoff)
    if not site_native:
        raise EmptyNativeSite("native peptide contacts no receptor residue")
    site_gen = binding_site(native.receptor, gen.peptide, cutoff)
    return len(site_gen & site_native) / len(site_native)


def cramers_v(x, y):
    x, y = np.asarray(x), np.asarray(y)
    if x.shape != y.shape:
        raise LengthMismatch("label vectors differ in length")
    if len(x) < 2:
        raise TooFewItems("need at least two labelled items")
    xs, xi = np.unique(x, return_inverse=True)
    ys, yi = np.unique(y, return_inverse=True)
    if len(xs) < 2 or len(ys) < 2:
        raise DegenerateLabels("each labelling needs at least two categories")
    table = np.zeros((len(xs), len(ys)))
    np.add.at(table, (xi, yi), 1.0)
    n = len(x)
    expected = table.sum(1, keepdims=True) * table.sum(0, keepdims=True) / n
    chi2 = float(np.sum((table - expected) ** 2 / expected))
    return float(min(np.sqrt(chi2 / (n * (min(len(xs), len(ys)) - 1))), 1.0))


def k_medoids(D, k, seed=0, max_iter=100):
    """Alternating k-medoids on a distance matrix; labels in first-seen order."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if not 2 <= k <= n:
        raise TooFewItems(f"need 2 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    medoids = [int(rng.integers(n))]
    while len(medoids) < k:
        dmin = D[:, medoids].min(1)
        if dmin.sum() == 0:
            rest = [i for i in range(n) if i not in medoids]
            medoids.append(int(rng.choice(rest)))
        else:
            medoids.append(int(rng.choice(n, p=dmin**2 / np.sum(dmin**2))))
    medoids = np.array(medoids)
    for _ in range(max_iter):
        labels = np.argmin(D[:, medoids], axis=1)
        labels[medoids] = np.arange(k)
        new = medoids.copy()
        for c in range(k):
            members = np.flatnonzero(labels == c)
            new[c] = members[np.argmin(D[np.ix_(members, members)].sum(1))]
        if np.array_equal(new, medoids):
            break
        medoids = new
    labels = np.argmin(D[:, medoids], axis=1)
    labels[medoids] = np.arange(k)
    _, first = np.unique(labels, return_index=True)
    remap = {lab: i for i, lab in enumerate(labels[np.sort(first)])}
    return np.array([remap[v] for v in labels])


def pairwise(items, fn):
    n = len(items)
    D = np.zeros((n, n))
    for i, j in combinations(range(n), 2):
        D[i, j] = D[j, i] = fn(items[i], items[j])
    return D


def consistency(surfaces, structures, k=5, seed=0):
    """Cramér's V between surface clusters and structure clusters."""
    if len(surfaces) != len(structures):
        raise LengthMismatch("surface and structure lists differ in length")
    labels_s = k_medoids(pairwise(surfaces, chamfer), k, seed)
    labels_b = k_medoids(pairwise(structures, lambda a, b: 1.0 - tm_score(a, b)), k, seed)
    return cramers_v(labels_s, labels_b)


def _f(x):
    return f"{x:.6f}"


def evaluation_report(rows, summary) -> str:
    """Tab-separated per-candidate table followed by a summary block.

    ``rows`` are ``(name, rmsd, tm_native, bsr)``; ``summary`` maps metric
    names to values (``None`` is written as ``nan``).
    """
    lines = ["candidate\trmsd\ttm_native\tbsr"]
    lines += [f"{name}\t{_f(r)}\t{_f(t)}\t{_f(b)}" for name, r, t, b in rows]
    lines += ["", "metric\tvalue"]
    lines += [f"{k}\t{'nan' if v is None else _f(v)}" for k, v in summary.items()]
    return "\n".join(lines) + "\n"
