from types import SimpleNamespace

import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from surfbridge import metrics
from surfbridge.errors import (
    DegenerateInput,
    DegenerateLabels,
    EmptyCloud,
    EmptyNativeSite,
    LengthMismatch,
    TooFewItems,
)
from surfbridge.geom3 import random_rotation
from surfbridge.structure import Chain

CHIRAL = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]])


def _rigid(rng, pts):
    Q = random_rotation(rng)
    return pts @ Q.T + rng.normal(0, 5, 3), Q


def _chain(trans, rot=None):
    trans = np.asarray(trans, float)
    n = len(trans)
    rot = np.broadcast_to(np.eye(3), (n, 3, 3)) if rot is None else rot
    return Chain(rot, trans, np.zeros((n, 5)), np.zeros(n, int))


# superposition


def test_kabsch_identity(rng):
    A = rng.normal(size=(10, 3))
    sup = metrics.kabsch(A, A)
    assert sup.rmsd < 1e-12
    np.testing.assert_allclose(sup.rotation, np.eye(3), atol=1e-12)


def test_kabsch_rigid_copy(rng):
    for _ in range(50):
        A = rng.normal(0, 4, size=(12, 3))
        B, Q = _rigid(rng, A)
        sup = metrics.kabsch(A, B)
        assert sup.rmsd < 1e-9
        assert np.max(np.abs(sup.rotation - Q)) < 1e-9
        assert np.max(np.abs(sup.apply(A) - B)) < 1e-9


def test_kabsch_matches_independent_solver(rng):
    for _ in range(20):
        A = rng.normal(size=(8, 3))
        B = rng.normal(size=(8, 3))
        sup = metrics.kabsch(A, B)
        R, _ = Rotation.align_vectors(B - B.mean(0), A - A.mean(0))
        diff = (A - A.mean(0)) @ R.as_matrix().T - (B - B.mean(0))
        assert abs(sup.rmsd - np.sqrt(np.mean(np.sum(diff**2, 1)))) < 1e-10
        assert np.linalg.det(sup.rotation) == pytest.approx(1.0, abs=1e-12)


def test_kabsch_reflection_is_not_matched():
    mirror = CHIRAL * np.array([-1.0, 1.0, 1.0])
    sup = metrics.kabsch(CHIRAL, mirror)
    assert np.linalg.det(sup.rotation) == pytest.approx(1.0)
    assert sup.rmsd > 0.1
    # brute force over a dense rotation sample never beats the closed form
    grid = Rotation.random(20000, random_state=0).as_matrix()
    P, Q = CHIRAL - CHIRAL.mean(0), mirror - mirror.mean(0)
    brute = np.sqrt(np.min(np.mean(np.sum((np.einsum("rij,nj->rni", grid, P) - Q) ** 2, -1), -1)))
    assert sup.rmsd <= brute + 1e-12
    assert brute - sup.rmsd < 0.05


def test_kabsch_rigid_invariance(rng):
    A, B = rng.normal(size=(9, 3)), rng.normal(size=(9, 3))
    base = metrics.kabsch(A, B).rmsd
    assert abs(metrics.kabsch(_rigid(rng, A)[0], B).rmsd - base) < 1e-9
    assert abs(metrics.kabsch(A, _rigid(rng, B)[0]).rmsd - base) < 1e-9


def test_kabsch_errors():
    with pytest.raises(LengthMismatch):
        metrics.kabsch(np.zeros((4, 3)), np.zeros((5, 3)))
    with pytest.raises(DegenerateInput):
        metrics.kabsch(np.zeros((2, 3)), np.zeros((2, 3)))
    line = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInput):
        metrics.kabsch(line, line)


def test_rmsd_single_displacement(rng):
    n, d = 10, 1.7
    A = rng.normal(0, 3, size=(n, 3))
    B = A.copy()
    B[3] += d * np.array([0.0, 0.6, 0.8])
    r = metrics.rmsd_ca(A, B)
    # the identity superposition already achieves d / sqrt(n)
    assert 0 < r <= d / np.sqrt(n) + 1e-12
    assert metrics.rmsd_ca(_chain(A), _chain(_rigid(rng, A)[0])) < 1e-9
    with pytest.raises(LengthMismatch):
        metrics.rmsd_ca(A, B[:-1])


# TM-score and diversity


def test_tm_d0_clamp():
    assert metrics.tm_d0(8) == 0.5
    assert metrics.tm_d0(100) == pytest.approx(1.24 * 85 ** (1 / 3) - 1.8)


def test_tm_self_and_rigid(rng):
    A = rng.normal(0, 4, size=(8, 3))
    assert metrics.tm_score(A, A) == 1.0
    assert metrics.tm_score(A, _rigid(rng, A)[0]) == pytest.approx(1.0, abs=1e-12)


def test_tm_all_at_d0_is_half():
    # a square whose corners move +-d0 off-plane in a saddle: the least-squares
    # superposition is the identity and every residue sits at d0
    d0 = metrics.tm_d0(4)
    A = np.array([[1.0, 1, 0], [1, -1, 0], [-1, -1, 0], [-1, 1, 0]])
    B = A + d0 * np.array([[0, 0, 1.0], [0, 0, -1], [0, 0, 1], [0, 0, -1]])
    sup = metrics.kabsch(A, B)
    np.testing.assert_allclose(sup.rotation, np.eye(3), atol=1e-12)
    score, d = metrics._tm_from(A, B, np.ones(4, bool), d0)
    np.testing.assert_allclose(d, d0, atol=1e-12)
    assert score == pytest.approx(0.5, abs=1e-12)


def test_tm_symmetric_and_bounded(rng):
    for _ in range(10):
        A, B = rng.normal(0, 3, size=(8, 3)), rng.normal(0, 3, size=(8, 3))
        s = metrics.tm_score(A, B)
        assert 0 < s <= 1
        assert s == pytest.approx(metrics.tm_score(B, A), abs=0.05)
    with pytest.raises(LengthMismatch):
        metrics.tm_score(A, B[:5])


def test_diversity(rng):
    A = rng.normal(0, 4, size=(8, 3))
    assert metrics.diversity([A, A, A]) == pytest.approx(0.0, abs=1e-12)
    scrambled = [rng.normal(0, 4, size=(8, 3)) for _ in range(3)]
    planted = metrics.diversity([A, _rigid(rng, A)[0], scrambled[0]])
    distinct = metrics.diversity(scrambled)
    assert 0 < planted < distinct < 1
    with pytest.raises(TooFewItems):
        metrics.diversity([A])


# binding-site ratio

RECEPTOR = _chain([[20.0 * i, 0, 0] for i in range(4)])


def _near(*idx):
    cb = RECEPTOR.cbeta()
    return _chain([cb[i] + [0, 0, -4.0] for i in idx])


def _brute_site(receptor, peptide, cutoff=6.0):
    atoms = np.vstack([peptide.all_atoms(), peptide.cbeta()])
    return {i for i, c in enumerate(receptor.cbeta()) if any(np.linalg.norm(a - c) <= cutoff for a in atoms)}


@pytest.mark.parametrize("gen,expected", [((0, 1), 1.0), ((0, 2), 0.5), ((2, 3), 0.0)])
def test_bsr_planted(gen, expected):
    native = SimpleNamespace(receptor=RECEPTOR, peptide=_near(0, 1))
    assert metrics.binding_site(RECEPTOR, native.peptide) == _brute_site(RECEPTOR, native.peptide) == {0, 1}
    g = SimpleNamespace(peptide=_near(*gen))
    assert metrics.binding_site(RECEPTOR, g.peptide) == _brute_site(RECEPTOR, g.peptide) == set(gen)
    assert metrics.bsr(g, native) == expected


def test_bsr_empty_native():
    native = SimpleNamespace(receptor=RECEPTOR, peptide=_chain([[0, 100.0, 0]]))
    with pytest.raises(EmptyNativeSite):
        metrics.bsr(native, native)


# association


def test_cramers_v():
    rng = np.random.default_rng(1)
    x = rng.integers(0, 4, 10_000)
    assert metrics.cramers_v(x, x) == pytest.approx(1.0, abs=1e-12)
    y = rng.integers(0, 4, 10_000)
    assert metrics.cramers_v(x, y) < 0.05
    perm = np.array([2, 0, 3, 1])
    assert metrics.cramers_v(perm[x], y) == pytest.approx(metrics.cramers_v(x, y), abs=1e-15)
    assert metrics.cramers_v(x, perm[x]) == pytest.approx(1.0, abs=1e-12)


def test_cramers_v_errors():
    with pytest.raises(DegenerateLabels):
        metrics.cramers_v([0, 0, 0], [0, 1, 0])
    with pytest.raises(LengthMismatch):
        metrics.cramers_v([0, 1], [0, 1, 0])
    with pytest.raises(TooFewItems):
        metrics.cramers_v([0], [1])


# surfaces


def test_chamfer():
    assert metrics.chamfer([[0, 0, 0]], [[1, 0, 0]]) == 1.0
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=(30, 3)), rng.normal(size=(20, 3))
    assert metrics.chamfer(a, a) == 0.0
    assert metrics.chamfer(a, b) == metrics.chamfer(b, a)
    with pytest.raises(EmptyCloud):
        metrics.chamfer(np.zeros((0, 3)), a)


def test_surface_diversity(rng):
    a = rng.normal(0, 3, size=(40, 3))
    assert metrics.surface_diversity([a, _rigid(rng, a)[0]]) == pytest.approx(0.0, abs=1e-9)
    v = metrics.surface_diversity([a, rng.normal(0, 3, size=(40, 3)), rng.normal(0, 3, size=(30, 3))])
    assert 0 < v < 1
    with pytest.raises(TooFewItems):
        metrics.surface_diversity([a])


def test_consistency_coupled_groups(rng):
    sa, sb = rng.normal(0, 3, (20, 3)), rng.normal(0, 3, (20, 3)) + 15
    pa, pb = rng.normal(0, 3, (8, 3)), rng.normal(0, 3, (8, 3))
    group = [0, 1, 0, 0, 1, 1, 0, 1]
    surfaces = [(sa, sb)[g] for g in group]
    structures = [(pa, pb)[g] for g in group]
    assert metrics.consistency(surfaces, structures, k=2) == pytest.approx(1.0, abs=1e-12)


def test_consistency_bounded_and_deterministic(rng):
    surfaces = [rng.normal(0, 3, (15, 3)) for _ in range(8)]
    structures = [rng.normal(0, 3, (8, 3)) for _ in range(8)]
    runs = [metrics.consistency(surfaces, structures, k=3, seed=s) for s in (4, 4)]
    assert runs[0] == runs[1]
    assert 0 <= runs[0] <= 1
    with pytest.raises(LengthMismatch):
        metrics.consistency(surfaces, structures[:-1], k=3)


def test_k_medoids_labels(rng):
    pts = np.concatenate([rng.normal(0, 0.1, (5, 2)), rng.normal(10, 0.1, (5, 2))])
    D = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    labels = metrics.k_medoids(D, 2, seed=0)
    assert labels[0] == 0
    assert set(labels[:5]) == {0} and set(labels[5:]) == {1}
    with pytest.raises(TooFewItems):
        metrics.k_medoids(D, 11)


def test_evaluation_report_layout():
    text = metrics.evaluation_report([("c0", 0.0, 1.0, 1.0)], {"diversity": 0.25, "consistency": None})
    assert text.splitlines() == [
        "candidate\trmsd\ttm_native\tbsr",
        "c0\t0.000000\t1.000000\t1.000000",
        "",
        "metric\tvalue",
        "diversity\t0.250000",
        "consistency\tnan",
    ]
