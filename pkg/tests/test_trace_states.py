"""Matrix states, block lightness, and the diagonal embedding."""

import numpy as np
import pytest

from fraisse.certify import verify_certificate
from fraisse.trace_states import (
    DensityMatrix,
    MatrixState,
    block_compress,
    complex_matrix_from_json,
    complex_matrix_to_json,
    embedding_checks,
    find_light_block,
    minimal_embedding,
    projector_family,
    pullback_defect,
    random_density,
    random_hermitian_unit,
)


def test_density_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        DensityMatrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(ValueError, match="negative eigenvalue"):
        DensityMatrix(np.array([[1.5, 0.0], [0.0, -0.5]]))
    with pytest.raises(ValueError, match="not 1"):
        DensityMatrix(np.eye(2))
    with pytest.raises(ValueError, match="square"):
        DensityMatrix(np.ones((2, 3)))
    rho = DensityMatrix(np.eye(2) / 2.0)
    assert rho.dim == 2


def test_expectation_is_real_on_hermitian():
    rng = np.random.default_rng(71)
    rho = random_density(3, rng)
    x = random_hermitian_unit(3, rng)
    val = rho.expect(x)
    assert isinstance(val, float)
    assert abs(val) <= 1.0 + 1e-12
    state = MatrixState(rho)
    assert state(x) == val
    assert state(np.eye(3, dtype=complex)) == pytest.approx(1.0, abs=1e-12)


def test_random_samples_are_what_they_claim():
    rng = np.random.default_rng(73)
    rho = random_density(4, rng)
    assert np.trace(rho.matrix).real == pytest.approx(1.0, abs=1e-12)
    h = random_hermitian_unit(4, rng)
    assert np.max(np.abs(h - h.conj().T)) <= 1e-12
    assert np.max(np.abs(np.linalg.eigvalsh(h))) == pytest.approx(1.0, abs=1e-12)


def test_complex_json_roundtrip():
    rng = np.random.default_rng(79)
    m = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    back = complex_matrix_from_json(complex_matrix_to_json(m))
    assert np.max(np.abs(back - m)) == 0.0
    rho = random_density(2, rng)
    assert np.max(np.abs(DensityMatrix.from_json(rho.to_json()).matrix - rho.matrix)) == 0.0


def test_block_compress_properties():
    rng = np.random.default_rng(83)
    rho = random_density(8, rng)
    blocks = block_compress(rho, 2)
    assert len(blocks) == 4
    assert sum(float(np.trace(b).real) for b in blocks) == pytest.approx(1.0, abs=1e-9)
    for b in blocks:
        assert np.linalg.eigvalsh((b + b.conj().T) / 2.0)[0] >= -1e-10
    with pytest.raises(ValueError, match="multiple"):
        block_compress(rho, 3)


def test_projector_family():
    fam = projector_family(2)
    assert len(fam) == 12
    for p in fam[:1] + fam[2:]:
        # all but the half-identity are projectors
        assert np.max(np.abs(p @ p - p)) <= 1e-12
        assert np.max(np.abs(p - p.conj().T)) <= 1e-12
    with pytest.raises(NotImplementedError):
        projector_family(3)


def test_find_light_block_counting_guarantee():
    ell = 4
    fam = projector_family(2)
    k = ell * len(fam) + 1
    rng = np.random.default_rng(89)
    rho = random_density(2 * k, rng)
    j, block = find_light_block(rho, 2, ell)
    vals = [float(np.trace(block @ p).real) for p in fam]
    assert max(vals) < 1.0 / ell
    assert 0 <= j < k
    with pytest.raises(ValueError, match="counting argument"):
        find_light_block(random_density(8, rng), 2, ell)


def test_find_light_block_skips_heavy_blocks():
    # mass concentrated on the first blocks forces the scan past them
    ell = 4
    fam = projector_family(2)
    k = ell * len(fam) + 1
    n = 2 * k
    heavy = np.zeros((n, n), dtype=complex)
    # three blocks above the 1/ell = 0.25 threshold eat most of the trace
    for j in range(3):
        heavy[2 * j, 2 * j] = 0.26
        heavy[2 * j + 1, 2 * j + 1] = 0.01
    used = float(np.trace(heavy).real)
    rest = (1.0 - used) / (n - 6)
    for i in range(6, n):
        heavy[i, i] = rest
    rho = DensityMatrix(heavy)
    j, _ = find_light_block(rho, 2, ell)
    assert j >= 3


def test_pullback_defect_depends_only_on_block():
    rng = np.random.default_rng(97)
    t = MatrixState(random_density(2, rng))
    block = 0.01 * np.eye(2, dtype=complex)
    x = random_hermitian_unit(2, rng)
    val = pullback_defect(block, t, x)
    direct = float(np.trace(block @ x).real) - t(x) * float(np.trace(block).real)
    assert val == pytest.approx(direct, abs=0.0)


def test_minimal_embedding_argument_validation():
    rng = np.random.default_rng(101)
    s = MatrixState(random_density(4, rng))
    t = MatrixState(random_density(2, rng))
    with pytest.raises(ValueError, match="exactly one"):
        minimal_embedding(s, t)
    with pytest.raises(ValueError, match="exactly one"):
        minimal_embedding(s, t, eps=1.0, ell=16)


def test_minimal_embedding_small_scale():
    # ell = 2 keeps the big algebra at 25 blocks, fast enough for a unit test
    ell = 2
    fam = projector_family(2)
    k = ell * len(fam) + 1
    rng = np.random.default_rng(103)
    s = MatrixState(random_density(2 * k, rng))
    t = MatrixState(random_density(2, rng))
    res = minimal_embedding(s, t, ell=ell, seed=5, samples=200)
    assert res.bound == pytest.approx(16.0 / ell)
    assert res.certificate.passed
    assert res.block_norm <= 8.0 / ell + 1e-12
    assert res.block_trace <= 8.0 / ell + 1e-12
    # the certificate recomputes the seeded sample sup exactly
    ok, again = verify_certificate(res.certificate)
    assert ok
    assert again == pytest.approx(res.certificate.measured, abs=0.0)
    gap = embedding_checks(res, s)
    assert gap <= 1e-12


def test_embedding_structural_properties():
    rng = np.random.default_rng(107)
    ell = 2
    k = ell * 12 + 1
    s = MatrixState(random_density(2 * k, rng))
    t = MatrixState(random_density(2, rng))
    res = minimal_embedding(s, t, ell=ell, seed=0, samples=50)
    emb = res.embedding
    big = emb.apply(np.eye(2, dtype=complex))
    assert np.max(np.abs(big - np.eye(2 * k))) <= 1e-12
    x = random_hermitian_unit(2, rng)
    bx = emb.apply(x)
    assert np.max(np.abs(bx - bx.conj().T)) <= 1e-12
    assert np.max(np.abs(np.linalg.eigvalsh(bx))) == pytest.approx(
        np.max(np.abs(np.linalg.eigvalsh(x))), abs=1e-10
    )
    with pytest.raises(ValueError, match="argument must be"):
        emb.apply(np.eye(3, dtype=complex))
