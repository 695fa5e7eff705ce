"""Operator assembly on truncated Hermite spaces: contraction, block
structure, bath-map spectra, rotation-average identity, spectral gaps."""

import numpy as np
import pytest
from math import pi, sqrt

from kacbath import (
    HermiteCoeffs,
    ModelParams,
    StateError,
    assemble_T,
    assemble_generator,
    assemble_pair_rotation,
    invariant_projector,
    joint_basis,
    make_basis,
    spectral_gap,
    symmetric_tensor_eigenvalues,
    tensor_T,
    verify_lemma2,
)
from kacbath.hermite import poly_coord, poly_mul, poly_add, hermite_coeffs_from_poly
from kacbath.randomness import RngStream
from kacbath.spectral import sphere_moment_tensor


def _unit_h1_tagged(m: int) -> HermiteCoeffs:
    b = make_basis(3 * m, 1)
    vec = np.zeros(b.size)
    vec[b.index[tuple(1 if i == 0 else 0 for i in range(3 * m))]] = 1.0
    return HermiteCoeffs(b, vec)


# ---------------------------------------------------------------------------
# structural invariants


@pytest.mark.parametrize("kind,i,j,p", [
    ("system", 0, 1, ModelParams(2, 2)),
    ("reservoir", 0, 1, ModelParams(1, 3)),
    ("interaction", 0, 2, ModelParams(1, 3)),
])
def test_pair_rotations_are_symmetric_contractions(kind, i, j, p):
    op = assemble_pair_rotation(kind, i, j, p, 3)
    assert op.symmetry_defect() <= 1e-10
    assert np.linalg.norm(op.mat, 2) <= 1.0 + 1e-10
    # exact degree-block structure: no leakage between degrees
    basis = op.basis
    for sl_a in basis.degree_slices():
        for sl_b in basis.degree_slices():
            if sl_a != sl_b:
                assert np.abs(op.mat[sl_a, sl_b]).max() == 0.0


def test_pair_average_spectrum_in_unit_interval():
    # an averaging operator: spectrum within [0, 1], so A - A^2 is PSD
    p = ModelParams(1, 3)
    op = assemble_pair_rotation("interaction", 0, 1, p, 4)
    eigs = np.linalg.eigvalsh(op.mat)
    assert eigs.min() >= -1e-12
    assert eigs.max() <= 1.0 + 1e-12
    gap = op.mat - op.mat @ op.mat
    assert np.linalg.eigvalsh((gap + gap.T) / 2).min() >= -1e-12


def test_pair_rotation_fixes_pair_invariants():
    # energy and momentum of the colliding pair are pointwise conserved,
    # so their Hermite data is fixed by the average
    p = ModelParams(2, 2)
    op = assemble_pair_rotation("system", 0, 1, p, 2)
    b = op.basis
    px = poly_add(poly_coord(0), poly_coord(3))  # v1x + v2x
    energy = poly_add(*[poly_mul(poly_coord(k), poly_coord(k)) for k in range(6)])
    for poly in (px, energy, poly_mul(px, px)):
        vec = hermite_coeffs_from_poly(poly, b)
        np.testing.assert_allclose(op.mat @ vec, vec, atol=1e-10)


def test_generators_are_symmetric_and_negative_semidefinite():
    p = ModelParams(1, 2)
    for kind in ("reservoir", "thermostat"):
        g = assemble_generator(kind, p, 2)
        assert g.symmetry_defect() <= 1e-10
        assert np.linalg.eigvalsh(g.mat).max() <= 1e-10


def test_thermostat_generator_kills_reservoir_momentum_only():
    p = ModelParams(1, 2)
    g = assemble_generator("thermostat", p, 2)
    b = g.basis
    # sum of reservoir x-velocities is conserved by the bath dynamics
    res_px = poly_add(poly_coord(3), poly_coord(6))
    vec = hermite_coeffs_from_poly(res_px, b)
    np.testing.assert_allclose(g.mat @ vec, 0.0, atol=1e-10)
    # the tagged velocity is not: it decays at rate mu/3
    tag = hermite_coeffs_from_poly(poly_coord(0), b)
    np.testing.assert_allclose(g.mat @ tag, -(p.mu / 3.0) * tag, atol=1e-10)


# ---------------------------------------------------------------------------
# bath map spectra


def test_bath_map_degree_blocks():
    t = assemble_T(1, 4)
    for d, expected in [
        (1, {2.0 / 3.0}),
        (2, {7.0 / 15.0, 2.0 / 3.0}),
        (3, {12.0 / 35.0, 8.0 / 15.0}),
    ]:
        eigs = np.linalg.eigvalsh(t.block(d))
        got = set(np.round(eigs, 10))
        assert got == {round(e, 10) for e in expected}
    # degree-1 block is exactly (2/3) I
    np.testing.assert_allclose(t.block(1), (2.0 / 3.0) * np.eye(3), atol=1e-12)


def test_tensor_route_matches_matrix_route():
    t = assemble_T(1, 5)
    for deg in range(1, 6):
        a = np.sort(symmetric_tensor_eigenvalues(deg))
        b = np.sort(np.linalg.eigvalsh(t.block(deg)))
        # same top eigenvalue; the tensor route may enumerate with
        # different multiplicities, so compare the extremes and bound
        assert abs(a.max() - b.max()) < 1e-9
        assert b.max() <= 2.0 / 3.0 + 1e-10
        assert a.max() <= 2.0 / 3.0 + 1e-10


def test_sphere_moment_tensors():
    np.testing.assert_allclose(sphere_moment_tensor(2), np.eye(3) / 3.0, atol=1e-14)
    m4 = sphere_moment_tensor(4)
    eye = np.eye(3)
    sym = (
        np.einsum("ij,kl->ijkl", eye, eye)
        + np.einsum("ik,jl->ijkl", eye, eye)
        + np.einsum("il,jk->ijkl", eye, eye)
    ) / 15.0
    np.testing.assert_allclose(m4, sym, atol=1e-14)


def test_tensor_T_is_symmetric_psd_contraction():
    for deg in (1, 2, 3):
        mat = tensor_T(deg)
        np.testing.assert_allclose(mat, mat.T, atol=1e-12)
        eigs = symmetric_tensor_eigenvalues(deg)
        assert eigs.min() >= -1e-12


# ---------------------------------------------------------------------------
# rotation-average identity (finite reservoir mean vs bath map)


def test_lemma2_identity_random_polynomials():
    for n in (2, 3):
        p = ModelParams(1, n)
        basis = make_basis(3, 3)
        for trial in range(6):
            vec = RngStream(10 + n, trial).rng.standard_normal(basis.size)
            res = verify_lemma2(HermiteCoeffs(basis, vec), p, d=3)
            assert abs(res.lhs - res.rhs) < 1e-12
            assert res.lhs <= res.variance_bound + 1e-12


def test_lemma2_unit_mode_values():
    # for a unit degree-1 mode the defect is 1/(9N): exactly half the
    # variance bound (2/9)/N, since the pair average has <Ru,Ru> = 5/9
    # while <u,Tu> = 2/3 and <Tu,Tu> = 4/9
    for n, want in [(2, 1.0 / 18.0), (3, 1.0 / 27.0)]:
        res = verify_lemma2(_unit_h1_tagged(1), ModelParams(1, n), d=1)
        assert res.lhs == pytest.approx(want, abs=1e-14)
        assert res.variance_bound == pytest.approx(2.0 * want, abs=1e-14)


def test_lemma2_coordinate_function_closed_form():
    # u = tagged x-velocity: norm^2 = 1/(2 pi) scales the unit-mode values
    b = make_basis(3, 1)
    vec = np.zeros(b.size)
    vec[b.index[(1, 0, 0)]] = 1.0 / sqrt(2.0 * pi)
    res = verify_lemma2(HermiteCoeffs(b, vec), ModelParams(1, 2), d=1)
    assert res.lhs == pytest.approx(1.0 / (36.0 * pi), abs=1e-14)
    assert res.variance_bound == pytest.approx(1.0 / (18.0 * pi), abs=1e-14)


def test_lemma2_rejects_wrong_variable_count():
    with pytest.raises(StateError):
        verify_lemma2(_unit_h1_tagged(2), ModelParams(1, 2), d=1)


# ---------------------------------------------------------------------------
# invariants and the gap


def test_invariant_projector_structure():
    p = ModelParams(1, 2)
    kernel, proj, comp = invariant_projector(p, 2)
    eye = np.eye(proj.mat.shape[0])
    np.testing.assert_allclose(proj.mat @ proj.mat, proj.mat, atol=1e-12)
    np.testing.assert_allclose(proj.mat + comp.mat, eye, atol=1e-12)
    np.testing.assert_allclose(proj.mat @ comp.mat, 0.0 * eye, atol=1e-12)
    # kernel columns really are invariants of the generator
    gen = assemble_generator("reservoir", p, 2)
    assert np.abs(gen.mat @ kernel).max() < 1e-10
    # 1 constant, 3 momenta, 6 momentum quadratics, 1 energy
    assert kernel.shape[1] == 11


def test_spectral_gap_small_reservoir_values():
    # frozen from the assembled generator at degree 2, unit rates:
    # the gap follows (N+1)/(3N) for a single tagged particle
    for n, want in [(2, 0.5), (4, 5.0 / 12.0), (8, 3.0 / 8.0)]:
        p = ModelParams(1, n)
        gen = assemble_generator("reservoir", p, 2)
        _, _, comp = invariant_projector(p, 2)
        assert spectral_gap(gen, comp) == pytest.approx(want, abs=1e-10)


def test_spectral_gap_monotone_in_degree():
    p = ModelParams(1, 2)
    gaps = []
    for d in (1, 2, 3):
        gen = assemble_generator("reservoir", p, d)
        _, _, comp = invariant_projector(p, d)
        gaps.append(spectral_gap(gen, comp))
    assert gaps[0] >= gaps[1] >= gaps[2]
    assert gaps[-1] > 0.0


def test_joint_basis_shape():
    p = ModelParams(1, 2)
    b = joint_basis(p, 2)
    assert b.nvars == 9
    assert b.size == 55
