"""Tests for the pure-state density-matrix basis, its parameterization and the ensemble states."""

import numpy as np
import pytest

from app.exceptions import DimensionError, InvalidIndexError, StateValidationError
from app.services.basis import (
    basis_initial_states, basis_matrices, basis_matrix, density_from_coefficients, ensemble_state,
    ensemble_state_partial, expand_in_basis, is_admissible, pure_initial_state, q2_admissible, q2_matrix,
    verify_basis,
)
from tests.conftest import projector, random_density


class TestBasisMatrix:
    def test_diagonal_element(self):
        np.testing.assert_array_equal(basis_matrix(3, 1, 1), projector(3, 1))

    def test_real_superposition(self):
        np.testing.assert_allclose(basis_matrix(2, 0, 1), [[0.5, 0.5], [0.5, 0.5]])

    def test_imaginary_superposition(self):
        np.testing.assert_allclose(basis_matrix(2, 1, 0), [[0.5, 0.5j], [-0.5j, 0.5]])

    @pytest.mark.parametrize("n", [2, 3, 5])
    def test_every_element_is_a_pure_state(self, n):
        for b in basis_matrices(n):
            assert np.linalg.matrix_rank(b, tol=1e-10) == 1
            np.testing.assert_allclose(b @ b, b, atol=1e-12)

    def test_index_out_of_range(self):
        with pytest.raises(InvalidIndexError):
            basis_matrix(2, 0, 2)


class TestVerifyBasis:
    @pytest.mark.parametrize("n", range(2, 17))
    def test_all_properties_hold(self, n):
        report = verify_basis(n)
        assert report.ok
        assert report.min_singular_value > 1e-10

    def test_dimension_cap(self):
        with pytest.raises(DimensionError):
            verify_basis(17)

    def test_dependent_set_detected(self):
        matrices = basis_matrices(2)
        matrices[3] = matrices[0]
        report = verify_basis(2, matrices)
        assert report.hermitian and report.psd and report.unit_trace
        assert not report.independent


class TestEnsembleState:
    def test_two_levels(self):
        expected = np.array([[0.5, (1 + 1j) / 8], [(1 - 1j) / 8, 0.5]])
        np.testing.assert_allclose(ensemble_state(2), expected)

    @pytest.mark.parametrize("n", [2, 3, 6])
    def test_uniform_diagonal_and_valid_state(self, n):
        rho = ensemble_state(n)
        np.testing.assert_allclose(np.diag(rho).real, np.full(n, 1.0 / n))
        np.testing.assert_allclose(rho, rho.conj().T)
        assert np.linalg.eigvalsh(rho).min() > 0

    def test_partial_first_subsystem(self):
        rho = ensemble_state_partial([3, 2], [1])
        np.testing.assert_allclose(rho, np.kron(ensemble_state(3), projector(2, 0)))

    def test_partial_second_subsystem(self):
        rho = ensemble_state_partial([2, 3], [2])
        np.testing.assert_allclose(rho, np.kron(projector(2, 0), ensemble_state(3)))

    def test_partial_over_everything_is_full(self):
        np.testing.assert_allclose(ensemble_state_partial([2, 2], [1, 2]), ensemble_state(4))

    def test_overlapping_partition(self):
        with pytest.raises(DimensionError):
            ensemble_state_partial([2, 2], [1], ground_subsystems=[1, 2])

    def test_mean_of_basis_initial_states(self):
        states = list(basis_initial_states([3, 2], [1]))
        assert len(states) == 9
        np.testing.assert_allclose(sum(states) / 9, ensemble_state_partial([3, 2], [1]), atol=1e-15)

    def test_pure_initial_state(self):
        np.testing.assert_allclose(pure_initial_state([3, 2], [1], 2), np.kron(projector(3, 2), projector(2, 0)))


class TestExpansion:
    def test_expand_known_matrix(self):
        rho = np.array([[0.75, (1 + 1j) / 4], [(1 - 1j) / 4, 0.25]])
        z = expand_in_basis(rho)
        np.testing.assert_allclose(z, [[0.25, 0.5], [0.5, -0.25]], atol=1e-14)

    def test_coefficients_to_matrix(self):
        z = np.array([[0.5, 0.5], [-0.5, 0.5]])
        expected = np.array([[0.5, (1 - 1j) / 4], [(1 + 1j) / 4, 0.5]])
        np.testing.assert_allclose(density_from_coefficients(z), expected, atol=1e-15)
        np.testing.assert_allclose(expand_in_basis(expected), z, atol=1e-14)

    @pytest.mark.parametrize("n", [2, 3, 4])
    def test_reconstruction(self, n, rng):
        rho = random_density(n, rng)
        z = expand_in_basis(rho)
        assert z.dtype.kind == "f"
        np.testing.assert_allclose(density_from_coefficients(z), rho, atol=1e-12)
        assert z.sum() == pytest.approx(1.0, abs=1e-12)

    def test_non_hermitian_rejected(self):
        with pytest.raises(StateValidationError):
            expand_in_basis(np.array([[1.0, 1.0], [0.0, 0.0]]))


class TestTwoLevelAdmissibleSet:
    def test_explicit_point(self):
        assert q2_admissible(0.5, 0.5, -0.5)
        assert is_admissible(np.array([[0.5, 0.5], [-0.5, 0.5]]))

    def test_ellipsoid_matches_eigenvalue_oracle(self):
        rng = np.random.default_rng(7)
        samples = rng.uniform(-2.0, 2.0, size=(10000, 3))
        disagreements = 0
        for z00, z11, z10 in samples:
            rho = q2_matrix(z00, z11, z10)
            oracle = np.linalg.eigvalsh(rho).min() >= -1e-10
            disagreements += q2_admissible(z00, z11, z10) != oracle
        assert disagreements == 0

    def test_outside_point(self):
        assert not q2_admissible(2.0, 2.0, 2.0)
        assert not is_admissible(np.array([[2.0, -5.0], [2.0, 2.0]]))
