"""
Tests for the quantum core: composite spaces, operators, partial traces and states.
"""

import numpy as np
import pytest

from src.core.errors import DimensionMismatchError
from src.core.quantum_core import (CompositeSpace, DensityMatrix, boson_ops, embed,
                                   excitation_number_operator, ground_state, identity, kron,
                                   kron_all, matrices_close, partial_trace, product_state,
                                   pure_state, qubit_superposition_state, sigma_minus,
                                   sigma_plus, sigma_x, sigma_z, thermal_state,
                                   top_fock_population)


class TestCompositeSpace:
    """Test composite space bookkeeping."""

    def test_dimension_is_product(self):
        """Test total dimension of a probe-ancilla-mode space."""
        space = CompositeSpace.probe_ancilla_mode(7)
        assert space.factor_dims == (2, 2, 8)
        assert space.dim == 32
        assert space.index_of("mode") == 2

    def test_rejects_non_positive_dimension(self):
        """Test validation of subsystem dimensions."""
        with pytest.raises(ValueError):
            CompositeSpace((2, 0))

    def test_rejects_out_of_order_labels(self):
        """Test that labels must follow probe, ancilla, mode."""
        with pytest.raises(ValueError):
            CompositeSpace((2, 2), ("mode", "probe"))

    def test_missing_label(self):
        """Test lookup of an absent subsystem."""
        space = CompositeSpace.qubit_mode(3)
        assert not space.has("ancilla")
        with pytest.raises(KeyError):
            space.index_of("ancilla")


class TestOperators:
    """Test operator factories and Kronecker products."""

    def test_kron_sigma_z_identity(self):
        """Test kron(sigma_z, I) with the |0>, |1> ordering."""
        result = kron(sigma_z(), identity(2))
        assert matrices_close(result, np.diag([-1, -1, 1, 1]), atol=1e-15)

    def test_kron_dimensions(self):
        """Test that the Kronecker product of 2x2 and 3x3 is 6x6."""
        assert kron(identity(2), identity(3)).shape == (6, 6)

    def test_kron_all_matches_nested(self, rng):
        """Test kron_all against nested kron."""
        a, b, c = (rng.normal(size=(d, d)) for d in (2, 2, 4))
        assert matrices_close(kron_all(a, b, c), kron(kron(a, b), c), atol=1e-12)

    def test_kron_index_formula(self, rng):
        """Test kron against the element formula (i * rows_b + k, j * cols_b + l)."""
        def brute(a, b):
            rows_b, cols_b = b.shape
            out = np.zeros((a.shape[0] * rows_b, a.shape[1] * cols_b), dtype=np.complex128)
            for i in range(a.shape[0]):
                for j in range(a.shape[1]):
                    for k in range(rows_b):
                        for l in range(cols_b):
                            out[i * rows_b + k, j * cols_b + l] = a[i, j] * b[k, l]
            return out

        a, _ = boson_ops(3)
        assert matrices_close(kron(sigma_plus(), a), brute(sigma_plus(), a), atol=1e-15)
        for _ in range(10):
            x, y, z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for d in (2, 2, 4))
            assert matrices_close(kron(x, y), brute(x, y), atol=1e-12)
            assert matrices_close(kron_all(x, y, z), brute(brute(x, y), z), atol=1e-12)

    def test_number_operator_spectrum(self):
        """Test a_dag a has eigenvalues 0..n_max exactly."""
        for n_max in (1, 3, 7):
            a, a_dag = boson_ops(n_max)
            assert np.allclose(np.linalg.eigvalsh(a_dag @ a), np.arange(n_max + 1), atol=1e-12)

    def test_ladder_commutator(self):
        """Test [a, a_dag] = 1 below the truncation edge."""
        a, a_dag = boson_ops(5)
        commutator = a @ a_dag - a_dag @ a
        expected = np.eye(6)
        expected[-1, -1] = -5
        assert matrices_close(commutator, expected, atol=1e-12)

    def test_boson_ops_rejects_zero_truncation(self):
        """Test n_max validation."""
        with pytest.raises(ValueError):
            boson_ops(0)

    def test_qubit_operators(self):
        """Test sigma_minus lowers and sigma_plus raises."""
        one = np.array([0, 1])
        zero = np.array([1, 0])
        assert np.allclose(sigma_minus() @ one, zero)
        assert np.allclose(sigma_plus() @ zero, one)
        assert np.allclose(sigma_x() @ sigma_x(), np.eye(2))

    def test_embed_wrong_shape(self):
        """Test embedding a qubit operator into the mode factor."""
        with pytest.raises(DimensionMismatchError):
            embed(sigma_z(), 1, CompositeSpace.qubit_mode(3))

    def test_excitation_number_operator(self):
        """Test diagonal of the excitation counter on 2x2x(1+1)."""
        counter = excitation_number_operator(CompositeSpace.probe_ancilla_mode(1))
        expected = [0, 1, 1, 2, 1, 2, 2, 3]
        assert np.allclose(np.diag(counter).real, expected)


class TestPartialTrace:
    """Test partial traces against brute-force index contractions."""

    def test_product_state_factors(self):
        """Test that tracing a product returns its factors."""
        probe = qubit_superposition_state()
        mode = thermal_state(0.3, 4)
        rho = product_state(probe, mode, labels=("probe", "mode"))
        assert matrices_close(partial_trace(rho, 0).matrix, probe.matrix, atol=1e-12)
        assert matrices_close(partial_trace(rho, 1).matrix, mode.matrix, atol=1e-12)

    def test_random_three_factor_states(self, random_state_factory):
        """Test every reduction of random 2x2x4 states against einsum."""
        space = CompositeSpace.probe_ancilla_mode(3)
        for _ in range(20):
            matrix = random_state_factory(16)
            rho = DensityMatrix(space, matrix)
            tensor = matrix.reshape(2, 2, 4, 2, 2, 4)
            assert matrices_close(partial_trace(rho, 0).matrix, np.einsum('abcdbc->ad', tensor), 1e-12)
            assert matrices_close(partial_trace(rho, 1).matrix, np.einsum('abcaec->be', tensor), 1e-12)
            assert matrices_close(partial_trace(rho, 2).matrix, np.einsum('abcabf->cf', tensor), 1e-12)
            kept = np.einsum('abcdbf->acdf', tensor).reshape(8, 8)
            assert matrices_close(partial_trace(rho, (0, 2)).matrix, kept, 1e-12)

    def test_labels_follow_kept_factors(self):
        """Test that labels of kept subsystems are carried over."""
        rho = product_state(ground_state(2), ground_state(2), ground_state(3),
                            labels=("probe", "ancilla", "mode"))
        reduced = partial_trace(rho, [0, 2])
        assert reduced.space.labels == ("probe", "mode")
        assert reduced.space.factor_dims == (2, 3)

    def test_index_out_of_range(self):
        """Test invalid subsystem index."""
        rho = product_state(ground_state(2), ground_state(3))
        with pytest.raises(IndexError):
            partial_trace(rho, 2)


class TestStates:
    """Test state factories and density-matrix invariants."""

    def test_superposition_state(self):
        """Test (|0> + i|1>)/sqrt(2)."""
        rho = qubit_superposition_state().validate()
        assert rho.element(1, 0) == pytest.approx(0.5j)
        assert rho.purity == pytest.approx(1.0)

    def test_thermal_state_mean_occupation(self):
        """Test that a wide truncation reproduces n_bar."""
        rho = thermal_state(0.5, 60).validate()
        n = np.arange(61)
        assert float(np.sum(n * np.diag(rho.matrix).real)) == pytest.approx(0.5, abs=1e-8)

    def test_zero_temperature_is_vacuum(self):
        """Test n_bar = 0 gives |0><0|."""
        rho = thermal_state(0.0, 3)
        assert rho.element(0, 0) == pytest.approx(1.0)
        assert rho.trace == pytest.approx(1.0)

    @pytest.mark.parametrize("n_bar", [0.0, 0.02, 0.05, 0.5])
    def test_thermal_state_is_normalised(self, n_bar):
        """Test unit trace and non-negative populations."""
        rho = thermal_state(n_bar, 7)
        populations = np.diag(rho.matrix).real
        assert rho.trace == pytest.approx(1.0, abs=1e-12)
        assert np.all(populations >= 0)
        assert np.allclose(rho.matrix, np.diag(populations), atol=0)

    def test_thermal_state_tail(self):
        """Test the n_max = 7 truncation at n_bar = 0.02."""
        populations = np.diag(thermal_state(0.02, 7).matrix).real
        ratio = 0.02 / 1.02
        assert populations[-1] < 1e-10
        assert ratio ** 8 < 1e-10
        assert np.allclose(populations, (1 - ratio) * ratio ** np.arange(8), atol=1e-12)

    def test_top_fock_population(self):
        """Test the truncation diagnostic."""
        rho = product_state(ground_state(2), thermal_state(1.0, 3), labels=("probe", "mode"))
        assert top_fock_population(rho) == pytest.approx(0.125 / 1.875)

    def test_shape_mismatch(self):
        """Test that a matrix must match its space."""
        with pytest.raises(DimensionMismatchError):
            DensityMatrix(CompositeSpace((2, 2)), np.eye(2))

    def test_validate_rejects_negative_state(self):
        """Test positivity check."""
        rho = DensityMatrix(CompositeSpace((2,)), np.diag([1.2, -0.2]))
        with pytest.raises(ValueError):
            rho.validate()

    def test_validate_rejects_non_hermitian(self):
        """Test Hermiticity check."""
        rho = DensityMatrix(CompositeSpace((2,)), np.array([[0.5, 0.1], [0.0, 0.5]]))
        with pytest.raises(ValueError):
            rho.validate()

    def test_matrix_is_read_only(self):
        """Test that stored matrices cannot be mutated."""
        rho = pure_state([1, 0])
        with pytest.raises(ValueError):
            rho.matrix[0, 0] = 0
