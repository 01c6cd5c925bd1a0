#!/usr/bin/env python3
"""
Quantum core module.
Dense complex matrices, composite Hilbert-space bookkeeping, operator
construction and the state factories used by every simulation service.

Conventions:
    * every operator is a complex128 numpy array (``ComplexMatrix``)
    * a qubit factor is ordered (|0>, |1>), so sigma_z = |1><1| - |0><0|
    * composite spaces are ordered probe, ancilla, mode
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple, Union

import numpy as np
import numpy.typing as npt

from src.core.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

ComplexMatrix = npt.NDArray[np.complex128]

CANONICAL_ORDER = ("probe", "ancilla", "mode")

HERMITICITY_TOLERANCE = 1e-10
TRACE_TOLERANCE = 1e-10
POSITIVITY_TOLERANCE = 1e-8


def as_complex_matrix(values) -> ComplexMatrix:
    """Return a 2-D complex128 copy of ``values``."""
    matrix = np.array(values, dtype=np.complex128)
    if matrix.ndim != 2:
        raise ValueError(f"Expected a 2-D matrix, got shape {matrix.shape}")
    return matrix


def matrices_close(a: ComplexMatrix, b: ComplexMatrix, atol: float) -> bool:
    """Entrywise comparison with an explicit absolute tolerance."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        return False
    return bool(np.max(np.abs(a - b), initial=0.0) <= atol)


@dataclass(frozen=True)
class CompositeSpace:
    """
    Ordered tensor-product space.

    Attributes:
        factor_dims: Subsystem dimensions, e.g. (2, 2, n_max + 1)
        labels: Optional subsystem names, a subsequence of probe/ancilla/mode
    """

    factor_dims: Tuple[int, ...]
    labels: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.factor_dims)
        if not dims or any(d < 1 for d in dims):
            raise ValueError(f"Subsystem dimensions must be positive, got {self.factor_dims}")
        object.__setattr__(self, 'factor_dims', dims)

        if self.labels is not None:
            labels = tuple(self.labels)
            if len(labels) != len(dims):
                raise ValueError("One label per subsystem is required")
            positions = [CANONICAL_ORDER.index(label) for label in labels]
            if positions != sorted(set(positions)):
                raise ValueError(f"Subsystems must follow the order {CANONICAL_ORDER}, got {labels}")
            object.__setattr__(self, 'labels', labels)

    @property
    def dim(self) -> int:
        """Total dimension."""
        return int(np.prod(self.factor_dims))

    @property
    def n_factors(self) -> int:
        return len(self.factor_dims)

    def index_of(self, label: str) -> int:
        """Position of a labelled subsystem."""
        if self.labels is None or label not in self.labels:
            raise KeyError(f"Subsystem '{label}' not present in {self.labels}")
        return self.labels.index(label)

    def has(self, label: str) -> bool:
        return self.labels is not None and label in self.labels

    @classmethod
    def qubit_mode(cls, n_max: int) -> "CompositeSpace":
        """Probe qubit and one truncated bosonic mode."""
        return cls((2, n_max + 1), ("probe", "mode"))

    @classmethod
    def probe_ancilla_mode(cls, n_max: int) -> "CompositeSpace":
        """Probe qubit, ancilla qubit and one truncated bosonic mode."""
        return cls((2, 2, n_max + 1), ("probe", "ancilla", "mode"))


@dataclass(frozen=True)
class DensityMatrix:
    """
    Density operator on a composite space.

    The stored matrix is a read-only copy; construction does not enforce the
    physical invariants (propagated states carry integrator error), call
    ``validate`` to certify them.
    """

    space: CompositeSpace
    matrix: ComplexMatrix = field(repr=False)

    def __post_init__(self):
        matrix = as_complex_matrix(self.matrix)
        if matrix.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"Matrix shape {matrix.shape} does not match space dimension {self.space.dim}"
            )
        matrix.setflags(write=False)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    @property
    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    @property
    def hermiticity_error(self) -> float:
        """max |rho_ij - conj(rho_ji)|"""
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    @property
    def min_eigenvalue(self) -> float:
        hermitian_part = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(hermitian_part)[0])

    def element(self, row: int, col: int) -> complex:
        return complex(self.matrix[row, col])

    def validate(self,
                 hermiticity_tol: float = HERMITICITY_TOLERANCE,
                 trace_tol: float = TRACE_TOLERANCE,
                 positivity_tol: float = POSITIVITY_TOLERANCE) -> "DensityMatrix":
        """
        Check the density-matrix invariants.

        Returns:
            DensityMatrix: self, for chaining

        Raises:
            ValueError: If any invariant is violated
        """
        if self.hermiticity_error > hermiticity_tol:
            raise ValueError(f"State is not Hermitian (error {self.hermiticity_error:.3e})")
        if abs(self.trace - 1.0) > trace_tol:
            raise ValueError(f"State trace {self.trace:.12g} differs from 1")
        if self.min_eigenvalue < -positivity_tol:
            raise ValueError(f"State has negative eigenvalue {self.min_eigenvalue:.3e}")
        return self


def kron(a: ComplexMatrix, b: ComplexMatrix) -> ComplexMatrix:
    """Kronecker product; row index of the result is i * rows_b + k."""
    return np.kron(as_complex_matrix(a), as_complex_matrix(b))


def kron_all(*operators: ComplexMatrix) -> ComplexMatrix:
    """Kronecker product of several factors, left to right."""
    if not operators:
        raise ValueError("At least one operator is required")
    result = as_complex_matrix(operators[0])
    for op in operators[1:]:
        result = kron(result, op)
    return result


def identity(dim: int) -> ComplexMatrix:
    return np.eye(dim, dtype=np.complex128)


def embed(op: ComplexMatrix, index: int, space: CompositeSpace) -> ComplexMatrix:
    """Lift a single-factor operator to the full composite space."""
    op = as_complex_matrix(op)
    if not 0 <= index < space.n_factors:
        raise IndexError(f"Subsystem index {index} out of range for {space.factor_dims}")
    if op.shape != (space.factor_dims[index],) * 2:
        raise DimensionMismatchError(
            f"Operator shape {op.shape} does not fit subsystem {index} of dimension {space.factor_dims[index]}"
        )
    factors = [identity(d) for d in space.factor_dims]
    factors[index] = op
    return kron_all(*factors)


def partial_trace(rho: DensityMatrix, keep: Union[int, Sequence[int]]) -> DensityMatrix:
    """
    Trace out every subsystem not listed in ``keep``.

    Args:
        rho (DensityMatrix): State on a composite space
        keep (int | Sequence[int]): Subsystem index or indices to keep;
            kept factors retain the ordering of ``rho.space``

    Returns:
        DensityMatrix: Reduced state on the kept factors

    Raises:
        IndexError: If an index is out of range
    """
    space = rho.space
    kept = sorted({keep} if isinstance(keep, (int, np.integer)) else set(keep))
    if not kept:
        raise ValueError("At least one subsystem must be kept")
    for index in kept:
        if not 0 <= index < space.n_factors:
            raise IndexError(f"Subsystem index {index} out of range for {space.factor_dims}")

    dims = space.factor_dims
    tensor = np.asarray(rho.matrix).reshape(dims + dims)
    remaining = len(dims)
    for axis in reversed(range(len(dims))):
        if axis in kept:
            continue
        tensor = np.trace(tensor, axis1=axis, axis2=axis + remaining)
        remaining -= 1

    kept_dims = tuple(dims[i] for i in kept)
    kept_dim = int(np.prod(kept_dims))
    labels = None if space.labels is None else tuple(space.labels[i] for i in kept)
    return DensityMatrix(CompositeSpace(kept_dims, labels), tensor.reshape(kept_dim, kept_dim))


def boson_ops(n_max: int) -> Tuple[ComplexMatrix, ComplexMatrix]:
    """
    Truncated ladder operators on span{|0>, ..., |n_max>}.

    Returns:
        Tuple[ComplexMatrix, ComplexMatrix]: (a, a_dag) with a|n> = sqrt(n)|n-1>
    """
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1).astype(np.complex128)
    return a, a.conj().T.copy()


def sigma_minus() -> ComplexMatrix:
    """Lowering operator |0><1|."""
    return np.array([[0, 1], [0, 0]], dtype=np.complex128)


def sigma_plus() -> ComplexMatrix:
    """Raising operator |1><0|."""
    return np.array([[0, 0], [1, 0]], dtype=np.complex128)


def sigma_z() -> ComplexMatrix:
    """|1><1| - |0><0|"""
    return np.array([[-1, 0], [0, 1]], dtype=np.complex128)


def sigma_x() -> ComplexMatrix:
    return np.array([[0, 1], [1, 0]], dtype=np.complex128)


def pure_state(vector, space: Optional[CompositeSpace] = None) -> DensityMatrix:
    """Density matrix |psi><psi| of a normalised copy of ``vector``."""
    psi = np.asarray(vector, dtype=np.complex128).reshape(-1)
    norm = np.linalg.norm(psi)
    if norm == 0:
        raise ValueError("Cannot build a state from the zero vector")
    psi = psi / norm
    if space is None:
        space = CompositeSpace((psi.size,))
    return DensityMatrix(space, np.outer(psi, psi.conj()))


def ground_state(dim: int) -> DensityMatrix:
    """|0><0| on a single factor of dimension ``dim``."""
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[0, 0] = 1.0
    return DensityMatrix(CompositeSpace((dim,)), matrix)


def product_state(*states: DensityMatrix, labels: Optional[Sequence[str]] = None) -> DensityMatrix:
    """Tensor product of single-space states."""
    dims = tuple(d for state in states for d in state.space.factor_dims)
    space = CompositeSpace(dims, None if labels is None else tuple(labels))
    return DensityMatrix(space, kron_all(*(state.matrix for state in states)))


def thermal_state(n_bar: float, n_max: int) -> DensityMatrix:
    """
    Truncated thermal state of a bosonic mode.

    p_n is proportional to (n_bar / (n_bar + 1))**n and renormalised over
    |0>..|n_max> so the trace is one.
    """
    if n_bar < 0:
        raise ValueError(f"Mean occupation must be non-negative, got {n_bar}")
    if n_max < 1:
        raise ValueError(f"n_max must be at least 1, got {n_max}")
    ratio = n_bar / (n_bar + 1.0)
    weights = ratio ** np.arange(n_max + 1, dtype=float)
    weights /= weights.sum()
    return DensityMatrix(CompositeSpace((n_max + 1,)), np.diag(weights).astype(np.complex128))


def qubit_superposition_state() -> DensityMatrix:
    """(|0> + i|1>)/sqrt(2), the state prepared by the first Ramsey pulse."""
    return pure_state(np.array([1.0, 1.0j]) / np.sqrt(2.0))


def excitation_number_operator(space: CompositeSpace) -> ComplexMatrix:
    """
    Total excitation number: sigma+ sigma- on every qubit plus a_dag a on the mode.

    Requires a labelled space.
    """
    if space.labels is None:
        raise ValueError("Excitation counting needs a labelled space")
    total = np.zeros((space.dim, space.dim), dtype=np.complex128)
    for index, label in enumerate(space.labels):
        if label == "mode":
            a, a_dag = boson_ops(space.factor_dims[index] - 1)
            total += embed(a_dag @ a, index, space)
        else:
            total += embed(sigma_plus() @ sigma_minus(), index, space)
    return total


def top_fock_population(rho: DensityMatrix) -> float:
    """Population of |n_max> of the mode factor."""
    mode_state = partial_trace(rho, rho.space.index_of("mode"))
    return float(np.real(mode_state.matrix[-1, -1]))
