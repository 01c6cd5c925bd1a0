#!/usr/bin/env python3
"""
Ion Crystal Service
Axial equilibrium, normal modes, Lamb-Dicke factors and effective spin-mode
couplings of a linear ion chain in a harmonic trap.

Lengths are handled in units of l, with l^3 = e^2 / (4 pi eps0 m_ref omega_z^2),
and frequencies in units of omega_z. The trap curvature is species independent.
"""

import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import constants, optimize

from src.core.errors import ConvergenceError, LambDickeWarning, UnstableCrystalError

logger = logging.getLogger(__name__)

CA40_MASS = 39.9626
MG24_MASS = 23.9850
FORCE_TOLERANCE = 1e-12
MAX_ITERATIONS = 200
LAMB_DICKE_LIMIT = 0.3


@dataclass(frozen=True)
class CrystalConfig:
    """
    Linear chain description.

    Attributes:
        masses: Ion masses along the chain (amu)
        reference_mass: Mass defining ``omega_z`` (amu)
        omega_z: Single-ion axial angular frequency of the reference mass (rad/s)
        laser_wavelength: Wavelength of the coupling laser (m)
        laser_axis_projection: Fraction of |k| along the trap axis
        qubit_ions: Chain indices of the probe and ancilla ions
    """

    masses: Tuple[float, ...]
    reference_mass: float = CA40_MASS
    omega_z: float = 2.0 * math.pi * 1.0e6
    laser_wavelength: float = 729e-9
    laser_axis_projection: float = 1.0
    qubit_ions: Tuple[int, ...] = field(default=(0, 1))

    def __post_init__(self):
        object.__setattr__(self, 'masses', tuple(float(m) for m in self.masses))
        object.__setattr__(self, 'qubit_ions', tuple(int(i) for i in self.qubit_ions))
        if len(self.masses) < 2:
            raise ValueError("A crystal needs at least two ions")
        if any(m <= 0 for m in self.masses) or self.reference_mass <= 0:
            raise ValueError("Ion masses must be positive")
        if self.omega_z <= 0:
            raise ValueError(f"omega_z must be positive, got {self.omega_z}")
        if self.laser_wavelength <= 0:
            raise ValueError(f"Laser wavelength must be positive, got {self.laser_wavelength}")
        if not 0.0 <= self.laser_axis_projection <= 1.0:
            raise ValueError(f"Laser axis projection must be in [0, 1], got {self.laser_axis_projection}")
        if any(not 0 <= i < len(self.masses) for i in self.qubit_ions):
            raise ValueError(f"Qubit ion indices {self.qubit_ions} outside the chain")

    @classmethod
    def ca_ca_mg(cls, omega_z: float = 2.0 * math.pi * 1.0e6, **kwargs) -> "CrystalConfig":
        """Probe Ca+, ancilla Ca+ and the Mg+ coolant ion, in chain order."""
        return cls(masses=(CA40_MASS, CA40_MASS, MG24_MASS), reference_mass=CA40_MASS, omega_z=omega_z, **kwargs)

    @classmethod
    def homogeneous(cls, n_ions: int, mass: float = CA40_MASS, omega_z: float = 2.0 * math.pi * 1.0e6,
                    **kwargs) -> "CrystalConfig":
        return cls(masses=(mass,) * n_ions, reference_mass=mass, omega_z=omega_z, **kwargs)

    @property
    def n_ions(self) -> int:
        return len(self.masses)

    @property
    def relative_masses(self) -> np.ndarray:
        return np.array(self.masses) / self.reference_mass

    @property
    def k_z(self) -> float:
        """Axial wave-vector component (1/m)."""
        return self.laser_axis_projection * 2.0 * math.pi / self.laser_wavelength


@dataclass(frozen=True)
class NormalModeResult:
    """Axial modes; columns of ``mode_matrix`` are mass-weighted eigenvectors."""

    equilibrium_positions: np.ndarray
    mode_frequencies: np.ndarray
    mode_matrix: np.ndarray
    length_scale: float

    @property
    def dissipative_mode(self) -> int:
        """Index of the highest-frequency mode."""
        return len(self.mode_frequencies) - 1

    @property
    def mode_frequencies_hz(self) -> np.ndarray:
        return self.mode_frequencies / (2.0 * math.pi)


def length_scale(config: CrystalConfig) -> float:
    """l = (e^2 / (4 pi eps0 m_ref omega_z^2))^(1/3) in metres."""
    mass = config.reference_mass * constants.atomic_mass
    coulomb = constants.e ** 2 / (4.0 * math.pi * constants.epsilon_0)
    return (coulomb / (mass * config.omega_z ** 2)) ** (1.0 / 3.0)


def _axial_force(u: np.ndarray) -> np.ndarray:
    """Gradient of sum u^2/2 + sum_{i<j} 1/|u_i - u_j|."""
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return u - np.sum(np.sign(diff) / diff ** 2, axis=1)


def _axial_hessian(u: np.ndarray) -> np.ndarray:
    diff = np.abs(u[:, None] - u[None, :])
    np.fill_diagonal(diff, np.inf)
    coupling = 2.0 / diff ** 3
    hessian = -coupling
    np.fill_diagonal(hessian, 1.0 + coupling.sum(axis=1))
    return hessian


def _dimensionless_equilibrium(n_ions: int) -> np.ndarray:
    guess = np.linspace(-0.5, 0.5, n_ions) * (n_ions - 1)
    solution, info, ier, message = optimize.fsolve(_axial_force, guess, fprime=_axial_hessian,
                                                  xtol=1e-14, maxfev=MAX_ITERATIONS, full_output=True)
    u = np.sort(solution)
    for _ in range(5):
        if np.max(np.abs(_axial_force(u))) < FORCE_TOLERANCE:
            break
        u = u - np.linalg.solve(_axial_hessian(u), _axial_force(u))
    residual = float(np.max(np.abs(_axial_force(u))))
    if residual >= FORCE_TOLERANCE or not np.all(np.diff(u) > 0):
        raise ConvergenceError(f"Equilibrium search did not converge (residual {residual:.3e}): {message}")
    return u


def equilibrium_positions(config: CrystalConfig) -> np.ndarray:
    """
    Axial equilibrium positions in metres, ascending along z.

    Raises:
        ConvergenceError: If the force residual stays above 1e-12 (in units of l)
    """
    return _dimensionless_equilibrium(config.n_ions) * length_scale(config)


def normal_modes(config: CrystalConfig) -> NormalModeResult:
    """
    Diagonalize the mass-weighted Hessian at equilibrium.

    Returns:
        NormalModeResult: Frequencies ascending (rad/s) and orthonormal
        mass-weighted eigenvectors, each signed so that its largest entry is positive

    Raises:
        UnstableCrystalError: If the Hessian has a negative eigenvalue
    """
    u = _dimensionless_equilibrium(config.n_ions)
    root_mass = np.sqrt(config.relative_masses)
    weighted = _axial_hessian(u) / np.outer(root_mass, root_mass)
    eigenvalues, vectors = np.linalg.eigh(weighted)
    if eigenvalues[0] <= 0:
        raise UnstableCrystalError(f"Negative curvature {eigenvalues[0]:.3e}: configuration is unstable")

    for n in range(vectors.shape[1]):
        if vectors[np.argmax(np.abs(vectors[:, n])), n] < 0:
            vectors[:, n] = -vectors[:, n]

    scale = length_scale(config)
    result = NormalModeResult(equilibrium_positions=u * scale,
                              mode_frequencies=np.sqrt(eigenvalues) * config.omega_z,
                              mode_matrix=vectors,
                              length_scale=scale)
    logger.info("✅ Axial modes (MHz): %s", np.array2string(result.mode_frequencies_hz / 1e6, precision=4))
    return result


def lamb_dicke(config: CrystalConfig, ion: int, mode: int, modes: NormalModeResult) -> float:
    """
    eta_jn = k_z sqrt(hbar / (2 m_j omega_n)).

    Issues a LambDickeWarning when eta >= 0.3.
    """
    mass = config.masses[ion] * constants.atomic_mass
    eta = config.k_z * math.sqrt(constants.hbar / (2.0 * mass * modes.mode_frequencies[mode]))
    if eta >= LAMB_DICKE_LIMIT:
        warnings.warn(f"Lamb-Dicke parameter {eta:.3f} for ion {ion}, mode {mode} is not small",
                      LambDickeWarning, stacklevel=2)
    return eta


def lamb_dicke_matrix(config: CrystalConfig, modes: NormalModeResult) -> np.ndarray:
    """eta_jn for every ion (rows) and mode (columns)."""
    return np.array([[lamb_dicke(config, j, n, modes) for n in range(len(modes.mode_frequencies))]
                     for j in range(config.n_ions)])


def _resolve(config: CrystalConfig, modes: NormalModeResult, mode: Optional[int],
             ions: Optional[Sequence[int]]) -> Tuple[int, Tuple[int, ...]]:
    mode = modes.dissipative_mode if mode is None else mode
    ions = config.qubit_ions if ions is None else tuple(ions)
    return mode, ions


def spin_mode_coupling(config: CrystalConfig,
                       modes: NormalModeResult,
                       rabi: Sequence[float],
                       phases: Sequence[float],
                       mode: Optional[int] = None,
                       ions: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Complex couplings lambda_j = i B_jn eta_jn Omega_j exp(i(k_z z_j + phi_j)) / 2.

    Args:
        config (CrystalConfig): Chain description
        modes (NormalModeResult): Output of ``normal_modes``
        rabi (Sequence[float]): Rabi frequency per qubit ion (rad/s)
        phases (Sequence[float]): Laser phase per qubit ion (rad)
        mode (int, optional): Mode index, the dissipative mode by default
        ions (Sequence[int], optional): Qubit ions, ``config.qubit_ions`` by default

    Returns:
        np.ndarray: Complex couplings (rad/s)
    """
    mode, ions = _resolve(config, modes, mode, ions)
    if not len(rabi) == len(phases) == len(ions):
        raise ValueError(f"Need one Rabi frequency and phase per qubit ion ({len(ions)})")
    couplings = []
    for ion, omega_j, phi_j in zip(ions, rabi, phases):
        eta = lamb_dicke(config, ion, mode, modes)
        position = modes.equilibrium_positions[ion]
        couplings.append(0.5j * modes.mode_matrix[ion, mode] * eta * omega_j
                         * np.exp(1j * (config.k_z * position + phi_j)))
    return np.array(couplings, dtype=np.complex128)


def rabi_for_couplings(config: CrystalConfig,
                       modes: NormalModeResult,
                       targets: Sequence[float],
                       mode: Optional[int] = None,
                       ions: Optional[Sequence[int]] = None) -> np.ndarray:
    """
    Rabi frequencies giving coupling magnitudes |targets| (rad/s).

    The sign of each target should agree with the mode-amplitude sign
    convention of ``effective_couplings``; a mismatch is logged.
    """
    mode, ions = _resolve(config, modes, mode, ions)
    if len(targets) != len(ions):
        raise ValueError(f"Need one target coupling per qubit ion ({len(ions)})")
    reference = modes.mode_matrix[ions[0], mode]
    rabi = []
    for ion, target in zip(ions, targets):
        amplitude = modes.mode_matrix[ion, mode]
        if amplitude == 0:
            raise ValueError(f"Ion {ion} does not move in mode {mode}")
        if target != 0 and np.sign(target) != np.sign(amplitude / reference):
            logger.warning("⚠️ Target coupling sign for ion %d disagrees with the mode amplitude sign", ion)
        rabi.append(2.0 * abs(target) / (abs(amplitude) * lamb_dicke(config, ion, mode, modes)))
    return np.array(rabi)


def effective_couplings(config: CrystalConfig,
                        modes: NormalModeResult,
                        couplings: Sequence[complex],
                        mode: Optional[int] = None,
                        ions: Optional[Sequence[int]] = None) -> np.ndarray:
    """Real couplings |lambda_j| signed by B_jn / B_{probe,n}."""
    mode, ions = _resolve(config, modes, mode, ions)
    reference = modes.mode_matrix[ions[0], mode]
    signs = np.sign(modes.mode_matrix[list(ions), mode] / reference)
    return np.abs(np.asarray(couplings)) * signs


def dissipative_amplitude_ratio(modes: NormalModeResult, ions: Sequence[int] = (0, 1),
                                mode: Optional[int] = None) -> float:
    """B_{ancilla,n} / B_{probe,n}; about -2.9 for the Ca-Ca-Mg chain."""
    mode = modes.dissipative_mode if mode is None else mode
    return float(modes.mode_matrix[ions[1], mode] / modes.mode_matrix[ions[0], mode])
