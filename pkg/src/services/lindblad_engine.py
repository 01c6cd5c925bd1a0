#!/usr/bin/env python3
"""
Lindblad Engine Service
Builds the probe-mode and probe-ancilla-mode GKSL generators and integrates
them with fixed-step classic Runge-Kutta on the vectorized generator.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.core.errors import (ConvergenceError, DimensionMismatchError, PositivityError,
                             StepSizeError, TruncationError)
from src.core.quantum_core import (ComplexMatrix, CompositeSpace, DensityMatrix, as_complex_matrix,
                                   boson_ops, embed, excitation_number_operator, identity, partial_trace,
                                   sigma_minus, sigma_plus, sigma_z, top_fock_population)

logger = logging.getLogger(__name__)

DEFAULT_STEP_FACTOR = 1e-3


@dataclass(frozen=True)
class SystemParams:
    """
    Physical rates and frequencies of the probe/ancilla/mode model.

    All frequencies and rates are angular (rad/s); ``n_bar`` is the reservoir
    mean occupation and ``n_max`` the Fock truncation of the mode.
    """

    omega: float
    omega_tilde: float
    omega_m: float
    lam: float
    lam_tilde: float
    gamma: float
    gamma_se: float = 0.0
    n_bar: float = 0.0
    n_max: int = 7

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError(f"Mode damping rate must be non-negative, got {self.gamma}")
        if self.gamma_se < 0:
            raise ValueError(f"Spontaneous emission rate must be non-negative, got {self.gamma_se}")
        if self.n_bar < 0:
            raise ValueError(f"Mean occupation must be non-negative, got {self.n_bar}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ValueError(f"n_max must be a positive integer, got {self.n_max}")
        object.__setattr__(self, 'n_max', int(self.n_max))

    @classmethod
    def from_hz(cls, omega_hz: float, omega_tilde_hz: float, omega_m_hz: float,
                lam_hz: float, lam_tilde_hz: float, gamma_hz: float,
                gamma_se_hz: float = 0.0, n_bar: float = 0.0, n_max: int = 7) -> "SystemParams":
        """Build from ordinary frequencies nu = omega / 2pi given in Hz."""
        two_pi = 2.0 * math.pi
        return cls(omega=two_pi * omega_hz, omega_tilde=two_pi * omega_tilde_hz,
                   omega_m=two_pi * omega_m_hz, lam=two_pi * lam_hz,
                   lam_tilde=two_pi * lam_tilde_hz, gamma=two_pi * gamma_hz,
                   gamma_se=two_pi * gamma_se_hz, n_bar=n_bar, n_max=n_max)

    def with_changes(self, **changes) -> "SystemParams":
        return replace(self, **changes)

    @property
    def characteristic_rate(self) -> float:
        """Largest rate or frequency entering the generator."""
        return max(self.gamma, abs(self.lam), abs(self.lam_tilde), abs(self.omega),
                   abs(self.omega_m), abs(self.omega_tilde), self.gamma_se)


@dataclass(frozen=True)
class JumpOperator:
    """One dissipator term rate * (L rho L^dag - {L^dag L, rho}/2)."""

    rate: float
    operator: ComplexMatrix = field(repr=False)
    label: str = ""


@dataclass(frozen=True)
class LindbladModel:
    """Hamiltonian plus jump operators on a composite space."""

    space: CompositeSpace
    hamiltonian: ComplexMatrix = field(repr=False)
    jumps: Tuple[JumpOperator, ...] = ()
    characteristic_rate: Optional[float] = None

    def __post_init__(self):
        hamiltonian = as_complex_matrix(self.hamiltonian)
        if hamiltonian.shape != (self.space.dim, self.space.dim):
            raise DimensionMismatchError(
                f"Hamiltonian shape {hamiltonian.shape} does not match space dimension {self.space.dim}"
            )
        if np.max(np.abs(hamiltonian - hamiltonian.conj().T), initial=0.0) > 1e-10:
            raise ValueError("Hamiltonian is not Hermitian")
        for jump in self.jumps:
            if jump.rate < 0:
                raise ValueError(f"Jump rate must be non-negative, got {jump.rate} for '{jump.label}'")
            if np.shape(jump.operator) != hamiltonian.shape:
                raise DimensionMismatchError(f"Jump operator '{jump.label}' has the wrong shape")
        hamiltonian.setflags(write=False)
        object.__setattr__(self, 'hamiltonian', hamiltonian)
        object.__setattr__(self, 'jumps', tuple(self.jumps))

    @property
    def time_scale_rate(self) -> float:
        """Rate used to pick the default step."""
        if self.characteristic_rate is not None:
            return self.characteristic_rate
        spectral = float(np.max(np.abs(np.linalg.eigvalsh(self.hamiltonian)), initial=0.0))
        dissipative = sum(j.rate * float(np.linalg.norm(j.operator, 2)) ** 2 for j in self.jumps)
        return max(spectral, dissipative)


@dataclass(frozen=True)
class Trajectory:
    """States sampled at increasing times."""

    times: np.ndarray
    states: Tuple[DensityMatrix, ...]
    dt: float

    def __len__(self) -> int:
        return len(self.states)

    @property
    def final_state(self) -> DensityMatrix:
        return self.states[-1]

    def probe_states(self) -> List[DensityMatrix]:
        return [partial_trace(state, 0) for state in self.states]

    def probe_coherence(self) -> np.ndarray:
        """<1|rho_probe|0> at every sample."""
        return np.array([state.matrix[1, 0] for state in self.probe_states()])

    def probe_excited_population(self) -> np.ndarray:
        return np.array([state.matrix[1, 1].real for state in self.probe_states()])


def _dissipation_jumps(p: SystemParams, space: CompositeSpace) -> List[JumpOperator]:
    """Laser-cooling dissipator on the mode plus spontaneous emission of each qubit."""
    a, a_dag = boson_ops(p.n_max)
    mode = space.index_of("mode")
    candidates = [
        JumpOperator(p.gamma * (p.n_bar + 1.0), embed(a, mode, space), "cooling"),
        JumpOperator(p.gamma * p.n_bar, embed(a_dag, mode, space), "heating"),
    ]
    for label in ("probe", "ancilla"):
        if space.has(label):
            candidates.append(JumpOperator(p.gamma_se, embed(sigma_minus(), space.index_of(label), space),
                                           f"emission_{label}"))
    return [jump for jump in candidates if jump.rate > 0]


def _exchange(qubit: int, mode: int, space: CompositeSpace, n_max: int) -> ComplexMatrix:
    """sigma- (x) a_dag + sigma+ (x) a"""
    a, a_dag = boson_ops(n_max)
    return (embed(sigma_minus(), qubit, space) @ embed(a_dag, mode, space)
            + embed(sigma_plus(), qubit, space) @ embed(a, mode, space))


def build_probe_mode_model(p: SystemParams) -> LindbladModel:
    """
    Probe qubit coupled to a damped mode.

    H = (omega/2) sz + omega_m a_dag a + lam (s- a_dag + s+ a)
    """
    space = CompositeSpace.qubit_mode(p.n_max)
    a, a_dag = boson_ops(p.n_max)
    hamiltonian = (0.5 * p.omega * embed(sigma_z(), 0, space)
                   + p.omega_m * embed(a_dag @ a, 1, space)
                   + p.lam * _exchange(0, 1, space, p.n_max))
    return LindbladModel(space, hamiltonian, tuple(_dissipation_jumps(p, space)), p.characteristic_rate)


def build_ancilla_model(p: SystemParams) -> LindbladModel:
    """
    Probe and ancilla qubits sharing one damped mode.

    Jumps: (Gamma(n_bar+1), a), (Gamma n_bar, a_dag), (Gamma_se, s-), (Gamma_se, s~-);
    vanishing rates are dropped.
    """
    space = CompositeSpace.probe_ancilla_mode(p.n_max)
    a, a_dag = boson_ops(p.n_max)
    hamiltonian = (0.5 * p.omega * embed(sigma_z(), 0, space)
                   + 0.5 * p.omega_tilde * embed(sigma_z(), 1, space)
                   + p.omega_m * embed(a_dag @ a, 2, space)
                   + p.lam * _exchange(0, 2, space, p.n_max)
                   + p.lam_tilde * _exchange(1, 2, space, p.n_max))
    return LindbladModel(space, hamiltonian, tuple(_dissipation_jumps(p, space)), p.characteristic_rate)


def lindblad_rhs(model: LindbladModel, rho: ComplexMatrix) -> ComplexMatrix:
    """GKSL right-hand side in matrix form."""
    h = model.hamiltonian
    drho = -1j * (h @ rho - rho @ h)
    for jump in model.jumps:
        c = jump.operator
        cd = c.conj().T
        cdc = cd @ c
        drho = drho + jump.rate * (c @ rho @ cd - 0.5 * (cdc @ rho + rho @ cdc))
    return drho


def liouvillian(model: LindbladModel) -> ComplexMatrix:
    """
    Superoperator acting on the row-major vectorization rho.reshape(-1).

    Uses vec(A rho B) = (A kron B^T) vec(rho).
    """
    dim = model.space.dim
    eye = identity(dim)
    h = model.hamiltonian
    generator = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for jump in model.jumps:
        c = jump.operator
        cdc = c.conj().T @ c
        generator += jump.rate * (np.kron(c, c.conj())
                                  - 0.5 * np.kron(cdc, eye)
                                  - 0.5 * np.kron(eye, cdc.T))
    return generator


def rk4_step_matrix(generator: ComplexMatrix, dt: float) -> ComplexMatrix:
    """
    One classic RK4 step of dy/dt = G y written as a matrix.

    The stages are applied to the identity, so y_{n+1} = S y_n.
    """
    eye = np.eye(generator.shape[0], dtype=np.complex128)
    k1 = generator
    k2 = generator @ (eye + 0.5 * dt * k1)
    k3 = generator @ (eye + 0.5 * dt * k2)
    k4 = generator @ (eye + dt * k3)
    return eye + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def default_time_step(model: LindbladModel, step_factor: float = DEFAULT_STEP_FACTOR) -> float:
    """step_factor / (largest rate of the model); infinite for a null generator."""
    rate = model.time_scale_rate
    return math.inf if rate == 0 else step_factor / rate


def _sample_grid(t_final: float, sample_count: int, sample_times: Optional[Sequence[float]]) -> np.ndarray:
    if sample_times is not None:
        times = np.asarray(sample_times, dtype=float)
        if times.ndim != 1 or times.size < 1 or times[0] < 0 or np.any(np.diff(times) <= 0):
            raise ValueError("Sample times must be non-negative and strictly increasing")
        return times
    if t_final <= 0:
        raise ValueError(f"t_final must be positive, got {t_final}")
    if sample_count < 2:
        raise ValueError(f"sample_count must be at least 2, got {sample_count}")
    return np.linspace(0.0, t_final, sample_count)


def _certify(state: DensityMatrix, time: float, trace_tol: float, positivity_tol: float,
             truncation_tol: Optional[float]) -> None:
    drift = abs(state.trace - 1.0)
    if drift > trace_tol:
        raise StepSizeError(f"Trace drift {drift:.3e} at t={time:.6g}s exceeds {trace_tol:.1e}; reduce dt")
    if state.hermiticity_error > trace_tol:
        raise StepSizeError(f"Hermiticity error {state.hermiticity_error:.3e} at t={time:.6g}s; reduce dt")
    if state.min_eigenvalue < -positivity_tol:
        raise PositivityError(f"Eigenvalue {state.min_eigenvalue:.3e} at t={time:.6g}s below -{positivity_tol:.1e}")
    if truncation_tol is not None:
        top = top_fock_population(state)
        if top > truncation_tol:
            raise TruncationError(f"Top Fock level population {top:.3e} at t={time:.6g}s; increase n_max")


def conserves_excitations(model: LindbladModel) -> bool:
    """True when neither H nor any active jump can raise the total excitation number."""
    counts = np.diag(excitation_number_operator(model.space)).real
    changes = np.abs(counts[:, None] - counts[None, :]) > 0.5
    if np.any(np.abs(model.hamiltonian)[changes] > 1e-12):
        return False
    raising = counts[:, None] > counts[None, :] + 0.5
    return not any(np.any(np.abs(jump.operator)[raising] > 0) for jump in model.jumps if jump.rate > 0)


def evolve(model: LindbladModel,
           rho0: DensityMatrix,
           t_final: float,
           dt: Optional[float] = None,
           sample_count: int = 2,
           sample_times: Optional[Sequence[float]] = None,
           trace_tol: float = 1e-6,
           positivity_tol: float = 1e-6,
           truncation_tol: Optional[float] = 1e-6) -> Trajectory:
    """
    Integrate the master equation with fixed-step RK4.

    The RK4 step of a time-independent linear generator is a fixed matrix, so
    the steps between two samples are composed by repeated squaring.

    Args:
        model (LindbladModel): Generator
        rho0 (DensityMatrix): Initial state on ``model.space``
        t_final (float): Final time (s), ignored when ``sample_times`` is given
        dt (float, optional): Requested step (s); defaults to ``default_time_step``
        sample_count (int): Number of equally spaced samples over [0, t_final]
        sample_times (Sequence[float], optional): Explicit sample times
        trace_tol (float): Trace/Hermiticity drift that rejects the step size
        positivity_tol (float): Most negative eigenvalue tolerated
        truncation_tol (float, optional): Top Fock population tolerated; None disables

    Returns:
        Trajectory: States at every sample time

    Raises:
        DimensionMismatchError: If rho0 does not live on the model space
        StepSizeError, PositivityError, TruncationError: If a sample leaves the envelope
    """
    if rho0.space.factor_dims != model.space.factor_dims:
        raise DimensionMismatchError(
            f"State dimensions {rho0.space.factor_dims} do not match model {model.space.factor_dims}"
        )
    times = _sample_grid(t_final, sample_count, sample_times)
    if dt is None:
        dt = default_time_step(model)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if not model.space.has("mode") or conserves_excitations(model):
        truncation_tol = None

    dim = model.space.dim
    generator = liouvillian(model)
    propagators: Dict[Tuple[int, float], np.ndarray] = {}
    vec = np.asarray(rho0.matrix).reshape(-1).copy()

    states = []
    previous = 0.0
    used_dt = 0.0
    for time in times:
        interval = time - previous
        if interval > 0:
            n_steps = max(1, math.ceil(interval / dt - 1e-9))
            step = interval / n_steps
            used_dt = max(used_dt, step)
            key = (n_steps, round(step, 18))
            if key not in propagators:
                propagators[key] = np.linalg.matrix_power(rk4_step_matrix(generator, step), n_steps)
            vec = propagators[key] @ vec
        state = DensityMatrix(rho0.space, vec.reshape(dim, dim))
        _certify(state, time, trace_tol, positivity_tol, truncation_tol)
        states.append(state)
        previous = time

    logger.debug("✅ Evolved %d-dimensional state over %d samples (dt=%.3e s)", dim, len(states), used_dt)
    return Trajectory(times=times, states=tuple(states), dt=used_dt)


def check_convergence(model: LindbladModel,
                      rho0: DensityMatrix,
                      t_final: float,
                      dt: Optional[float] = None,
                      sample_count: int = 2,
                      tolerance: float = 1e-8) -> float:
    """
    Step-halving self-test.

    Returns:
        float: Largest entrywise deviation between the dt and dt/2 runs

    Raises:
        ConvergenceError: If the deviation exceeds ``tolerance``
    """
    if dt is None:
        dt = default_time_step(model)
    coarse = evolve(model, rho0, t_final, dt, sample_count)
    fine = evolve(model, rho0, t_final, dt / 2.0, sample_count)
    deviation = max(float(np.max(np.abs(a.matrix - b.matrix))) for a, b in zip(coarse.states, fine.states))
    if deviation > tolerance:
        raise ConvergenceError(f"Halving dt changed the state by {deviation:.3e} (> {tolerance:.1e})")
    logger.info("✅ Step-halving check passed (deviation %.3e)", deviation)
    return deviation
