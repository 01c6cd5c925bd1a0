#!/usr/bin/env python3
"""
Analytic Solutions Service
Closed-form decoherence functions of the single-excitation sector and the
general three-amplitude solution used as oracle for the numerical engine.
"""

import logging
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np
from scipy import linalg

from src.services.lindblad_engine import SystemParams

logger = logging.getLogger(__name__)

SERIES_THRESHOLD = 1e-4
CONDITION_LIMIT = 1e4

TimeLike = Union[float, np.ndarray]


class DecoherenceRates(NamedTuple):
    """Derived rates of the damped exchange problem."""

    delta: float
    chi: complex
    omega_root: complex
    z_root: complex


@dataclass(frozen=True)
class AmplitudeState:
    """Single-excitation amplitudes on |100>, |010> and |001>."""

    kappa: complex
    a_amp: complex
    kappa_tilde: complex

    @property
    def norm_squared(self) -> float:
        return abs(self.kappa) ** 2 + abs(self.a_amp) ** 2 + abs(self.kappa_tilde) ** 2


def decoherence_rates(p: SystemParams) -> DecoherenceRates:
    """
    Delta = omega - omega_m, chi = Gamma - 2i Delta,
    Omega = sqrt(chi^2/4 - 4 lam^2), Z = sqrt(Omega^2 - 4 lam_tilde^2).
    Principal square-root branch.
    """
    delta = p.omega - p.omega_m
    chi = complex(p.gamma, -2.0 * delta)
    omega_root = np.sqrt(chi * chi / 4.0 - 4.0 * p.lam ** 2 + 0j)
    z_root = np.sqrt(omega_root * omega_root - 4.0 * p.lam_tilde ** 2 + 0j)
    return DecoherenceRates(delta, chi, complex(omega_root), complex(z_root))


def _check_times(t: TimeLike) -> np.ndarray:
    times = np.asarray(t, dtype=float)
    if np.any(times < 0) or not np.all(np.isfinite(times)):
        raise ValueError("Times must be finite and non-negative")
    return times


def _unwrap(values: np.ndarray, t: TimeLike):
    return complex(values) if np.ndim(t) == 0 else values


def damped_bracket(t: TimeLike, chi: complex, root: complex) -> np.ndarray:
    """
    e^{-chi t/4} (cosh(root t/2) + (chi/(2 root)) sinh(root t/2)).

    Written as two decaying exponentials away from root*t = 0 and as a
    Taylor series of sinh(x)/x close to it.
    """
    times = np.asarray(t, dtype=float)
    x = root * times / 2.0
    small = np.abs(x) < SERIES_THRESHOLD

    xs = np.where(small, x, 0.0)
    sinhc = 1.0 + xs ** 2 / 6.0 + xs ** 4 / 120.0
    series = np.exp(-chi * times / 4.0) * (np.cosh(xs) + (chi * times / 4.0) * sinhc)

    safe_root = root if root != 0 else 1.0
    ratio = chi / (2.0 * safe_root)
    s_plus = -chi / 4.0 + safe_root / 2.0
    s_minus = -chi / 4.0 - safe_root / 2.0
    exponential = 0.5 * ((1.0 + ratio) * np.exp(s_plus * times) + (1.0 - ratio) * np.exp(s_minus * times))

    return np.where(small, series, exponential)


def f_basic(t: TimeLike, p: SystemParams) -> Union[complex, np.ndarray]:
    """
    Decoherence function of a probe coupled to one damped mode.

    Args:
        t: Time(s) in seconds, non-negative
        p (SystemParams): Parameters; lam_tilde and omega_tilde are ignored

    Returns:
        complex or np.ndarray: f(t), rho_10(t) / rho_10(0)
    """
    times = _check_times(t)
    rates = decoherence_rates(p)
    values = np.exp(-1j * p.omega * times) * damped_bracket(times, rates.chi, rates.omega_root)
    return _unwrap(values, t)


def c_infinity(lam: float, lam_tilde: float) -> float:
    """Asymptotic trapped coherence lam_tilde^2 / (lam^2 + lam_tilde^2)."""
    total = lam ** 2 + lam_tilde ** 2
    if total == 0:
        raise ValueError("c_infinity is undefined when both couplings vanish")
    return lam_tilde ** 2 / total


def f_ct(t: TimeLike, p: SystemParams, atol: float = 1e-9) -> Union[complex, np.ndarray]:
    """
    Decoherence function with a resonant ancilla (omega_tilde = omega).

    The probe amplitude splits into a dark combination that never decays and
    a bright one that follows the single-mode law with rate Z.

    Args:
        t: Time(s) in seconds, non-negative
        p (SystemParams): Parameters with omega_tilde == omega and lam_tilde != 0
        atol (float): Tolerance of the resonance check (rad/s)

    Returns:
        complex or np.ndarray: f~(t)

    Raises:
        ValueError: If lam_tilde is zero or the ancilla is off resonance
    """
    if p.lam_tilde == 0:
        raise ValueError("f_ct requires a non-zero ancilla coupling; use amplitude_evolution")
    if abs(p.omega_tilde - p.omega) > atol * max(1.0, abs(p.omega)):
        raise ValueError(f"f_ct requires omega_tilde == omega, got {p.omega_tilde} vs {p.omega}")
    times = _check_times(t)
    rates = decoherence_rates(p)
    c_inf = c_infinity(p.lam, p.lam_tilde)
    bracket = damped_bracket(times, rates.chi, rates.z_root)
    values = np.exp(-1j * p.omega * times) * c_inf * (1.0 + (p.lam / p.lam_tilde) ** 2 * bracket)
    return _unwrap(values, t)


def amplitude_matrix(p: SystemParams) -> np.ndarray:
    """Generator M of i d/dt (kappa, a, kappa~) = M (kappa, a, kappa~)."""
    z_bar = complex(p.omega_m, -p.gamma / 2.0)
    return np.array([
        [p.omega, p.lam, 0.0],
        [p.lam, z_bar, p.lam_tilde],
        [0.0, p.lam_tilde, p.omega_tilde],
    ], dtype=np.complex128)


def _propagate(times: np.ndarray, p: SystemParams, kappa0: complex) -> np.ndarray:
    """Amplitude vectors, shape (len(times), 3)."""
    matrix = amplitude_matrix(p)
    x0 = np.array([kappa0, 0.0, 0.0], dtype=np.complex128)
    eigenvalues, vectors = linalg.eig(matrix)
    if np.linalg.cond(vectors) < CONDITION_LIMIT:
        coefficients = np.linalg.solve(vectors, x0)
        phases = np.exp(-1j * np.outer(times, eigenvalues))
        return (phases * coefficients) @ vectors.T
    logger.warning("⚠️ Amplitude generator is close to defective; using matrix exponentials")
    return np.array([linalg.expm(-1j * matrix * time) @ x0 for time in times])


def amplitude_evolution(t: float, p: SystemParams, kappa0: complex = 1.0) -> AmplitudeState:
    """
    Solve the single-excitation amplitude equations for any omega_tilde.

    Args:
        t (float): Time in seconds, non-negative
        p (SystemParams): Parameters
        kappa0 (complex): Initial probe amplitude

    Returns:
        AmplitudeState: (kappa, a, kappa~) at time t
    """
    times = _check_times(t)
    if times.ndim != 0:
        raise ValueError("amplitude_evolution takes a single time; use f_tilde for arrays")
    kappa, a_amp, kappa_tilde = _propagate(np.atleast_1d(times), p, kappa0)[0]
    return AmplitudeState(complex(kappa), complex(a_amp), complex(kappa_tilde))


def f_tilde(t: TimeLike, p: SystemParams) -> Union[complex, np.ndarray]:
    """kappa(t)/kappa(0) for arbitrary parameters, vectorized over t."""
    times = _check_times(t)
    values = _propagate(np.atleast_1d(times), p, 1.0)[:, 0]
    return _unwrap(values.reshape(times.shape), t)


def laplace_denominator(p: SystemParams) -> np.ndarray:
    """
    Coefficients (highest power first) of the cubic whose roots are the
    Laplace-domain poles s = -i mu of the amplitude solution.
    """
    z_bar = complex(p.omega_m, -p.gamma / 2.0)
    w, wt, lam, lamt = p.omega, p.omega_tilde, p.lam, p.lam_tilde
    return np.array([
        1.0,
        1j * (z_bar + w + wt),
        lamt ** 2 + lam ** 2 - z_bar * (w + wt) - w * wt,
        1j * (lamt ** 2 * w + lam ** 2 * wt - z_bar * w * wt),
    ], dtype=np.complex128)
