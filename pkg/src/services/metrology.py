#!/usr/bin/env python3
"""
Metrology Service
Precision functionals for frequency estimation: the entangled-probe bound and
its minimization, Ramsey signal and uncertainty, and the trapping gain.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Optional, Tuple, Union

import numpy as np
from scipy import optimize

from src.services.analytic_solutions import c_infinity, f_basic
from src.services.lindblad_engine import SystemParams

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 512
REPETITION_WARNING = 10.0
SLOPE_SENTINEL_FRACTION = 0.25

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class EstimationScenario:
    """N probes interrogated for t per run within a total time T."""

    n_probes: int
    total_time: float
    interrogation_time: float

    def __post_init__(self):
        if int(self.n_probes) != self.n_probes or self.n_probes < 1:
            raise ValueError(f"n_probes must be a positive integer, got {self.n_probes}")
        if not self.total_time >= self.interrogation_time > 0:
            raise ValueError(
                f"Need total_time >= interrogation_time > 0, got T={self.total_time}, t={self.interrogation_time}"
            )
        if self.repetitions < REPETITION_WARNING:
            logger.warning("⚠️ Only %.2f repetitions; the Cramer-Rao bound assumes T/t >> 1", self.repetitions)

    @property
    def repetitions(self) -> float:
        return self.total_time / self.interrogation_time


@dataclass(frozen=True)
class BoundCurve:
    """
    Minimized entangled-probe bound.

    ``values`` hold Delta^2 omega * T on ``times``; +inf where |f| = 0.
    """

    times: np.ndarray
    values: np.ndarray
    t_opt: float
    value_at_min: float
    n_probes: int
    total_time: float

    @property
    def minimizer(self) -> Tuple[float, float]:
        return self.t_opt, self.value_at_min

    @property
    def error_at_min(self) -> float:
        """Delta^2 omega at the optimum."""
        return self.value_at_min / self.total_time


class RamseyScan(NamedTuple):
    """Ramsey uncertainty over a detuning grid."""

    omegas: np.ndarray
    signal: np.ndarray
    slope: np.ndarray
    uncertainty: np.ndarray
    sentinel: np.ndarray


def crb_bound(t: ArrayLike, n_probes: float, total_time: float, f_mod: ArrayLike) -> ArrayLike:
    """
    Entangled-strategy lower bound on Delta^2 omega at interrogation time t.

    (1 + (N/4)(|f|^-2 - 1)) / (N^2 T t); +inf where |f| = 0.
    """
    t = np.asarray(t, dtype=float)
    f_mod = np.abs(np.asarray(f_mod))
    if np.any(t <= 0):
        raise ValueError("Interrogation time must be positive")
    if np.any(f_mod > 1.0 + 1e-12):
        raise ValueError("|f| must not exceed 1")
    with np.errstate(divide='ignore'):
        excess = np.where(f_mod > 0, 1.0 / np.square(np.where(f_mod > 0, f_mod, 1.0)) - 1.0, np.inf)
    values = (1.0 + 0.25 * n_probes * excess) / (n_probes ** 2 * total_time * t)
    return float(values) if values.ndim == 0 else values


def minimize_bound(p: SystemParams,
                   n_probes: int,
                   total_time: float,
                   t_window: Tuple[float, float],
                   grid_points: int = MIN_GRID_POINTS,
                   decoherence: Optional[Callable[[np.ndarray, SystemParams], np.ndarray]] = None) -> BoundCurve:
    """
    Minimize the entangled-probe bound over the interrogation time.

    A log-spaced grid locates the best point; golden-section search in log t
    refines it between the neighbouring grid points.

    Args:
        p (SystemParams): Decoherence parameters
        n_probes (int): Number of entangled probes N
        total_time (float): Total time T (s)
        t_window (Tuple[float, float]): Search window inside (0, T]
        grid_points (int): Coarse grid size, at least 512
        decoherence (Callable, optional): f(t, p); defaults to ``f_basic``

    Returns:
        BoundCurve: Curve in units of Delta^2 omega * T plus its minimizer

    Raises:
        ValueError: If the window is empty or outside (0, T]
    """
    t_lo, t_hi = float(t_window[0]), float(t_window[1])
    if not 0 < t_lo < t_hi:
        raise ValueError(f"Empty time window {t_window}")
    if t_hi > total_time * (1 + 1e-12):
        raise ValueError(f"Time window {t_window} exceeds total time {total_time}")
    decoherence = decoherence or f_basic
    grid_points = max(int(grid_points), MIN_GRID_POINTS)

    times = np.geomspace(t_lo, t_hi, grid_points)
    values = crb_bound(times, n_probes, total_time, np.abs(decoherence(times, p))) * total_time
    best = int(np.argmin(values))
    if not np.isfinite(values[best]):
        raise ValueError("Bound is infinite across the whole window")

    def objective(log_t: float) -> float:
        t = math.exp(log_t)
        return float(crb_bound(t, n_probes, total_time, abs(decoherence(t, p)))) * total_time

    logs = np.log(times)
    if 0 < best < grid_points - 1:
        try:
            result = optimize.minimize_scalar(objective, bracket=(logs[best - 1], logs[best], logs[best + 1]),
                                              method='golden', options={'xtol': 1e-10})
        except ValueError:
            result = optimize.minimize_scalar(objective, bounds=(logs[best - 1], logs[best + 1]), method='bounded',
                                              options={'xatol': 1e-12})
    else:
        lo, hi = logs[max(best - 1, 0)], logs[min(best + 1, grid_points - 1)]
        result = optimize.minimize_scalar(objective, bounds=(lo, hi), method='bounded', options={'xatol': 1e-12})

    t_opt, value_at_min = times[best], float(values[best])
    if result.fun < value_at_min and t_lo <= math.exp(result.x) <= t_hi:
        t_opt, value_at_min = math.exp(result.x), float(result.fun)

    logger.debug("✅ Bound minimum for N=%d: t_opt=%.6g s, value=%.6g", n_probes, t_opt, value_at_min)
    return BoundCurve(times, values, float(t_opt), value_at_min, int(n_probes), float(total_time))


def asymptotic_entangled_error(n_probes: float, total_time: float, lam: float) -> float:
    """Large-N limit lam / (T N^{3/2})."""
    if n_probes <= 0 or total_time <= 0 or lam <= 0:
        raise ValueError("asymptotic_entangled_error needs positive arguments")
    return lam / (total_time * n_probes ** 1.5)


def ramsey_signal(f_tilde: ArrayLike) -> ArrayLike:
    """Ramsey excitation probability (1 + Re f~)/2."""
    values = 0.5 * (1.0 + np.real(f_tilde))
    return float(values) if np.ndim(values) == 0 else values


def ramsey_uncertainty(signal: ArrayLike, slope: ArrayLike, t_bar: float, n_probes: float,
                       total_time: float) -> ArrayLike:
    """
    Ramsey frequency uncertainty P(1-P) t / (N T (dP/domega)^2).

    Args:
        signal: Probability P in [0, 1]
        slope: dP/domega (s/rad)
        t_bar (float): Interrogation time (s)
        n_probes (float): Number of probes
        total_time (float): Total time (s)

    Returns:
        Delta^2 omega, +inf where the slope vanishes
    """
    if t_bar <= 0:
        raise ValueError(f"t_bar must be positive, got {t_bar}")
    signal = np.asarray(signal, dtype=float)
    slope = np.asarray(slope, dtype=float)
    if np.any(signal < -1e-12) or np.any(signal > 1 + 1e-12):
        raise ValueError("Ramsey signal must lie in [0, 1]")
    variance = np.clip(signal * (1.0 - signal), 0.0, None)
    with np.errstate(divide='ignore', invalid='ignore'):
        values = np.where(slope != 0, variance * t_bar / (n_probes * total_time * np.square(slope)), np.inf)
    return float(values) if values.ndim == 0 else values


def ct_min_error(n_probes: float, total_time: float, t_bar: float, c_inf: float) -> float:
    """Best trapping-strategy error C_inf^-2 / (N T t)."""
    if not 0 < c_inf <= 1:
        raise ValueError(f"C_inf must be in (0, 1], got {c_inf}")
    if n_probes <= 0 or total_time <= 0 or t_bar <= 0:
        raise ValueError("ct_min_error needs positive N, T and t_bar")
    return 1.0 / (c_inf ** 2 * n_probes * total_time * t_bar)


def gain(n_probes: ArrayLike, t_bar: float, lam: float, lam_tilde: float) -> ArrayLike:
    """
    Ratio of the entangled bound for 2N qubits to the trapping error for N probes.

    lam * t_bar * C_inf^2 / sqrt(8N)
    """
    if lam_tilde == 0:
        raise ValueError("gain requires a non-zero ancilla coupling")
    n = np.asarray(n_probes, dtype=float)
    values = lam * t_bar * c_infinity(lam, lam_tilde) ** 2 / np.sqrt(8.0 * n)
    return float(values) if values.ndim == 0 else values


def signal_derivative(omegas: np.ndarray, signal: np.ndarray) -> np.ndarray:
    """
    dP/domega on a uniform grid.

    Central differences inside, second-order one-sided differences at the edges.

    Raises:
        ValueError: On fewer than 3 points or a non-uniform or non-increasing grid
    """
    omegas = np.asarray(omegas, dtype=float)
    signal = np.asarray(signal, dtype=float)
    if omegas.shape != signal.shape or omegas.ndim != 1:
        raise ValueError("Grid and signal must be 1-D arrays of equal length")
    if omegas.size < 3:
        raise ValueError(f"Need at least 3 grid points, got {omegas.size}")
    spacing = np.diff(omegas)
    if np.any(spacing <= 0):
        raise ValueError("Frequency grid must be strictly increasing")
    if not np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0):
        raise ValueError("Frequency grid must be uniform")
    return np.gradient(signal, omegas, edge_order=2)


def flag_vanishing_slope(slope: np.ndarray, fraction: float = SLOPE_SENTINEL_FRACTION) -> np.ndarray:
    """
    Mark grid points where the Ramsey slope passes through zero.

    A point is flagged when its |slope| is exactly zero, or when it is an
    interior local minimum of |slope| below ``fraction`` of the largest |slope|.
    """
    magnitude = np.abs(np.asarray(slope, dtype=float))
    flags = magnitude == 0
    if magnitude.size < 3:
        return flags
    threshold = fraction * magnitude.max()
    inner = magnitude[1:-1]
    local_min = (inner <= magnitude[:-2]) & (inner <= magnitude[2:]) & (inner < threshold)
    flags[1:-1] |= local_min
    return flags


def ramsey_uncertainty_scan(omegas: np.ndarray, signal: np.ndarray, t_bar: float, n_probes: float,
                            total_time: float) -> RamseyScan:
    """Uncertainty over a detuning scan; flagged points are reported as +inf."""
    omegas = np.asarray(omegas, dtype=float)
    signal = np.asarray(signal, dtype=float)
    slope = signal_derivative(omegas, signal)
    sentinel = flag_vanishing_slope(slope)
    uncertainty = ramsey_uncertainty(np.clip(signal, 0.0, 1.0), slope, t_bar, n_probes, total_time)
    uncertainty = np.where(sentinel, np.inf, uncertainty)
    if sentinel.any():
        logger.debug("Vanishing Ramsey slope at %d of %d grid points", int(sentinel.sum()), sentinel.size)
    return RamseyScan(omegas, signal, slope, uncertainty, sentinel)
