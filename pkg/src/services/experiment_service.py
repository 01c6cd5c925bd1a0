#!/usr/bin/env python3
"""
Experiment Service
Configuration-driven scenario runner: Ramsey sequences on the ancilla model,
parameter sweeps and the CSV/metadata artifacts behind every figure.
"""

import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from src import __version__
from src.config.config_loader import ConfigLoader, default_loader
from src.core.errors import ConfigError, DimensionMismatchError
from src.core.quantum_core import (DensityMatrix, embed, ground_state, partial_trace, product_state,
                                   thermal_state)
from src.services import analytic_solutions, ion_crystal, metrology
from src.services.lindblad_engine import (SystemParams, build_ancilla_model, build_probe_mode_model,
                                          check_convergence, default_time_step, evolve)

logger = logging.getLogger(__name__)

SCENARIOS = ("fig1", "fig2a", "fig2b", "evolve", "bound", "modes")
TWO_PI = 2.0 * math.pi
SIGNAL_TOL = 1e-8

INTERPRETATIONS = {
    "frequency_units": "config frequencies are nu = omega/2pi in Hz; the omega scan is nu in [-100, 100] Hz",
    "kappa": "kappa in t > 100/kappa is identified with Gamma = 2pi x 1 kHz",
    "probe_count": "trapping curves use N probes, the entangled reference uses 2N qubits",
    "fig1_couplings": "lambda = lambda_tilde/2 = 0.3 Gamma read as lambda = 0.3, lambda_tilde = 0.6",
    "pulse": "pi/2 pulse exp(+i pi/4 sigma_x) on the probe, signal is the |1> population",
    "ent_reference": "entangled reference is the minimum of the bound for 2N qubits over t and the omega scan",
    "cooling_dissipator": "jumps (Gamma(n_bar+1), a) and (Gamma n_bar, a_dag) in both models",
    "crossover": "the zero-temperature curve crosses the entangled reference near gamma t = 72, not 100",
    "zero_T_grid_match": ("grid-limited zero-T minimum is within 1% of 1/(C_inf^2 N t) near gamma t = 60, "
                          "about 3% at gamma t = 120"),
}

PI_HALF = np.array([[1.0, 1.0j], [1.0j, 1.0]], dtype=np.complex128) / math.sqrt(2.0)


@dataclass(frozen=True)
class OmegaScan:
    """Uniform detuning grid given in Hz."""

    start_hz: float
    stop_hz: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 3:
            raise ValueError(f"An omega scan needs at least 3 points, got {self.n_points}")
        if not self.stop_hz > self.start_hz:
            raise ValueError(f"Omega scan must be increasing, got [{self.start_hz}, {self.stop_hz}]")
        object.__setattr__(self, 'n_points', int(self.n_points))

    @classmethod
    def parse(cls, text: str) -> "OmegaScan":
        """'min,max,n' in Hz."""
        try:
            start, stop, count = (part.strip() for part in text.split(','))
            return cls(float(start), float(stop), int(count))
        except ValueError as e:
            raise ConfigError(f"Invalid omega scan '{text}', expected 'min,max,n': {e}")

    @property
    def hz(self) -> np.ndarray:
        return np.linspace(self.start_hz, self.stop_hz, self.n_points)

    @property
    def omegas(self) -> np.ndarray:
        return TWO_PI * self.hz


@dataclass(frozen=True)
class ScenarioConfig:
    """Resolved inputs of one scenario run."""

    scenario: str
    params: SystemParams
    t_final: float
    sample_count: int
    scan: Optional[OmegaScan] = None
    n_bar_list: Tuple[float, ...] = ()
    n_probes: int = 1
    total_time: float = 1.0
    t_bar: Optional[float] = None
    output_dir: str = "results"
    dt: Optional[float] = None
    step_factor: float = 1e-3
    threads: int = 1
    backend: str = "loky"
    tolerances: Tuple[Tuple[str, float], ...] = ()

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ValueError(f"Unknown scenario '{self.scenario}'")
        if self.sample_count < 2:
            raise ValueError(f"sample_count must be at least 2, got {self.sample_count}")
        if self.t_final <= 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.dt is not None and self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if any(n < 0 for n in self.n_bar_list):
            raise ValueError(f"n_bar values must be non-negative, got {self.n_bar_list}")

    @property
    def sample_times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_final, self.sample_count)

    @property
    def estimation(self) -> metrology.EstimationScenario:
        """Estimation budget at the longest interrogation time of the run."""
        return metrology.EstimationScenario(self.n_probes, self.total_time, max(self.t_final, self.t_bar or 0.0))

    def evolve_options(self) -> Dict[str, float]:
        return dict(self.tolerances)


@dataclass(frozen=True)
class RamseyRecord:
    """One Ramsey sample; uncertainty is Delta^2 omega * T or None when undefined."""

    omega: float
    time: float
    signal: float
    uncertainty: Optional[float] = None

    def __post_init__(self):
        if not -SIGNAL_TOL <= self.signal <= 1.0 + SIGNAL_TOL:
            raise ValueError(f"Ramsey signal {self.signal} outside [0, 1]")


def scan_records(scan: metrology.RamseyScan, t_bar: float, total_time: float) -> List[RamseyRecord]:
    """RamseyRecords of one detuning scan; infinite uncertainties become None."""
    return [RamseyRecord(float(w), float(t_bar), float(p), float(u) * total_time if np.isfinite(u) else None)
            for w, p, u in zip(scan.omegas, scan.signal, scan.uncertainty)]


def apply_pi_half_pulse(rho: DensityMatrix, target: Union[int, str] = "probe") -> DensityMatrix:
    """
    Instantaneous pi/2 rotation exp(+i pi/4 sigma_x) on one qubit factor.

    Raises:
        DimensionMismatchError: If the target factor is missing or not a qubit
    """
    space = rho.space
    try:
        index = space.index_of(target) if isinstance(target, str) else int(target)
    except (KeyError, ValueError):
        raise DimensionMismatchError(f"State has no '{target}' factor")
    if not 0 <= index < space.n_factors or space.factor_dims[index] != 2:
        raise DimensionMismatchError(f"Pulse target {target} is not a qubit factor of {space.factor_dims}")
    pulse = embed(PI_HALF, index, space)
    return DensityMatrix(space, pulse @ rho.matrix @ pulse.conj().T)


def excited_probability(rho: DensityMatrix, target: int = 0) -> float:
    """Population of |1> on one qubit factor."""
    return float(partial_trace(rho, target).matrix[1, 1].real)


def prepared_state(params: SystemParams, with_ancilla: bool = True) -> DensityMatrix:
    """|0><0| probe (x) |0><0| ancilla (x) thermal mode, after the first pulse."""
    qubit = ground_state(2)
    mode = thermal_state(params.n_bar, params.n_max)
    if with_ancilla:
        rho = product_state(qubit, qubit, mode, labels=("probe", "ancilla", "mode"))
    else:
        rho = product_state(qubit, mode, labels=("probe", "mode"))
    return apply_pi_half_pulse(rho, 0)


def _ramsey_signals(params: SystemParams, sample_times: np.ndarray, dt: Optional[float],
                    step_factor: float, options: Dict[str, float]) -> np.ndarray:
    """Ramsey signal at every sample time for one parameter point."""
    model = build_ancilla_model(params)
    step = dt if dt is not None else default_time_step(model, step_factor)
    trajectory = evolve(model, prepared_state(params), sample_times[-1], dt=step,
                        sample_times=sample_times, **options)
    return np.array([excited_probability(apply_pi_half_pulse(state, 0)) for state in trajectory.states])


def _frame_to_csv(frame: pd.DataFrame, path: Path, header: str) -> None:
    clean = frame.replace([np.inf, -np.inf], np.nan)
    with open(path, 'w', encoding='utf-8', newline='') as f:
        f.write(header + "\n")
        clean.to_csv(f, index=False, float_format='%.12e', na_rep='', lineterminator='\n')


class ExperimentService:
    """
    Runs the figure and utility scenarios from a ConfigLoader and writes
    one CSV (plus a metadata sidecar and an optional SVG plot) per run.
    """

    def __init__(self, loader: Optional[ConfigLoader] = None):
        """
        Initialize the experiment service.

        Args:
            loader (ConfigLoader, optional): Resolved configuration; the bundled defaults otherwise
        """
        self.loader = loader or default_loader()
        self.output_dir = Path(self.loader.get('output.directory', 'results'))
        self.make_plots = bool(self.loader.get('output.plots', True))
        logger.debug("✅ ExperimentService initialized (output: %s)", self.output_dir)

    # ------------------------------------------------------------------ config

    def _simulation_options(self) -> Dict[str, Any]:
        sim = self.loader.get_section('simulation')
        threads = 1 if sim.get('threads') is None else int(sim['threads'])
        if threads < 1:
            raise ConfigError(f"threads must be at least 1, got {threads}")
        return {
            "dt": None if sim.get('dt') is None else float(sim['dt']),
            "step_factor": float(sim.get('step_factor', 1e-3)),
            "threads": threads,
            "backend": str(sim.get('parallel_backend', 'loky')),
            "tolerances": (("trace_tol", float(sim['trace_tolerance'])),
                           ("positivity_tol", float(sim['positivity_tolerance'])),
                           ("truncation_tol", float(sim['truncation_tolerance']))),
        }

    def scenario_config(self, scenario: str) -> ScenarioConfig:
        """
        Build the ScenarioConfig of a scenario from the loaded configuration.

        Raises:
            ConfigError: If a value is missing or invalid
        """
        try:
            common = dict(self._simulation_options(), output_dir=str(self.output_dir))
            if scenario in ("fig1", "bound"):
                return self._gamma_units_config(scenario, common)
            if scenario in ("fig2a", "fig2b"):
                return self._ion_trap_config(scenario, common)
            if scenario == "evolve":
                return self._evolve_config(common)
            if scenario == "modes":
                return ScenarioConfig("modes", SystemParams(0, 0, 0, 0, 0, 0), 1.0, 2, **common)
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid '{scenario}' configuration: {e}")
        raise ConfigError(f"Unknown scenario '{scenario}'")

    def _gamma_units_config(self, scenario: str, common: Dict[str, Any]) -> ScenarioConfig:
        section = self.loader.get_section(scenario)
        gamma = float(section['gamma'])
        delta = float(section['delta'])
        lam = float(section['lambda'])
        lam_tilde = float(section.get('lambda_tilde', 0.0) or 0.0)
        params = SystemParams(omega=delta, omega_tilde=delta, omega_m=0.0, lam=lam, lam_tilde=lam_tilde,
                              gamma=gamma, n_max=1)
        window = section['bound_window']
        t_bar = float(section['gamma_t_bar']) / gamma if 'gamma_t_bar' in section else None
        return ScenarioConfig(scenario, params, t_final=float(window[1]) / gamma, sample_count=2,
                              total_time=float(section['total_time']) / gamma, t_bar=t_bar, **common)

    def _ion_trap_config(self, scenario: str, common: Dict[str, Any]) -> ScenarioConfig:
        section = self.loader.get_section('ion_trap')
        params = SystemParams.from_hz(0.0, 0.0, float(section['omega_m_hz']), float(section['lambda_hz']),
                                      float(section['lambda_tilde_hz']), float(section['gamma_hz']),
                                      float(section['gamma_se_hz']), 0.0, int(section['n_max']))
        scan = section['omega_scan_hz']
        scan = OmegaScan.parse(scan) if isinstance(scan, str) else OmegaScan(*scan)
        n_bars = section['n_bar_list']
        n_bars = [n_bars] if isinstance(n_bars, (int, float)) else n_bars
        if scenario == "fig2a":
            t_final, count = float(section['gamma_t_final']) / params.gamma, int(section['sample_count'])
        else:
            t_final, count = float(section['gamma_t_bar']) / params.gamma, 2
        cfg = ScenarioConfig(scenario, params, t_final=t_final, sample_count=count, scan=scan,
                             n_bar_list=tuple(float(n) for n in n_bars),
                             n_probes=int(section['n_probes']), total_time=float(section['total_time']),
                             t_bar=float(section['gamma_t_bar']) / params.gamma, **common)
        logger.debug("✅ %s budget: %.1f repetitions", scenario, cfg.estimation.repetitions)
        return cfg

    def _evolve_config(self, common: Dict[str, Any]) -> ScenarioConfig:
        section = self.loader.get_section('evolve')
        if section['model'] not in ("ancilla", "probe_mode"):
            raise ConfigError(f"evolve.model must be 'ancilla' or 'probe_mode', got {section['model']}")
        omega_tilde = section['omega_tilde_hz']
        omega_tilde = section['omega_hz'] if omega_tilde is None else omega_tilde
        params = SystemParams.from_hz(float(section['omega_hz']), float(omega_tilde),
                                      float(section['omega_m_hz']), float(section['lambda_hz']),
                                      float(section['lambda_tilde_hz']), float(section['gamma_hz']),
                                      float(section['gamma_se_hz']), float(section['n_bar']),
                                      int(section['n_max']))
        return ScenarioConfig("evolve", params, t_final=float(section['gamma_t_final']) / params.gamma,
                              sample_count=int(section['sample_count']), n_bar_list=(params.n_bar,), **common)

    # ---------------------------------------------------------------- ramsey

    def run_ramsey_point(self, cfg: ScenarioConfig, omega: float, n_bar: float,
                         sample_times: Optional[Sequence[float]] = None) -> List[RamseyRecord]:
        """
        Ramsey sequence at one detuning and reservoir occupation.

        The ancilla is kept resonant with the probe (omega_tilde = omega).

        Args:
            cfg (ScenarioConfig): Scenario inputs
            omega (float): Probe detuning (rad/s)
            n_bar (float): Reservoir occupation
            sample_times (Sequence[float], optional): Defaults to ``cfg.sample_times``

        Returns:
            List[RamseyRecord]: Signal at every sample time
        """
        times = np.asarray(cfg.sample_times if sample_times is None else sample_times, dtype=float)
        params = cfg.params.with_changes(omega=omega, omega_tilde=omega, n_bar=n_bar)
        signals = _ramsey_signals(params, times, cfg.dt, cfg.step_factor, cfg.evolve_options())
        return [RamseyRecord(omega, float(t), float(p)) for t, p in zip(times, signals)]

    def signal_grid(self, cfg: ScenarioConfig, n_bar: float) -> np.ndarray:
        """Ramsey signal, shape (omega points, sample times), in scan order."""
        times = cfg.sample_times
        points = [cfg.params.with_changes(omega=w, omega_tilde=w, n_bar=n_bar) for w in cfg.scan.omegas]
        logger.info("🚀 Simulating %d detunings at n_bar=%g on %d thread(s)", len(points), n_bar, cfg.threads)
        rows = Parallel(n_jobs=cfg.threads, backend=cfg.backend)(
            delayed(_ramsey_signals)(p, times, cfg.dt, cfg.step_factor, cfg.evolve_options()) for p in points
        )
        return np.vstack(rows)

    @staticmethod
    def analytic_signal_grid(cfg: ScenarioConfig) -> np.ndarray:
        """Zero-temperature single-excitation signal on the same grid."""
        times = cfg.sample_times
        rows = [metrology.ramsey_signal(analytic_solutions.f_tilde(times, cfg.params.with_changes(
            omega=w, omega_tilde=w))) for w in cfg.scan.omegas]
        return np.vstack(rows)

    @staticmethod
    def _scan_uncertainty(cfg: ScenarioConfig, signal: np.ndarray, t_bar: float) -> metrology.RamseyScan:
        return metrology.ramsey_uncertainty_scan(cfg.scan.omegas, signal, t_bar, cfg.n_probes, cfg.total_time)

    def _min_uncertainty_curve(self, cfg: ScenarioConfig, grid: np.ndarray) -> np.ndarray:
        """min over omega of Delta^2 omega * T at each sample time."""
        values = np.full(len(cfg.sample_times), np.inf)
        for k, t in enumerate(cfg.sample_times):
            if t <= 0:
                continue
            records = scan_records(self._scan_uncertainty(cfg, grid[:, k], t), t, cfg.total_time)
            values[k] = min((r.uncertainty for r in records if r.uncertainty is not None), default=np.inf)
        return values

    # ------------------------------------------------------------- scenarios

    def run_fig1(self) -> Path:
        """Entangled bound for 2N qubits against the trapping error for N probes."""
        cfg = self.scenario_config("fig1")
        section = self.loader.get_section('fig1')
        p, T = cfg.params, cfg.total_time
        window = (float(section['bound_window'][0]) / p.gamma, cfg.t_final)
        c_inf = analytic_solutions.c_infinity(p.lam, p.lam_tilde)
        probes = np.arange(1, int(section['n_max_probes']) + 1)

        ent = [metrology.minimize_bound(p, 2 * int(n), T, window, int(section['grid_points'])).value_at_min
               for n in probes]
        ct = [metrology.ct_min_error(int(n), T, cfg.t_bar, c_inf) * T for n in probes]
        frame = pd.DataFrame({
            "N (1)": probes,
            "ent_bound_2N (Gamma)": np.array(ent) / p.gamma,
            "ct_error_N (Gamma)": np.array(ct) / p.gamma,
            "ent_asymptotic_2N (Gamma)": [metrology.asymptotic_entangled_error(2 * n, T, p.lam) * T / p.gamma
                                          for n in probes],
            "gain (1)": metrology.gain(probes, cfg.t_bar, p.lam, p.lam_tilde),
        })
        return self._emit(frame, cfg, extra={"c_infinity": c_inf})

    def run_fig2a(self) -> Path:
        """Minimal Ramsey uncertainty against interrogation time per reservoir occupation."""
        cfg = self.scenario_config("fig2a")
        p, times = cfg.params, cfg.sample_times
        columns: Dict[str, Any] = {"t (s)": times, "gamma_t (1)": times * p.gamma}

        for n_bar in cfg.n_bar_list:
            grid = self.signal_grid(cfg, n_bar)
            columns[f"ct_nbar_{n_bar:g} (Gamma)"] = self._min_uncertainty_curve(cfg, grid) / p.gamma

        c_inf = analytic_solutions.c_infinity(p.lam, p.lam_tilde)
        with np.errstate(divide='ignore'):
            zero_t = np.where(times > 0, 1.0 / (c_inf ** 2 * cfg.n_probes * np.where(times > 0, times, 1.0)),
                              np.inf)
        columns["ct_zero_T (Gamma)"] = zero_t / p.gamma
        columns["ct_zero_T_scan (Gamma)"] = self._min_uncertainty_curve(cfg, self.analytic_signal_grid(cfg)) / p.gamma

        ent = self.entangled_reference(cfg)
        columns["ent_bound (Gamma)"] = np.full(len(times), ent / p.gamma)
        return self._emit(pd.DataFrame(columns), cfg, extra={"c_infinity": c_inf, "ent_bound": ent})

    def entangled_reference(self, cfg: ScenarioConfig) -> float:
        """Minimum of the 2N-qubit bound over t in (0, t_final] and over the omega scan, as Delta^2 omega * T."""
        window = (1e-3 / cfg.params.gamma, cfg.t_final)
        total = max(cfg.total_time, cfg.t_final)
        best = math.inf
        for omega in cfg.scan.omegas:
            curve = metrology.minimize_bound(cfg.params.with_changes(omega=omega), 2 * cfg.n_probes, total, window)
            best = min(best, curve.value_at_min)
        return best

    def run_fig2b(self) -> Path:
        """Ramsey uncertainty against detuning at the fixed interrogation time."""
        cfg = self.scenario_config("fig2b")
        p, t_bar = cfg.params, cfg.t_final
        omegas = cfg.scan.omegas
        columns: Dict[str, Any] = {"omega (Hz)": cfg.scan.hz, "omega_t_bar (rad)": omegas * t_bar}
        sentinels: Dict[str, int] = {}

        grids = [(f"nbar_{n_bar:g}", self.signal_grid(cfg, n_bar)) for n_bar in cfg.n_bar_list]
        grids.append(("zero_T", self.analytic_signal_grid(cfg)))
        for label, grid in grids:
            scan = self._scan_uncertainty(cfg, grid[:, -1], t_bar)
            records = scan_records(scan, t_bar, cfg.total_time)
            columns[f"P_{label} (1)"] = [r.signal for r in records]
            columns[f"dPdw_{label} (s/rad)"] = scan.slope
            columns[f"ct_{label} (Gamma)"] = [np.nan if r.uncertainty is None else r.uncertainty / p.gamma
                                              for r in records]
            sentinels[label] = int(scan.sentinel.sum())
        return self._emit(pd.DataFrame(columns), cfg, extra={"sentinel_counts": sentinels})

    def run_evolve(self, convergence_check: bool = False) -> Path:
        """Single trajectory with an analytic cross-check column where one applies."""
        cfg = self.scenario_config("evolve")
        p = cfg.params
        with_ancilla = self.loader.get('evolve.model') == "ancilla"
        model = build_ancilla_model(p) if with_ancilla else build_probe_mode_model(p)
        rho0 = prepared_state(p, with_ancilla)
        dt = cfg.dt if cfg.dt is not None else default_time_step(model, cfg.step_factor)
        if convergence_check:
            check_convergence(model, rho0, cfg.t_final, dt, cfg.sample_count)
        trajectory = evolve(model, rho0, cfg.t_final, dt, cfg.sample_count, **cfg.evolve_options())

        coherence = trajectory.probe_coherence()
        frame = pd.DataFrame({
            "t (s)": trajectory.times,
            "gamma_t (1)": trajectory.times * p.gamma,
            "coherence_re (1)": coherence.real,
            "coherence_im (1)": coherence.imag,
            "excited_population (1)": trajectory.probe_excited_population(),
            "signal (1)": [excited_probability(apply_pi_half_pulse(s, 0)) for s in trajectory.states],
            "trace (1)": [s.trace.real for s in trajectory.states],
            "min_eigenvalue (1)": [s.min_eigenvalue for s in trajectory.states],
        })
        if p.n_bar == 0 and p.gamma_se == 0:
            f = analytic_solutions.f_tilde(trajectory.times, p) if with_ancilla \
                else analytic_solutions.f_basic(trajectory.times, p)
            analytic = f * coherence[0]
            frame["analytic_coherence_re (1)"] = analytic.real
            frame["analytic_coherence_im (1)"] = analytic.imag
        return self._emit(frame, cfg, extra={"model": "ancilla" if with_ancilla else "probe_mode",
                                             "dt": trajectory.dt})

    def run_bound(self) -> Path:
        """Minimized entangled bound for a list of probe numbers."""
        cfg = self.scenario_config("bound")
        section = self.loader.get_section('bound')
        p, T = cfg.params, cfg.total_time
        window = (float(section['bound_window'][0]) / p.gamma, cfg.t_final)
        probes = [int(n) for n in section['n_probes']]
        curves = [metrology.minimize_bound(p, n, T, window, int(section['grid_points'])) for n in probes]
        frame = pd.DataFrame({
            "N (1)": probes,
            "t_opt (1/Gamma)": [c.t_opt * p.gamma for c in curves],
            "bound (Gamma)": [c.value_at_min / p.gamma for c in curves],
            "asymptotic (Gamma)": [metrology.asymptotic_entangled_error(n, T, p.lam) * T / p.gamma for n in probes],
            "t_opt_asymptotic (1/Gamma)": [2.0 / (p.lam * math.sqrt(n)) * p.gamma for n in probes],
        })
        return self._emit(frame, cfg)

    def crystal_config(self) -> ion_crystal.CrystalConfig:
        section = self.loader.get_section('crystal')
        try:
            return ion_crystal.CrystalConfig(
                masses=tuple(section['masses']), reference_mass=float(section['reference_mass']),
                omega_z=TWO_PI * float(section['omega_z_hz']),
                laser_wavelength=float(section['laser_wavelength']),
                laser_axis_projection=float(section['laser_axis_projection']),
                qubit_ions=tuple(section['qubit_ions']))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid 'crystal' configuration: {e}")

    def run_modes(self) -> Tuple[Path, Dict[str, Any]]:
        """
        Normal-mode report of the configured crystal.

        Returns:
            Tuple[Path, Dict[str, Any]]: CSV path and the report dictionary
        """
        crystal = self.crystal_config()
        section = self.loader.get_section('crystal')
        modes = ion_crystal.normal_modes(crystal)
        eta = ion_crystal.lamb_dicke_matrix(crystal, modes)
        targets = TWO_PI * np.asarray(section['target_couplings_hz'], dtype=float)
        rabi = ion_crystal.rabi_for_couplings(crystal, modes, targets)
        couplings = ion_crystal.spin_mode_coupling(crystal, modes, rabi, section['phases'])

        columns: Dict[str, Any] = {"mode (1)": np.arange(1, crystal.n_ions + 1),
                                   "frequency (MHz)": modes.mode_frequencies_hz / 1e6}
        for j in range(crystal.n_ions):
            columns[f"B_ion{j} (1)"] = modes.mode_matrix[j]
        for j in range(crystal.n_ions):
            columns[f"eta_ion{j} (1)"] = eta[j]
        report = {
            "equilibrium_positions_um": (modes.equilibrium_positions * 1e6).tolist(),
            "length_scale_um": modes.length_scale * 1e6,
            "mode_frequencies_mhz": (modes.mode_frequencies_hz / 1e6).tolist(),
            "dissipative_amplitude_ratio": ion_crystal.dissipative_amplitude_ratio(modes, crystal.qubit_ions),
            "rabi_hz": (rabi / TWO_PI).tolist(),
            "couplings_hz": [[c.real / TWO_PI, c.imag / TWO_PI] for c in couplings],
            "effective_couplings_hz": (ion_crystal.effective_couplings(crystal, modes, couplings) / TWO_PI).tolist(),
        }
        cfg = self.scenario_config("modes")
        return self._emit(pd.DataFrame(columns), cfg, extra=report), report

    def run(self, scenario: str, **kwargs) -> Path:
        """Dispatch by scenario name."""
        if scenario not in SCENARIOS:
            raise ConfigError(f"Unknown scenario '{scenario}'")
        result = getattr(self, f"run_{scenario}")(**kwargs)
        return result[0] if isinstance(result, tuple) else result

    # ---------------------------------------------------------------- output

    def csv_header(self) -> str:
        return f"# ct-sim {__version__} config_sha256={self.loader.config_hash()}"

    def _emit(self, frame: pd.DataFrame, cfg: ScenarioConfig, extra: Optional[Dict[str, Any]] = None) -> Path:
        self.output_dir.mkdir(parents=True, exist_ok=True)
        csv_path = self.output_dir / f"{cfg.scenario}.csv"
        _frame_to_csv(frame, csv_path, self.csv_header())

        metadata = {
            "scenario": cfg.scenario,
            "version": __version__,
            "config_sha256": self.loader.config_hash(),
            "config": self.loader.resolved(),
            "params": asdict(cfg.params),
            "interpretations": INTERPRETATIONS,
            "extra": extra or {},
        }
        meta_path = self.output_dir / f"{cfg.scenario}.meta.json"
        with open(meta_path, 'w', encoding='utf-8') as f:
            json.dump(metadata, f, indent=2, sort_keys=True, default=float)
        logger.info("💾 Wrote %s", csv_path)

        if self.make_plots:
            from src.services.plotting import plot_scenario
            plot_scenario(csv_path, cfg.scenario)
        return csv_path
