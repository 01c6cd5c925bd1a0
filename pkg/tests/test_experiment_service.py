"""
Tests for the scenario runner: Ramsey sequences, CSV artifacts and scenario outputs.
"""

import json
import logging
import math

import numpy as np
import pandas as pd
import pytest

from src import __version__
from src.core.errors import ConfigError, DimensionMismatchError
from src.core.quantum_core import ground_state, product_state, thermal_state
from src.services import analytic_solutions, metrology
from src.services.experiment_service import (ExperimentService, OmegaScan, RamseyRecord, ScenarioConfig,
                                             apply_pi_half_pulse, excited_probability, prepared_state,
                                             scan_records)
from src.services.plotting import plot_scenario, read_scenario_csv

TWO_PI = 2.0 * math.pi


@pytest.fixture
def service(loader):
    return ExperimentService(loader)


def read_lines(path):
    with open(path, encoding='utf-8') as f:
        return f.read().splitlines()


class TestPulses:
    """Test the pi/2 pulse and the excited-state readout."""

    def test_pulse_from_ground(self):
        """Test |0> goes to (|0> + i|1>)/sqrt(2)."""
        rho = apply_pi_half_pulse(product_state(ground_state(2), labels=("probe",)))
        assert rho.element(1, 0) == pytest.approx(0.5j)
        assert excited_probability(rho) == pytest.approx(0.5)

    def test_two_pulses_flip(self):
        """Test two pulses with no evolution in between give P = 1."""
        rho = product_state(ground_state(2), ground_state(2), thermal_state(0.0, 1),
                            labels=("probe", "ancilla", "mode"))
        flipped = apply_pi_half_pulse(apply_pi_half_pulse(rho, 0), 0)
        assert excited_probability(flipped, 0) == pytest.approx(1.0)
        assert excited_probability(flipped, 1) == pytest.approx(0.0)

    def test_pulse_on_mode_rejected(self):
        """Test that the pulse needs a qubit factor."""
        rho = product_state(ground_state(2), thermal_state(0.0, 2), labels=("probe", "mode"))
        with pytest.raises(DimensionMismatchError):
            apply_pi_half_pulse(rho, 1)
        with pytest.raises(DimensionMismatchError):
            apply_pi_half_pulse(rho, "ancilla")

    def test_prepared_state(self, ion_trap_params):
        """Test the post-pulse product state."""
        rho = prepared_state(ion_trap_params)
        assert rho.space.labels == ("probe", "ancilla", "mode")
        assert rho.purity == pytest.approx(1.0)
        assert excited_probability(rho, 0) == pytest.approx(0.5)
        assert excited_probability(rho, 1) == pytest.approx(0.0)


class TestScenarioConfig:
    """Test scenario resolution from the loader."""

    def test_omega_scan_parse(self):
        """Test 'min,max,n' parsing."""
        scan = OmegaScan.parse("-100, 100, 5")
        assert np.allclose(scan.hz, [-100, -50, 0, 50, 100])
        assert np.allclose(scan.omegas, TWO_PI * scan.hz)

    @pytest.mark.parametrize("text", ["-100,100", "a,b,c", "100,-100,5", "0,1,2"])
    def test_omega_scan_invalid(self, text):
        """Test malformed scans."""
        with pytest.raises(ConfigError):
            OmegaScan.parse(text)

    def test_ion_trap_config(self, service):
        """Test Hz inputs become angular rates."""
        cfg = service.scenario_config("fig2a")
        assert cfg.params.gamma == pytest.approx(TWO_PI * 1000.0)
        assert cfg.params.lam_tilde == pytest.approx(TWO_PI * -290.0)
        assert cfg.t_final == pytest.approx(60.0 / (TWO_PI * 1000.0))
        assert cfg.sample_count == 7
        assert cfg.n_bar_list == (0.0,)
        assert len(cfg.scan.omegas) == 21

    def test_invalid_value_is_config_error(self, loader):
        """Test a negative occupation surfaces as ConfigError."""
        loader.set('ion_trap.n_bar_list', [-0.1])
        with pytest.raises(ConfigError):
            ExperimentService(loader).scenario_config("fig2b")

    def test_missing_key_is_config_error(self, loader):
        """Test a missing key surfaces as ConfigError."""
        loader.set('ion_trap', {"gamma_hz": 1000.0})
        with pytest.raises(ConfigError):
            ExperimentService(loader).scenario_config("fig2a")

    def test_invalid_threads(self, loader):
        """Test threads >= 1."""
        loader.set('simulation.threads', 0)
        with pytest.raises(ConfigError):
            ExperimentService(loader).scenario_config("fig1")

    def test_total_time_must_cover_interrogation(self, loader):
        """Test T >= the longest interrogation time."""
        loader.set('ion_trap.total_time', 0.005)
        with pytest.raises(ConfigError):
            ExperimentService(loader).scenario_config("fig2a")

    def test_few_repetitions_warn(self, loader, caplog):
        """Test the repetition warning reaches scenario runs."""
        loader.set('ion_trap.total_time', 0.05)
        with caplog.at_level(logging.WARNING):
            ExperimentService(loader).scenario_config("fig2b")
        assert "repetitions" in caplog.text

    def test_unknown_scenario(self, service):
        """Test dispatch on an unknown name."""
        with pytest.raises(ConfigError):
            service.run("fig3")
        with pytest.raises(ConfigError):
            service.scenario_config("fig3")

    def test_sample_count_validation(self, fig1_params):
        """Test at least two samples."""
        with pytest.raises(ValueError):
            ScenarioConfig("evolve", fig1_params, 1.0, 1)


class TestRamseyPoint:
    """Test single Ramsey sequences against the closed form."""

    def test_signal_starts_at_one(self, service):
        """Test P(t = 0) = 1."""
        cfg = service.scenario_config("fig2a")
        records = service.run_ramsey_point(cfg, TWO_PI * 20.0, 0.0, [0.0, 1e-3])
        assert isinstance(records[0], RamseyRecord)
        assert records[0].signal == pytest.approx(1.0, abs=1e-12)
        assert records[0].uncertainty is None

    def test_matches_closed_form(self, service):
        """Test P = (1 + Re f~)/2 at zero temperature."""
        cfg = service.scenario_config("fig2a")
        omega = TWO_PI * 20.0
        times = np.array([0.0, 2e-3, 5e-3, 9e-3])
        records = service.run_ramsey_point(cfg, omega, 0.0, times)
        params = cfg.params.with_changes(omega=omega, omega_tilde=omega)
        expected = metrology.ramsey_signal(analytic_solutions.f_tilde(times, params))
        assert np.allclose([r.signal for r in records], expected, atol=1e-6)
        assert [r.time for r in records] == pytest.approx(times)

    def test_signal_out_of_range(self):
        """Test the [0, 1] check on the signal."""
        with pytest.raises(ValueError):
            RamseyRecord(0.0, 1.0, 1.1)

    def test_scan_records_carry_uncertainty(self):
        """Test Delta^2 omega * T on every record and None at vanishing slope."""
        t_bar, total_time = 30.0, 2.0
        omegas = np.linspace(-0.3, 0.3, 61)
        scan = metrology.ramsey_uncertainty_scan(omegas, 0.5 * (1 + 0.8 * np.cos(omegas * t_bar)), t_bar, 1,
                                                 total_time)
        records = scan_records(scan, t_bar, total_time)
        assert len(records) == 61
        assert all(r.time == t_bar for r in records)
        assert any(r.uncertainty is None for r in records)
        for record, flagged, value in zip(records, scan.sentinel, scan.uncertainty):
            if flagged:
                assert record.uncertainty is None
            else:
                assert record.uncertainty == pytest.approx(value * total_time)


class TestScenarios:
    """Test scenario outputs on the small configuration."""

    def test_csv_header(self, service, loader):
        """Test the version and hash comment line."""
        path = service.run("bound")
        header = read_lines(path)[0]
        assert header == f"# ct-sim {__version__} config_sha256={loader.config_hash()}"

    def test_metadata_sidecar(self, service, loader):
        """Test the metadata file next to the CSV."""
        path = service.run("bound")
        with open(path.with_suffix('.meta.json'), encoding='utf-8') as f:
            meta = json.load(f)
        assert meta["scenario"] == "bound"
        assert meta["config_sha256"] == loader.config_hash()
        assert "pulse" in meta["interpretations"]

    def test_bound(self, service):
        """Test t_opt and bound columns against the short-time law."""
        frame = read_scenario_csv(service.run("bound"))
        assert list(frame["N (1)"]) == [1, 4, 16]
        assert np.all(np.diff(frame["bound (Gamma)"]) < 0)
        assert np.all(frame["bound (Gamma)"] > 0)

    def test_fig1(self, service):
        """Test the gain column and its crossing between N = 4 and N = 5."""
        frame = read_scenario_csv(service.run("fig1"))
        assert list(frame.columns) == ["N (1)", "ent_bound_2N (Gamma)", "ct_error_N (Gamma)",
                                       "ent_asymptotic_2N (Gamma)", "gain (1)"]
        assert frame["gain (1)"][0] == pytest.approx(2.036, abs=1e-3)
        assert frame["gain (1)"][3] > 1 > frame["gain (1)"][4]
        assert frame["ct_error_N (Gamma)"][0] == pytest.approx(0.052083, rel=1e-4)
        # trapping beats the entangled bound for a single probe
        assert frame["ct_error_N (Gamma)"][0] < frame["ent_bound_2N (Gamma)"][0]

    def test_evolve_matches_analytic(self, service):
        """Test the numerical coherence against the analytic column."""
        frame = read_scenario_csv(service.run("evolve"))
        assert len(frame) == 11
        assert np.allclose(frame["coherence_re (1)"], frame["analytic_coherence_re (1)"], atol=1e-6)
        assert np.allclose(frame["coherence_im (1)"], frame["analytic_coherence_im (1)"], atol=1e-6)
        assert np.allclose(frame["trace (1)"], 1.0, atol=1e-10)

    def test_evolve_columns_are_real(self, service):
        """Test every evolve column reads back as floating point."""
        frame = read_scenario_csv(service.run("evolve"))
        for column in frame.columns:
            assert frame[column].dtype.kind == 'f', column

    def test_evolve_with_convergence_check(self, service):
        """Test the step-halving self-test passes at the default step."""
        service.loader.set('simulation.step_factor', 1e-3)
        assert service.run("evolve", convergence_check=True).exists()

    def test_evolve_thermal_has_no_analytic_column(self, loader):
        """Test the analytic columns are dropped at finite temperature."""
        loader.set('evolve.n_bar', 0.01)
        loader.set('evolve.n_max', 4)
        frame = read_scenario_csv(ExperimentService(loader).run("evolve"))
        assert "analytic_coherence_re (1)" not in frame.columns

    def test_modes(self, service):
        """Test the normal-mode report."""
        path, report = service.run_modes()
        frame = read_scenario_csv(path)
        assert np.allclose(frame["frequency (MHz)"], [1.06, 1.95, 2.59], atol=0.01)
        assert report["dissipative_amplitude_ratio"] == pytest.approx(-2.9, abs=0.05)
        assert report["effective_couplings_hz"] == pytest.approx([100.0, -290.0], rel=1e-10)

    def test_fig2b(self, service):
        """Test the numerical and closed-form columns agree at zero temperature."""
        path = service.run("fig2b")
        frame = read_scenario_csv(path)
        assert np.allclose(frame["P_nbar_0 (1)"], frame["P_zero_T (1)"], atol=1e-6)
        assert np.allclose(frame["omega (Hz)"], np.linspace(-100, 100, 21))
        zero_t = frame["P_zero_T (1)"].to_numpy()
        assert np.allclose(zero_t, zero_t[::-1], atol=1e-10)
        with open(path.with_suffix('.meta.json'), encoding='utf-8') as f:
            meta = json.load(f)
        assert set(meta["extra"]["sentinel_counts"]) == {"nbar_0", "zero_T"}
        assert frame["ct_zero_T (Gamma)"].isna().sum() == meta["extra"]["sentinel_counts"]["zero_T"]

    def test_fig2a(self, service):
        """Test the minimal uncertainty curves and the empty cells at t = 0."""
        path = service.run("fig2a")
        lines = read_lines(path)
        assert ",,," in lines[2]
        frame = read_scenario_csv(path)
        assert frame["ct_nbar_0 (Gamma)"].isna()[0]
        numeric = frame["ct_nbar_0 (Gamma)"][1:].to_numpy()
        closed_form = frame["ct_zero_T_scan (Gamma)"][1:].to_numpy()
        assert np.allclose(numeric, closed_form, rtol=1e-4)
        assert np.all(frame["ent_bound (Gamma)"] > 0)

    @pytest.mark.slow
    def test_fig2a_temperature_ordering(self, loader):
        """Test finite-temperature curves lie strictly above the zero-temperature one."""
        loader.set('ion_trap.n_bar_list', [0.02, 0.05])
        loader.set('ion_trap.n_max', 6)
        loader.set('ion_trap.omega_scan_hz', [-100.0, 100.0, 9])
        loader.set('ion_trap.sample_count', 3)
        frame = read_scenario_csv(ExperimentService(loader).run("fig2a"))
        zero_t = frame["ct_zero_T_scan (Gamma)"][1:].to_numpy()
        warm = frame["ct_nbar_0.02 (Gamma)"][1:].to_numpy()
        hot = frame["ct_nbar_0.05 (Gamma)"][1:].to_numpy()
        assert np.all(warm > zero_t)
        assert np.all(hot > warm)

    def test_parallel_backend_is_deterministic(self, loader, tmp_path):
        """Test serial and threaded sweeps write the same rows."""
        loader.set('output.directory', str(tmp_path / "serial"))
        serial = read_lines(ExperimentService(loader).run("fig2b"))
        loader.set('output.directory', str(tmp_path / "threaded"))
        loader.set('simulation.threads', 2)
        loader.set('simulation.parallel_backend', 'threading')
        threaded = read_lines(ExperimentService(loader).run("fig2b"))
        assert serial[1:] == threaded[1:]

    def test_plots_written(self, loader):
        """Test the SVG next to the CSV when plots are enabled."""
        loader.set('output.plots', True)
        path = ExperimentService(loader).run("bound")
        assert path.with_suffix('.svg').exists()


class TestPlotting:
    """Test the SVG renderer on hand-written CSV files."""

    def test_plot_with_gaps(self, tmp_path):
        """Test empty cells are drawn as gaps."""
        csv_path = tmp_path / "fig2a.csv"
        frame = pd.DataFrame({"gamma_t (1)": [0.0, 1.0, 2.0], "ct_nbar_0 (Gamma)": [np.nan, 0.2, 0.1]})
        with open(csv_path, 'w', encoding='utf-8') as f:
            f.write("# ct-sim test\n")
            frame.to_csv(f, index=False)
        svg = plot_scenario(csv_path, "fig2a")
        assert svg.suffix == ".svg"
        assert svg.exists()

    def test_unknown_layout(self, tmp_path):
        """Test scenarios without a layout."""
        with pytest.raises(ValueError):
            plot_scenario(tmp_path / "x.csv", "fig3")
