"""
Pytest configuration and shared fixtures for the coherence-trapping toolkit tests.
"""

import json
import os
import sys
import tempfile

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

from src.config.config_loader import ConfigLoader
from src.services.lindblad_engine import SystemParams


@pytest.fixture
def test_config(tmp_path):
    """Small scenario configuration that runs in seconds."""
    return {
        "simulation": {
            "step_factor": 1e-2,
            "dt": None,
            "threads": 1,
            "parallel_backend": "loky",
            "trace_tolerance": 1e-6,
            "positivity_tolerance": 1e-6,
            "truncation_tolerance": 1e-6
        },
        "output": {
            "directory": str(tmp_path / "results"),
            "plots": False
        },
        "fig1": {
            "gamma": 1.0,
            "delta": 0.05,
            "lambda": 0.3,
            "lambda_tilde": 0.6,
            "gamma_t_bar": 30.0,
            "n_max_probes": 6,
            "total_time": 1000.0,
            "bound_window": [1e-3, 200.0],
            "grid_points": 512
        },
        "ion_trap": {
            "gamma_hz": 1000.0,
            "lambda_hz": 100.0,
            "lambda_tilde_hz": -290.0,
            "omega_m_hz": 0.0,
            "gamma_se_hz": 0.0,
            "n_max": 1,
            "n_bar_list": [0.0],
            "omega_scan_hz": [-100.0, 100.0, 21],
            "gamma_t_final": 60.0,
            "sample_count": 7,
            "gamma_t_bar": 60.0,
            "n_probes": 1,
            "total_time": 1.0
        },
        "evolve": {
            "model": "ancilla",
            "omega_hz": 10.0,
            "omega_tilde_hz": None,
            "omega_m_hz": 0.0,
            "gamma_hz": 1000.0,
            "lambda_hz": 100.0,
            "lambda_tilde_hz": -290.0,
            "gamma_se_hz": 0.0,
            "n_bar": 0.0,
            "n_max": 1,
            "gamma_t_final": 20.0,
            "sample_count": 11
        },
        "bound": {
            "gamma": 1.0,
            "delta": 0.0,
            "lambda": 0.3,
            "total_time": 1000.0,
            "bound_window": [1e-4, 200.0],
            "grid_points": 512,
            "n_probes": [1, 4, 16]
        },
        "crystal": {
            "masses": [39.9626, 39.9626, 23.9850],
            "reference_mass": 39.9626,
            "omega_z_hz": 1.0e6,
            "laser_wavelength": 729e-9,
            "laser_axis_projection": 1.0,
            "qubit_ions": [0, 1],
            "phases": [0.0, 0.0],
            "target_couplings_hz": [100.0, -290.0]
        }
    }


@pytest.fixture
def temp_config_file(test_config):
    """Create a temporary configuration file."""
    with tempfile.NamedTemporaryFile(mode='w', suffix='.json', delete=False) as f:
        json.dump(test_config, f)
        temp_path = f.name
    yield temp_path
    os.unlink(temp_path)


@pytest.fixture
def loader(temp_config_file, monkeypatch):
    """ConfigLoader on the small test configuration with no CT_ overrides."""
    for key in list(os.environ):
        if key.startswith("CT_"):
            monkeypatch.delenv(key, raising=False)
    return ConfigLoader(temp_config_file)


@pytest.fixture
def fig1_params():
    """Gamma = 1, Delta = 0.05, lambda = 0.3, lambda_tilde = 0.6 with a single-excitation truncation."""
    return SystemParams(omega=0.05, omega_tilde=0.05, omega_m=0.0, lam=0.3, lam_tilde=0.6, gamma=1.0, n_max=1)


@pytest.fixture
def ion_trap_params():
    """Gamma/2pi = 1 kHz, lambda/2pi = 0.1 kHz, lambda_tilde/2pi = -0.29 kHz."""
    return SystemParams.from_hz(omega_hz=0.0, omega_tilde_hz=0.0, omega_m_hz=0.0, lam_hz=100.0,
                                lam_tilde_hz=-290.0, gamma_hz=1000.0, n_max=1)


@pytest.fixture
def rng():
    """Seeded random generator."""
    return np.random.default_rng(20240611)


def random_density_matrix(rng, dim):
    """Full-rank random state."""
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ g.conj().T
    return rho / np.trace(rho)


@pytest.fixture
def random_state_factory(rng):
    """Callable dim -> random density matrix."""
    return lambda dim: random_density_matrix(rng, dim)


