#!/usr/bin/env python3
"""
Configuration loader for the coherence-trapping toolkit.
Handles loading scenario configuration from JSON files and environment variables.
"""

import copy
import hashlib
import json
import logging
import os
from functools import lru_cache
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from src.core.errors import ConfigError

logger = logging.getLogger(__name__)

ENV_PREFIX = "CT_"


class ConfigLoader:
    """Configuration loader with environment variable override support."""

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize the configuration loader.

        Args:
            config_path (str, optional): Path to the configuration file. When omitted the
                bundled config.json is used and a missing file falls back to defaults.

        Raises:
            ConfigError: If an explicitly given file is missing or not valid JSON
        """
        load_dotenv()
        self._explicit = config_path is not None
        if config_path is None:
            current_dir = os.path.dirname(os.path.abspath(__file__))
            config_path = os.path.join(current_dir, 'config.json')

        self.config_path = config_path
        self._config: Dict[str, Any] = {}
        self._overrides: Dict[str, Any] = {}
        self.load_config()

    def load_config(self) -> None:
        """Load configuration from JSON file."""
        try:
            with open(self.config_path, 'r', encoding='utf-8') as f:
                loaded = json.load(f)
            if not isinstance(loaded, dict):
                raise ConfigError(f"Configuration root must be an object: {self.config_path}")
            self._config = self._merge(self._get_default_config(), loaded)
            logger.debug("✅ Configuration loaded from: %s", self.config_path)
        except FileNotFoundError:
            if self._explicit:
                raise ConfigError(f"Configuration file not found: {self.config_path}")
            logger.warning("⚠️ Configuration file not found, using defaults: %s", self.config_path)
            self._config = self._get_default_config()
        except json.JSONDecodeError as e:
            if self._explicit:
                raise ConfigError(f"Invalid JSON in configuration file {self.config_path}: {e}")
            logger.error("❌ Invalid JSON in configuration file, using defaults: %s", e)
            self._config = self._get_default_config()

    @staticmethod
    def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
        merged = copy.deepcopy(base)
        for key, value in override.items():
            if isinstance(value, dict) and isinstance(merged.get(key), dict):
                merged[key] = ConfigLoader._merge(merged[key], value)
            else:
                merged[key] = copy.deepcopy(value)
        return merged

    @staticmethod
    def _get_default_config() -> Dict[str, Any]:
        """Return default configuration if file loading fails."""
        return {
            "simulation": {
                "step_factor": 1e-3,
                "dt": None,
                "threads": 1,
                "parallel_backend": "loky",
                "trace_tolerance": 1e-6,
                "positivity_tolerance": 1e-6,
                "truncation_tolerance": 1e-6
            },
            "output": {
                "directory": "results",
                "plots": True
            },
            "fig1": {
                "gamma": 1.0,
                "delta": 0.05,
                "lambda": 0.3,
                "lambda_tilde": 0.6,
                "gamma_t_bar": 30.0,
                "n_max_probes": 12,
                "total_time": 1000.0,
                "bound_window": [1e-3, 200.0],
                "grid_points": 512
            },
            "ion_trap": {
                "gamma_hz": 1000.0,
                "lambda_hz": 100.0,
                "lambda_tilde_hz": -290.0,
                "omega_m_hz": 0.0,
                "gamma_se_hz": 0.14,
                "n_max": 7,
                "n_bar_list": [0.02, 0.05],
                "omega_scan_hz": [-100.0, 100.0, 100],
                "gamma_t_final": 180.0,
                "sample_count": 361,
                "gamma_t_bar": 120.0,
                "n_probes": 1,
                "total_time": 1.0
            },
            "evolve": {
                "model": "ancilla",
                "omega_hz": 0.0,
                "omega_tilde_hz": None,
                "omega_m_hz": 0.0,
                "gamma_hz": 1000.0,
                "lambda_hz": 100.0,
                "lambda_tilde_hz": -290.0,
                "gamma_se_hz": 0.0,
                "n_bar": 0.0,
                "n_max": 3,
                "gamma_t_final": 30.0,
                "sample_count": 61
            },
            "bound": {
                "gamma": 1.0,
                "delta": 0.0,
                "lambda": 0.3,
                "total_time": 1000.0,
                "bound_window": [1e-4, 200.0],
                "grid_points": 1024,
                "n_probes": [1, 2, 4, 8, 16, 100, 10000, 1000000]
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

    @staticmethod
    def _env_key(key_path: str) -> str:
        return ENV_PREFIX + key_path.replace('.', '_').upper()

    @staticmethod
    def _decode(text: str) -> Any:
        try:
            return json.loads(text)
        except json.JSONDecodeError:
            return text

    def get(self, key_path: str, default: Any = None) -> Any:
        """
        Get configuration value using dot notation.

        Args:
            key_path (str): Dot-separated path to the configuration key (e.g., 'ion_trap.gamma_hz')
            default (Any): Default value if key is not found

        Returns:
            Any: Configuration value or default
        """
        if key_path in self._overrides:
            return copy.deepcopy(self._overrides[key_path])
        # CT_ION_TRAP_GAMMA_HZ overrides ion_trap.gamma_hz
        env_value = os.getenv(self._env_key(key_path))
        if env_value is not None:
            return self._decode(env_value)

        value = self._config
        try:
            for key in key_path.split('.'):
                value = value[key]
            return copy.deepcopy(value)
        except (KeyError, TypeError):
            return default

    def require(self, key_path: str) -> Any:
        """Like ``get`` but a missing key is a ConfigError."""
        sentinel = object()
        value = self.get(key_path, sentinel)
        if value is sentinel:
            raise ConfigError(f"Missing configuration key: {key_path}")
        return value

    def get_section(self, section: str) -> Dict[str, Any]:
        """Resolved copy of one top-level section."""
        raw = self._config.get(section)
        if not isinstance(raw, dict):
            raise ConfigError(f"Missing configuration section: {section}")
        return {key: self.get(f"{section}.{key}") for key in raw}

    def set(self, key_path: str, value: Any) -> None:
        """
        Override a configuration value in memory.

        Args:
            key_path (str): Dot-separated path to the configuration key
            value (Any): New value to set
        """
        keys = key_path.split('.')
        node = self._config
        for key in keys[:-1]:
            if not isinstance(node.get(key), dict):
                node[key] = {}
            node = node[key]
        node[keys[-1]] = value
        self._overrides[key_path] = value

    def resolved(self) -> Dict[str, Any]:
        """Full document with environment overrides applied."""
        def walk(node: Dict[str, Any], prefix: str) -> Dict[str, Any]:
            result = {}
            for key, value in node.items():
                path = f"{prefix}.{key}" if prefix else key
                result[key] = walk(value, path) if isinstance(value, dict) else self.get(path)
            return result
        return walk(self._config, "")

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON of the resolved document."""
        canonical = json.dumps(self.resolved(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()

    def save_config(self, path: Optional[str] = None) -> str:
        """Save the resolved configuration, by default back to its own file."""
        path = path or self.config_path
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.resolved(), f, indent=2, ensure_ascii=False)
            logger.info("💾 Configuration saved to: %s", path)
        except OSError as e:
            raise ConfigError(f"Failed to save configuration to {path}: {e}")
        return path


@lru_cache(maxsize=1)
def default_loader() -> ConfigLoader:
    """Shared loader on the bundled config.json, created on first use."""
    return ConfigLoader()
