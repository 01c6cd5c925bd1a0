#!/usr/bin/env python3
"""
Plotting Service
Renders scenario CSV files to SVG. The CSV stays the artifact of record;
empty cells (infinite uncertainties) are drawn as gaps.
"""

import logging
from pathlib import Path
from typing import Dict, Tuple, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# scenario -> (x column, y-axis log scale, x-axis log scale)
PLOT_LAYOUT: Dict[str, Tuple[str, bool, bool]] = {
    "fig1": ("N (1)", True, False),
    "fig2a": ("gamma_t (1)", True, False),
    "fig2b": ("omega (Hz)", True, False),
    "evolve": ("gamma_t (1)", False, False),
    "bound": ("N (1)", True, True),
    "modes": ("mode (1)", False, False),
}

SKIPPED_COLUMNS = {"t (s)", "omega_t_bar (rad)", "trace (1)", "min_eigenvalue (1)"}


def read_scenario_csv(csv_path: Union[str, Path]) -> pd.DataFrame:
    """Load a scenario CSV, skipping the version/hash comment line."""
    return pd.read_csv(csv_path, comment='#')


def _series_for(scenario: str, frame: pd.DataFrame, x_column: str):
    for column in frame.columns:
        if column == x_column or column in SKIPPED_COLUMNS:
            continue
        if scenario == "fig2b" and not column.startswith("ct_"):
            continue
        if scenario == "modes" and not column.startswith("frequency"):
            continue
        yield column


def plot_scenario(csv_path: Union[str, Path], scenario: str) -> Path:
    """
    Plot every data column of a scenario CSV against its abscissa.

    Args:
        csv_path: Path of the scenario CSV
        scenario (str): Scenario name selecting the layout

    Returns:
        Path: Written SVG file
    """
    if scenario not in PLOT_LAYOUT:
        raise ValueError(f"No plot layout for scenario '{scenario}'")
    csv_path = Path(csv_path)
    frame = read_scenario_csv(csv_path)
    x_column, log_y, log_x = PLOT_LAYOUT[scenario]

    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    style = "o-" if len(frame) < 30 else "-"
    for column in _series_for(scenario, frame, x_column):
        values = frame[column]
        if log_y and (values.dropna() <= 0).any():
            continue
        ax.plot(frame[x_column], values, style, markersize=3, label=column)
    if log_y:
        ax.set_yscale("log")
    if log_x:
        ax.set_xscale("log")
    ax.set_xlabel(x_column)
    ax.set_title(scenario)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    fig.tight_layout()

    svg_path = csv_path.with_suffix(".svg")
    fig.savefig(svg_path, format="svg")
    plt.close(fig)
    logger.info("💾 Plot saved to %s", svg_path)
    return svg_path
