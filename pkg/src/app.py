#!/usr/bin/env python3
"""
Coherence-trapping simulation command line.
Regenerates the figure data sets and runs single trajectories, bound sweeps
and normal-mode reports from a JSON configuration.
"""

import logging
import sys
from typing import Optional, Sequence, Tuple

import click

from src import __version__
from src.config.config_loader import ConfigLoader
from src.core.errors import CoherenceTrappingError, ConfigError
from src.services.experiment_service import ExperimentService, OmegaScan


def configure_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def _fail(ctx: click.Context, error: CoherenceTrappingError) -> None:
    click.echo(f"❌ {type(error).__name__}: {error}", err=True)
    ctx.exit(error.exit_code)


def _execute(ctx: click.Context, scenario: str, **kwargs) -> None:
    """Run one scenario and map toolkit errors onto exit codes."""
    loader: ConfigLoader = ctx.obj["loader"]
    try:
        service = ExperimentService(loader)
        click.echo(f"🚀 Running {scenario} (config sha256 {loader.config_hash()[:12]})")
        result = service.run_modes() if scenario == "modes" else (service.run(scenario, **kwargs), None)
        path, report = result
        if report:
            click.echo("🔬 Normal modes")
            for key, value in report.items():
                click.echo(f"   {key}: {value}")
        click.echo(f"💾 Results written to {path}")
    except CoherenceTrappingError as e:
        _fail(ctx, e)


def _apply_ion_trap_overrides(loader: ConfigLoader, n_bar: Tuple[float, ...], omega_scan: Optional[str]) -> None:
    if n_bar:
        loader.set('ion_trap.n_bar_list', list(n_bar))
    if omega_scan:
        scan = OmegaScan.parse(omega_scan)
        loader.set('ion_trap.omega_scan_hz', [scan.start_hz, scan.stop_hz, scan.n_points])


def create_cli() -> click.Group:
    """Command group factory."""

    @click.group()
    @click.version_option(__version__, prog_name="ct-sim")
    @click.option('--config', 'config_path', type=click.Path(dir_okay=False), default=None,
                  help='JSON configuration file (defaults to the bundled config.json).')
    @click.option('--out', 'out_dir', type=click.Path(file_okay=False), default=None, help='Output directory.')
    @click.option('--threads', type=int, default=None, help='Worker processes for parameter sweeps.')
    @click.option('--dt', type=float, default=None, help='Integration step in seconds.')
    @click.option('--no-plots', is_flag=True, help='Skip SVG plots.')
    @click.option('--verbose', '-v', is_flag=True, help='Debug logging.')
    @click.pass_context
    def cli(ctx, config_path, out_dir, threads, dt, no_plots, verbose):
        """Coherence-trapping frequency estimation toolkit."""
        configure_logging(verbose)
        try:
            loader = ConfigLoader(config_path)
            if out_dir is not None:
                loader.set('output.directory', out_dir)
            if threads is not None:
                if threads < 1:
                    raise ConfigError(f"--threads must be at least 1, got {threads}")
                loader.set('simulation.threads', threads)
            if dt is not None:
                if dt <= 0:
                    raise ConfigError(f"--dt must be positive, got {dt}")
                loader.set('simulation.dt', dt)
            if no_plots:
                loader.set('output.plots', False)
        except CoherenceTrappingError as e:
            _fail(ctx, e)
        ctx.obj = {"loader": loader}

    register_commands(cli)
    return cli


def register_commands(cli: click.Group) -> None:
    """Register all scenario commands."""

    @cli.command()
    @click.pass_context
    def fig1(ctx):
        """Entangled bound (2N qubits) versus trapping error (N probes)."""
        _execute(ctx, "fig1")

    @cli.command()
    @click.option('--n-bar', 'n_bar', type=float, multiple=True, help='Reservoir occupation (repeatable).')
    @click.option('--omega-scan', type=str, default=None, help="Detuning grid 'min,max,n' in Hz.")
    @click.pass_context
    def fig2a(ctx, n_bar, omega_scan):
        """Minimal Ramsey uncertainty against interrogation time."""
        try:
            _apply_ion_trap_overrides(ctx.obj["loader"], n_bar, omega_scan)
        except CoherenceTrappingError as e:
            _fail(ctx, e)
        _execute(ctx, "fig2a")

    @cli.command()
    @click.option('--n-bar', 'n_bar', type=float, multiple=True, help='Reservoir occupation (repeatable).')
    @click.option('--omega-scan', type=str, default=None, help="Detuning grid 'min,max,n' in Hz.")
    @click.pass_context
    def fig2b(ctx, n_bar, omega_scan):
        """Ramsey uncertainty against detuning at fixed interrogation time."""
        try:
            _apply_ion_trap_overrides(ctx.obj["loader"], n_bar, omega_scan)
        except CoherenceTrappingError as e:
            _fail(ctx, e)
        _execute(ctx, "fig2b")

    @cli.command()
    @click.option('--n-bar', 'n_bar', type=float, default=None, help='Reservoir occupation.')
    @click.option('--model', type=click.Choice(['ancilla', 'probe_mode']), default=None)
    @click.option('--check-convergence', is_flag=True, help='Compare against a run at half the step.')
    @click.pass_context
    def evolve(ctx, n_bar, model, check_convergence):
        """Single master-equation trajectory."""
        loader = ctx.obj["loader"]
        if n_bar is not None:
            loader.set('evolve.n_bar', n_bar)
        if model is not None:
            loader.set('evolve.model', model)
        _execute(ctx, "evolve", convergence_check=check_convergence)

    @cli.command()
    @click.option('--n-probes', 'n_probes', type=int, multiple=True, help='Probe number (repeatable).')
    @click.pass_context
    def bound(ctx, n_probes):
        """Minimized entangled-probe bound for a list of probe numbers."""
        if n_probes:
            ctx.obj["loader"].set('bound.n_probes', list(n_probes))
        _execute(ctx, "bound")

    @cli.command()
    @click.option('--equal-mass', is_flag=True, help='Replace every ion by the reference species.')
    @click.pass_context
    def modes(ctx, equal_mass):
        """Equilibrium, normal modes, Lamb-Dicke factors and couplings."""
        loader = ctx.obj["loader"]
        if equal_mass:
            masses = loader.get('crystal.masses')
            loader.set('crystal.masses', [loader.get('crystal.reference_mass')] * len(masses))
        _execute(ctx, "modes")


cli = create_cli()


def main(args: Optional[Sequence[str]] = None) -> int:
    """
    Main entry point for the command line.

    Usage errors exit with ConfigError.exit_code instead of click's 2.
    """
    try:
        result = cli.main(args=args, prog_name="ct-sim", obj={}, standalone_mode=False)
    except click.UsageError as e:
        e.show()
        return ConfigError.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        click.echo("Aborted!", err=True)
        return 1
    return result if isinstance(result, int) else 0


if __name__ == '__main__':
    sys.exit(main())
