#!/usr/bin/env python3
"""
Exception hierarchy for the coherence-trapping toolkit.
Each family maps onto one command-line exit code.
"""


class CoherenceTrappingError(Exception):
    """Base class for all toolkit errors."""

    exit_code = 1


class ConfigError(CoherenceTrappingError, ValueError):
    """Invalid or unreadable configuration."""

    exit_code = 1


class DimensionMismatchError(CoherenceTrappingError, ValueError):
    """Operator and state live on incompatible Hilbert spaces."""

    exit_code = 1


class NumericalError(CoherenceTrappingError, RuntimeError):
    """A simulation left its certified numerical envelope."""

    exit_code = 2


class StepSizeError(NumericalError):
    """Trace drift beyond tolerance; the time step is too large."""


class PositivityError(NumericalError):
    """A density matrix acquired a negative eigenvalue beyond tolerance."""


class TruncationError(NumericalError):
    """The top Fock level carries too much population for the truncation."""


class UnstableCrystalError(NumericalError):
    """The axial Hessian has a negative eigenvalue."""


class ConvergenceError(CoherenceTrappingError, RuntimeError):
    """An iterative solver or a step-halving self-test did not converge."""

    exit_code = 3


class LambDickeWarning(UserWarning):
    """A Lamb-Dicke factor is too large for the first-order expansion."""
