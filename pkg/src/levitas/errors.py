"""Exception hierarchy.

Analysis errors (exit code 1 at the CLI) are conditions a correct run can
hit on degenerate data: no spectral peak, indeterminate charge, no
detectable force.  Usage errors (exit code 2) are bad configuration or bad
inputs.
"""


class LevitasError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(LevitasError):
    """Invalid configuration, arguments, or physical-domain violations."""

    exit_code = 2


class DomainError(UsageError):
    """Input outside the physical domain of an operation (e.g. r <= 0)."""


class ConfigError(UsageError):
    """Malformed or invalid experiment configuration."""

    def __init__(self, message, pointer=""):
        super().__init__(message)
        self.pointer = pointer  # JSON-pointer-ish path into the document

    def __str__(self):
        base = super().__str__()
        return f"{self.pointer}: {base}" if self.pointer else base


class AnalysisError(LevitasError):
    """Data-dependent failure of an estimation step."""

    exit_code = 1


class SingularityError(DomainError):
    """On-resonance response with zero total damping."""


class InsufficientDataError(AnalysisError):
    """Not enough samples / sweep points for the requested estimate."""


class IntegrationFailureError(AnalysisError):
    """Simulation state became non-finite; carries the failing step index."""

    def __init__(self, message, step_index):
        super().__init__(message)
        self.step_index = step_index


class NoPeakError(AnalysisError):
    """Spectrally flat input: nothing to fit."""


class FitFailureError(AnalysisError):
    """Nonlinear fit did not converge; carries the best iterate."""

    def __init__(self, message, best_iterate=None):
        super().__init__(message)
        self.best_iterate = best_iterate


class InversionError(AnalysisError):
    """Gas-drag inversion produced an unphysical particle radius."""


class IndeterminateChargeError(AnalysisError):
    """DC sweep slope not significant: charge cannot be determined."""


class NoDetectableForceError(AnalysisError):
    """AC sweep is statistically consistent with the thermal-only model."""
