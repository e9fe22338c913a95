"""Exception types shared across the package.

Everything raised on purpose derives from RdpcmError so callers (and the
CLI) can distinguish expected domain failures from genuine bugs.
"""


class RdpcmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSpectrumError(RdpcmError):
    """The spectrum definition is malformed (unstable AR polynomial,
    negative or asymmetric tabulated values, bad grid size)."""


class DegenerateSpectrumError(RdpcmError):
    """The spectrum is identically zero, so spectral functionals are
    undefined."""


class ResolutionError(RdpcmError):
    """The requested quantity needs more frequency resolution than the
    grid provides (e.g. autocorrelation lag beyond grid_size/2)."""


class DomainError(RdpcmError):
    """A numeric argument is outside its valid interval.

    Carries the interval so error messages (and the CLI error report)
    can state what would have been accepted.
    """

    def __init__(self, message, valid_interval=None):
        super().__init__(message)
        self.valid_interval = valid_interval


class ParameterError(RdpcmError):
    """A structural parameter is invalid (even tap count, too-short
    signal, mismatched lengths)."""


class NumericalDegeneracyError(RdpcmError):
    """A computation hit a numerically degenerate case (non-PSD
    autocorrelation, zero variance input, vanishing channel noise)."""


class SingularChannelError(RdpcmError):
    """The channel frequency response vanishes somewhere, so the
    ISI-free equivalent does not exist."""
