"""Exception hierarchy shared by every app.

Commands map these onto exit statuses: configuration problems exit with 1,
numerical failures with 2 and I/O problems with 3.
"""


class AtomLensError(Exception):
    """Base class for all errors raised by atomlens."""


class ConfigError(AtomLensError, ValueError):
    """Invalid configuration, invalid domain object or missing input file."""

    exit_status = 1


class NumericalError(AtomLensError, ArithmeticError):
    """A computation could not produce a trustworthy result."""

    exit_status = 2


class QuadratureError(NumericalError):
    """Successive quadrature orders disagree beyond tolerance."""

    def __init__(self, message, order=None, change=None):
        super().__init__(message)
        self.order = order
        self.change = change


class FitError(NumericalError):
    """Least-squares fit did not converge."""


class DegenerateSpectrumError(NumericalError):
    """Spectrum carries no line: every transmission value is the same."""


class ReductionError(NumericalError):
    """A trap event cannot be reduced to a transmission value."""


class ExcludedEventError(ReductionError):
    """Trap event without measurement intervals; excluded from averages."""


class OutputError(AtomLensError, OSError):
    """Output could not be written, or would land outside the output directory."""

    exit_status = 3
