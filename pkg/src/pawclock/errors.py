"""Exception types raised by the library."""


class PawClockError(Exception):
    """Base class for library errors."""


class EmptyKernel(PawClockError):
    """The Universe Hamiltonian has no eigenvalue within tolerance of zero."""


class ZeroAmplitude(PawClockError):
    """Conditioning amplitude a(t) is below the floor; the conditional state is undefined."""

    def __init__(self, label: float, amplitude: float):
        super().__init__(f"a({label:.6g}) = {amplitude:.3e} is below the conditioning floor")
        self.label = label
        self.amplitude = amplitude


class NonInvertible(PawClockError):
    """The redshift operator has an eigenvalue within tolerance of zero."""


class SeriesDivergent(PawClockError):
    """Geometric series requested with spectral radius >= 1."""


class CalledOnInvertible(PawClockError):
    """Degenerate split requested for an invertible redshift operator."""


class InfeasibleResolution(PawClockError):
    """The requested resolution of the identity does not exist for this spectrum."""


class ConfigError(PawClockError):
    """Configuration could not be parsed or validated.

    ``violations`` is a list of ``(key_path, message)`` pairs.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{path}: {msg}" for path, msg in self.violations]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
