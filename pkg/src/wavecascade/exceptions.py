"""Exception hierarchy shared by all modules."""


class WaveCascadeError(Exception):
    """Base class for package errors."""


class DomainError(WaveCascadeError, ValueError):
    """Argument outside the domain of a function (e.g. negative frequency)."""


class ConfigError(WaveCascadeError, ValueError):
    """Invalid configuration, grid or model parameters."""


class StateError(WaveCascadeError, ValueError):
    """Spectral state contains NaN or negative masses, or sits on the wrong grid."""


class DataError(WaveCascadeError):
    """Missing or corrupt files on disk."""


class StiffnessError(WaveCascadeError):
    """Time step fell below ``dt_min`` while enforcing positivity.

    ``payload`` carries the diagnostic context (time, attempted dt, the
    offending cells) so callers can flush partial output.
    """

    def __init__(self, message, payload=None):
        super().__init__(message)
        self.payload = payload or {}
