"""Exception types raised across the package."""


class GiantAtomsError(Exception):
    """Base class for all package errors."""


class InvalidStateError(GiantAtomsError, ValueError):
    """A state vector or density matrix failed validation."""


class ConfigurationError(GiantAtomsError, ValueError):
    """Inconsistent or out-of-range simulation parameters."""


class HorizonError(ConfigurationError):
    """Requested horizon reaches the mode-discretization recurrence time."""


class IntegratorError(GiantAtomsError, RuntimeError):
    """Time stepping became unstable or drifted beyond tolerance."""


class MemoryCapError(ConfigurationError):
    """A solver would allocate more than the configured cap."""
