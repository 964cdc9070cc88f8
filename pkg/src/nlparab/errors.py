"""Exception types shared across the lab."""


class NlparabError(Exception):
    """Base class for lab errors."""


class ConfigError(NlparabError):
    """Invalid parameters, schema violations, unknown config keys."""


class GridError(NlparabError):
    """Grid geometry that cannot be classified unambiguously."""


class StructureError(NlparabError):
    """Operation not defined for the kernel's structure (e.g. pointwise
    evaluation of the axes-singular measure)."""


class SingularityError(NlparabError):
    """Pointwise kernel evaluation on the diagonal x = y."""


class SolverError(NlparabError):
    """Numerical failure during time stepping (CFL violation, NaN, ...)."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


class CertificateError(NlparabError):
    """A numerical certificate (subsolution margin, lower bound) failed."""
