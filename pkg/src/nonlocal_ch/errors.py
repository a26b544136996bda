"""Exception hierarchy shared by all modules."""


class NCHError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(NCHError, ValueError):
    """Grid functions or kernels live on incompatible grids."""


class ParameterError(NCHError, ValueError):
    """A scalar parameter is outside its admissible range."""


class DomainError(NCHError, ValueError):
    """An operator was applied outside its domain (e.g. nonzero mean)."""


class SymmetryError(NCHError, ValueError):
    """A spectral field is not the transform of a real grid function."""


class KernelError(NCHError, ValueError):
    """A kernel violates nonnegativity, evenness, or positivity of its symbol."""


class ConservationError(NCHError, ValueError):
    """Two fields that must share a mean do not."""


class BlowUpError(NCHError, RuntimeError):
    """A time iterate contains NaN or Inf."""

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite values detected at step {step}")


class StudyError(NCHError, RuntimeError):
    """A refinement study could not be completed."""


class ConfigError(NCHError, ValueError):
    """Malformed or inconsistent configuration document."""
