"""Exception hierarchy for twinbeam."""
from typing import Optional


class TwinBeamError(Exception):
    """Base class for every error raised by the package."""


class DomainError(TwinBeamError, ValueError):
    """A parameter lies outside its physical domain."""


class SingularSystem(TwinBeamError):
    """The 3x3 Sylvester system has no unique solution."""


class ResourceError(TwinBeamError):
    """A requested computation exceeds the configured size limit."""


class NoSolution(TwinBeamError):
    """Measured gains are inconsistent with every admissible medium."""


class NotConverged(TwinBeamError):
    """An iterative solver ran out of iterations."""


class ConfigError(TwinBeamError):
    """Configuration file is missing or holds invalid values."""


class InputFormatError(TwinBeamError):
    """A measurement file could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
