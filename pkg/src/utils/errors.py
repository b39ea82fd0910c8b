"""
Exception types shared across the lab.
"""
from typing import Optional


class LabError(Exception):
    """Base class for lab failures that map onto harness exit codes."""


class ConfigError(LabError, ValueError):
    """Raised when a run configuration violates a module precondition."""


class NumericalInstabilityError(LabError, RuntimeError):
    """Raised when a time step blows up; carries the path of the state dump."""

    def __init__(self, message: str, dump_path: Optional[str] = None) -> None:
        super().__init__(message)
        self.dump_path = dump_path


class StepRejectedError(LabError, RuntimeError):
    """Raised when step refinement cannot meet the local error tolerance."""


class OracleSizeError(LabError, ValueError):
    """Raised when the dense oracle is asked for a grid beyond its size cap."""
