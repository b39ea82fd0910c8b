"""
Utility modules and helper functions
"""
from src.utils.errors import (
    ConfigError,
    LabError,
    NumericalInstabilityError,
    OracleSizeError,
    StepRejectedError,
)
from src.utils.step_control import StepControl

__all__ = [
    "ConfigError",
    "LabError",
    "NumericalInstabilityError",
    "OracleSizeError",
    "StepRejectedError",
    "StepControl",
]
