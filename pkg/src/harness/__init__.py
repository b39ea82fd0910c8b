"""
Command-line harness: run configs, subcommands and artifacts.
"""
from src.harness.registry import ExperimentRegistry

__all__ = ["ExperimentRegistry"]
