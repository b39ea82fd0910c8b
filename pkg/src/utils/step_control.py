"""
Step refinement policy for the characteristic integrator.
"""
from dataclasses import dataclass


@dataclass
class StepControl:
    """Configuration for substep refinement on local-error rejection"""

    max_refinements: int = 6
    initial_substeps: int = 1
    refinement_base: int = 2
    max_substeps: int = 4096
    tolerance: float = 1e-9

    def get_substeps(self, attempt: int) -> int:
        """
        Number of substeps for the current refinement attempt

        Args:
            attempt: Refinement attempt number, starting at 0

        Returns:
            int: Substeps used to cover one output interval
        """
        return min(
            self.initial_substeps * (self.refinement_base ** attempt),
            self.max_substeps,
        )
