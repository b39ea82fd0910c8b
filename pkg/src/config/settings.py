"""
Configuration settings management for the spectral stability lab.
"""
import math
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Lab-wide settings with environment variable support"""

    # Output Configuration
    OUTPUT_DIR: str = Field(default="runs", description="Directory for reports, ledgers and checkpoints")
    SCHEMA_VERSION: str = Field(default="1.0", description="Schema version embedded in every artifact")

    # Reproducibility
    DEFAULT_SEED: int = Field(default=20240601, description="Seed used when a run config gives none")

    # Domain Configuration
    DEFAULT_LY: float = Field(default=16.0 * math.pi, description="Default y-period of the truncated domain")

    # Certification Configuration
    CERT_RTOL: float = Field(default=1e-9, description="Relative rounding allowance on certification margins")
    CERT_SAFETY: float = Field(default=2.0, description="Safety factor on the local slope bound when refining cells")
    CERT_INITIAL_CELLS: int = Field(default=2048, description="Uniform cells before adaptive refinement")
    CERT_MAX_POINTS: int = Field(default=1_000_000, description="Cap on refined points per (nu, k) scan")

    # Solver Configuration
    ORACLE_MAX_NY: int = Field(default=256, description="Largest ny accepted by the dense oracle")
    INSTABILITY_GROWTH_FACTOR: float = Field(default=10.0, description="Abort when one step grows the max amplitude by more")
    WRAP_WARNING_FRACTION: float = Field(default=1e-6, description="Warn when boundary-layer energy share exceeds this")
    CHECKPOINT_EVERY: int = Field(default=500, description="Steps between nonlinear checkpoints")
    ENABLE_CHECKPOINTS: bool = Field(default=True, description="Write checkpoints during nonlinear runs")

    # Logging Configuration
    LOG_LEVEL: str = Field(default="INFO", description="Logging level")

    model_config = SettingsConfigDict(
        env_file=".env",
        case_sensitive=True,
        env_file_encoding="utf-8",
        extra="allow"
    )

    @classmethod
    def get_test_settings(cls) -> "Settings":
        """Create test settings with small scans and no checkpoints"""
        return cls(
            OUTPUT_DIR="test-runs",
            DEFAULT_SEED=1234,
            CERT_INITIAL_CELLS=512,
            CERT_MAX_POINTS=200_000,
            CHECKPOINT_EVERY=50,
            ENABLE_CHECKPOINTS=False,
            LOG_LEVEL="DEBUG",
        )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


def get_test_settings() -> Settings:
    """Get test settings instance"""
    return Settings.get_test_settings()
