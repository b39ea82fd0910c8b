"""
Physical parameters of the perturbation system.
"""
from pydantic import BaseModel, ConfigDict, Field

from src.utils.errors import ConfigError


class PhysParams(BaseModel):
    """Viscosity, magnetic diffusivity, thermal diffusivity and weight exponent."""

    model_config = ConfigDict(frozen=True)

    nu: float = Field(default=1.0, ge=0.0, le=1.0)
    mu: float = Field(default=1.0, ge=0.0, le=1.0)
    eta: float = Field(default=1.0, ge=0.0, le=1.0)
    b: float = Field(default=1.1)

    def check_linear_regime(self) -> None:
        """Require 0 < nu = mu <= eta <= 1."""
        if self.nu <= 0.0:
            raise ConfigError(f"linear regime requires nu > 0, got nu={self.nu}")
        if self.nu != self.mu:
            raise ConfigError(f"linear regime requires nu = mu, got nu={self.nu}, mu={self.mu}")
        if self.eta < self.nu:
            raise ConfigError(f"linear regime requires nu <= eta, got nu={self.nu}, eta={self.eta}")

    def check_nonlinear_regime(self) -> None:
        """Require 0 < nu = mu = eta <= 1."""
        if self.nu <= 0.0:
            raise ConfigError(f"nonlinear regime requires nu > 0, got nu={self.nu}")
        if not (self.nu == self.mu == self.eta):
            raise ConfigError(
                f"nonlinear regime requires nu = mu = eta, got nu={self.nu}, mu={self.mu}, eta={self.eta}"
            )
        if self.b <= 1.0:
            raise ConfigError(f"nonlinear regime requires b > 1, got b={self.b}")
