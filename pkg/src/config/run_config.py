"""
Per-subcommand run configurations.

A run config is read from a JSON file, patched with ``key=value`` overrides and
validated in one step; any violated constraint surfaces as a ConfigError that
names it.
"""
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Type

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.config.settings import Settings, get_settings
from src.monitor.bootstrap import BootstrapEnvelope
from src.monitor.energy import BALANCE_KINDS
from src.spectral.grid import GridSpec
from src.spectral.params import PhysParams
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

DEFAULT_KSET = [k for n in range(1, 9) for k in (n, -n)]


class GridConfig(BaseModel):
    """Grid resolution and y-period; ly falls back to DEFAULT_LY"""

    model_config = ConfigDict(extra="forbid")

    nx: int = Field(default=16, ge=4)
    ny: int = Field(default=128, ge=4)
    ly: Optional[float] = Field(default=None, gt=0.0)
    dealias: bool = True

    @field_validator("nx", "ny")
    @classmethod
    def check_even(cls, value: int) -> int:
        if value % 2:
            raise ValueError(f"grid sizes must be even, got {value}")
        return value

    def to_grid(self, settings: Optional[Settings] = None) -> GridSpec:
        settings = settings or get_settings()
        return GridSpec(nx=self.nx, ny=self.ny, ly=self.ly or settings.DEFAULT_LY, dealias=self.dealias)


class EnvelopeConfig(BaseModel):
    """
    Ansatz exponents and constants.

    Missing exponents take their smallest admissible values. With
    calibrate_c2 the (w, j) pairing constant C2 is measured on a short run at
    the smallest sweep value and replaces the configured one.
    """

    model_config = ConfigDict(extra="forbid")

    beta: float = 5.5
    delta: Optional[float] = None
    alpha: Optional[float] = None
    C: Optional[float] = Field(default=None, gt=0.0)
    Ctilde: float = Field(default=32.0, gt=0.0)
    C2: float = Field(default=1.0, gt=0.0)
    calibrate_c2: bool = False

    @model_validator(mode="after")
    def fill_exponents(self) -> "EnvelopeConfig":
        if self.delta is None:
            self.delta = self.beta + 13.0 / 3.0
        if self.alpha is None:
            self.alpha = self.delta - self.beta + 14.0 / 3.0
        try:
            self.to_envelope(0.0)
        except ValidationError as e:
            raise ValueError("; ".join(item["msg"] for item in e.errors())) from e
        return self

    def to_envelope(self, eps: float, C2: Optional[float] = None) -> BootstrapEnvelope:
        return BootstrapEnvelope(
            eps=eps,
            alpha=self.alpha,
            beta=self.beta,
            delta=self.delta,
            C=self.C,
            Ctilde=self.Ctilde,
            C2=self.C2 if C2 is None else C2,
        )


class CertifyConfig(BaseModel):
    """Multiplier certification scans"""

    model_config = ConfigDict(extra="forbid")

    nus: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.1])
    kset: List[int] = Field(default_factory=lambda: list(DEFAULT_KSET))
    eta: Optional[float] = Field(default=None, gt=0.0, le=1.0)
    depth: int = Field(default=12, ge=1, le=40)
    xi_extent: Optional[float] = Field(default=None, gt=0.0)
    families: List[Literal["linear", "nonlinear"]] = Field(default_factory=lambda: ["linear", "nonlinear"])
    negative_control: Optional[Literal["drop_m2", "drop_m3"]] = None

    @model_validator(mode="after")
    def check_scan(self) -> "CertifyConfig":
        if not self.kset:
            raise ValueError("kset must not be empty")
        if not self.nus or any(not 0.0 < nu <= 1.0 for nu in self.nus):
            raise ValueError(f"nus must be a non-empty list in (0, 1], got {self.nus}")
        if not self.families:
            raise ValueError("families must not be empty")
        return self


class LinearConfig(BaseModel):
    """Linear runs along characteristics with the decay checks"""

    model_config = ConfigDict(extra="forbid")

    params: PhysParams = Field(default_factory=lambda: PhysParams(nu=1.0, mu=1.0, eta=1.0, b=1.1))
    grid: GridConfig = Field(default_factory=GridConfig)
    t_max: float = Field(default=30.0, gt=0.0)
    dt: Optional[float] = Field(default=None, gt=0.0)
    sample_dt: float = Field(default=0.1, gt=0.0)
    kset: List[int] = Field(default_factory=lambda: [1, 2, 3])
    width: float = Field(default=2.0, gt=0.0, description="Width of the Gaussian y-envelope")
    seed: Optional[int] = None
    oracle: bool = False
    oracle_samples: int = Field(default=20, ge=1)
    oracle_t: float = Field(default=10.0, gt=0.0)
    energy_tolerance: Optional[float] = Field(
        default=None, gt=0.0, description="Gate the pass flag on the theta energy residual; informational when unset"
    )

    @model_validator(mode="after")
    def check_run(self) -> "LinearConfig":
        self.params.check_linear_regime()
        if not self.kset:
            raise ValueError("kset must not be empty")
        bad = [k for k in self.kset if 3 * abs(k) >= self.grid.nx]
        if bad:
            raise ValueError(f"kset entries {bad} are not inside the dealiased band of nx={self.grid.nx}")
        if self.sample_dt > self.t_max:
            raise ValueError(f"sample_dt={self.sample_dt} exceeds t_max={self.t_max}")
        return self


class NonlinearConfig(BaseModel):
    """Nonlinear runs monitored against the bootstrap envelopes"""

    model_config = ConfigDict(extra="forbid")

    params: PhysParams = Field(default_factory=lambda: PhysParams(nu=0.5, mu=0.5, eta=0.5, b=1.1))
    grid: GridConfig = Field(default_factory=lambda: GridConfig(nx=64, ny=256))
    envelope: EnvelopeConfig = Field(default_factory=EnvelopeConfig)
    eps: float = Field(default=1e-3, ge=0.0)
    sweep: List[float] = Field(default_factory=lambda: [1e-1, 1e-2, 1e-3, 1e-4])
    t_max: float = Field(default=50.0, gt=0.0)
    dt: float = Field(default=0.05, gt=0.0)
    sample_every: int = Field(default=10, ge=1)
    fill: float = Field(default=0.5, gt=0.0, le=1.0)
    kmax: int = Field(default=2, ge=0)
    seed: Optional[int] = None
    run_sweep: bool = False
    check_identities: bool = True

    @model_validator(mode="after")
    def check_run(self) -> "NonlinearConfig":
        self.params.check_nonlinear_regime()
        if any(e < 0.0 for e in self.sweep):
            raise ValueError(f"sweep values must be >= 0, got {self.sweep}")
        if 3 * self.kmax >= self.grid.nx:
            raise ValueError(f"kmax={self.kmax} is not inside the dealiased band of nx={self.grid.nx}")
        return self


class BudgetConfig(BaseModel):
    """Energy-balance residuals over a stored trajectory"""

    model_config = ConfigDict(extra="forbid")

    trajectory: str
    b: Optional[float] = Field(default=None, gt=0.0, description="Weight exponent; the run's b when omitted")
    kinds: List[str] = Field(default_factory=lambda: list(BALANCE_KINDS))
    nonlinear: Optional[bool] = Field(default=None, description="Pairing terms on; read from the trajectory when omitted")
    tolerance: float = Field(default=1e-5, gt=0.0)

    @field_validator("kinds")
    @classmethod
    def check_kinds(cls, value: List[str]) -> List[str]:
        unknown = [k for k in value if k not in BALANCE_KINDS]
        if unknown or not value:
            raise ValueError(f"kinds must be a non-empty subset of {list(BALANCE_KINDS)}, got {value}")
        return value


class FitConfig(BaseModel):
    """Re-fit decay rates from a linear CSV"""

    model_config = ConfigDict(extra="forbid")

    csv: str
    params: Optional[PhysParams] = Field(default=None, description="Parameters of the run; read from the CSV when omitted")
    kset: Optional[List[int]] = None


CONFIG_MODELS: Dict[str, Type[BaseModel]] = {
    "certify": CertifyConfig,
    "linear": LinearConfig,
    "nonlinear": NonlinearConfig,
    "budget": BudgetConfig,
    "fit": FitConfig,
}


def _parse_value(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def apply_overrides(data: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """
    Apply dotted ``key=value`` overrides; values are parsed as JSON when possible.

    Raises:
        ConfigError: For an override without '='
    """
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override must look like key=value, got {item!r}")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        target = data
        for part in parts[:-1]:
            node = target.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"Override {key} descends into non-object {part}")
            target = node
        target[parts[-1]] = _parse_value(raw.strip())
    return data


def _merge_nested_defaults(model: Type[BaseModel], data: Dict[str, Any]) -> Dict[str, Any]:
    """Partial overrides of a nested entry keep the other values of its non-trivial default."""
    for name, info in model.model_fields.items():
        value = data.get(name)
        if not isinstance(value, dict) or info.default_factory is None:
            continue
        default = info.default_factory()
        if isinstance(default, BaseModel) and default != type(default)():
            data[name] = {**default.model_dump(), **value}
    return data


def _describe(error: ValidationError) -> str:
    parts = []
    for item in error.errors():
        where = ".".join(str(p) for p in item["loc"]) or "config"
        parts.append(f"{where}: {item['msg']}")
    return "; ".join(parts)


def load_run_config(command: str, path: Optional[str] = None, overrides: Sequence[str] = ()) -> BaseModel:
    """
    Load, override and validate the config of one subcommand.

    Args:
        command: Subcommand name
        path: Optional JSON file
        overrides: ``key=value`` strings applied after the file

    Returns:
        The validated config model

    Raises:
        ConfigError: On an unknown command, unreadable file or violated constraint
    """
    if command not in CONFIG_MODELS:
        raise ConfigError(f"Unknown subcommand: {command}")
    data: Dict[str, Any] = {}
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"Config {path} must hold a JSON object")
    model = CONFIG_MODELS[command]
    _merge_nested_defaults(model, apply_overrides(data, overrides))
    try:
        config = model.model_validate(data)
    except ValidationError as e:
        message = _describe(e)
        logger.error(f"Invalid {command} config: {message}")
        raise ConfigError(message) from e
    logger.debug(f"Resolved {command} config: {config.model_dump(mode='json')}")
    return config
