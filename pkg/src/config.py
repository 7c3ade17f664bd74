"""Configuration for training, kernels and the command-line runtime."""

from enum import Enum
from pathlib import Path
from typing import Optional

import toml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings

from .errors import ConfigError


class Mode(str, Enum):
    LINEAR = "linear"
    KERNEL = "kernel"


class KernelKind(str, Enum):
    LINEAR = "linear"
    RBF = "rbf"


def default_sigma_grid() -> list[float]:
    """Powers of two from 2^-15 to 2^3."""
    return [2.0 ** k for k in range(-15, 4)]


class LossConfig(BaseModel):
    """Sigmoid slope and the guard on the ratio denominator."""

    beta: float = Field(default=10.0, gt=0)
    denom_floor: float = Field(default=1e-12, gt=0, le=1e-9)


class KernelConfig(BaseModel):
    """Kernel choice. An rbf kernel without sigma is tuned over sigma_grid."""

    kind: KernelKind = KernelKind.RBF
    sigma: Optional[float] = Field(default=None, gt=0)
    sigma_grid: Optional[list[float]] = None
    grid_folds: int = Field(default=10, ge=2)

    @field_validator("sigma_grid")
    @classmethod
    def _grid_positive(cls, grid: Optional[list[float]]) -> Optional[list[float]]:
        if grid is not None:
            if not grid:
                raise ValueError("sigma_grid must not be empty")
            if any(s <= 0 for s in grid):
                raise ValueError("sigma_grid values must be positive")
        return grid

    def needs_selection(self) -> bool:
        return self.kind == KernelKind.RBF and self.sigma is None

    def grid(self) -> list[float]:
        return list(self.sigma_grid) if self.sigma_grid else default_sigma_grid()


class TrainConfig(BaseModel):
    """Inputs of the training loop."""

    prototypes_per_class: int = Field(default=5, ge=1)
    rank: Optional[int] = Field(default=None, ge=1)  # None -> full dimension
    beta: float = Field(default=10.0, gt=0)
    epsilon_converge: float = Field(default=1e-5, gt=0)
    max_epochs: int = Field(default=200, ge=1)
    rho: float = Field(default=0.95, gt=0, lt=1)
    eps_ada: float = Field(default=1e-6, gt=0)
    init_noise: float = Field(default=1e-3, ge=0)
    seed: int = 0
    mode: Mode = Mode.LINEAR
    kernel: Optional[KernelConfig] = None
    standardize: bool = True

    @model_validator(mode="after")
    def _kernel_present(self) -> "TrainConfig":
        if self.mode == Mode.KERNEL and self.kernel is None:
            raise ValueError("kernel mode requires a kernel configuration")
        return self

    def loss_config(self) -> LossConfig:
        return LossConfig(beta=self.beta)

    def resolved_rank(self, dim: int) -> int:
        """Rank for a training space of the given dimension."""
        rank = dim if self.rank is None else self.rank
        if rank > dim:
            raise ConfigError(f"rank {rank} exceeds dimension {dim}")
        return rank


def build_train_config(**fields) -> TrainConfig:
    """Construct a TrainConfig, reporting validation problems as ConfigError."""
    try:
        return TrainConfig(**fields)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


def load_train_config(path: str | Path) -> dict:
    """Read the [train] table of a TOML file as TrainConfig fields."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = toml.load(path)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    return dict(data.get("train", {}))


class Settings(BaseSettings):
    """Process-wide runtime settings."""

    seed: int = 0
    threads: int = 1
    log_level: str = "WARNING"

    class Config:
        env_prefix = "LMDL_"


# Singleton instance
_settings: Optional[Settings] = None

def get_settings() -> Settings:
    """Get or create settings singleton."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings():
    """Drop the cached settings so the environment is read again."""
    global _settings
    _settings = None
