"""
Configuration for dnn-scaler.

Controller constants live in ``ControllerSettings``; process-level settings
come from the environment (a local ``.env`` file is loaded on import):
 - DNNSCALER_LOG: log level name (default WARNING).
 - DNNSCALER_SEED: default random seed when --seed is not given (default 42).
"""
from typing import Any, Optional
import logging
import os

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from dnn_scaler.errors import ConfigError

# Load .env file for local development
load_dotenv()

DEFAULT_SEED = 42
LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class ControllerSettings(BaseModel):
    """Every tunable constant of the profiler, scalers, simulator and baseline."""
    model_config = ConfigDict(extra="forbid", frozen=True)

    # Profiler
    m: int = Field(32, gt=1, description="Probe batch size for TI_B.")
    n: int = Field(8, gt=1, description="Probe multi-tenancy level for TI_MT.")
    batches_per_point: int = Field(10, ge=1)
    eps: float = Field(0.5, ge=0, description="Tie band between TI_B and TI_MT, in percentage points.")
    # Scaler
    alpha: float = Field(0.85, gt=0, lt=1)
    abs_max_bs: int = Field(128, ge=1)
    max_mtl: int = Field(10, ge=1)
    window: int = Field(100, ge=1, description="Latency samples per control decision.")
    # Matrix completion
    rank: int = Field(2, ge=1)
    max_iters: int = Field(200, ge=1)
    tol: float = Field(1e-8, gt=0)
    ridge: float = Field(1e-6, ge=0)
    # Simulated GPU
    sigma: float = Field(0.05, ge=0)
    launch_delay_ms: float = Field(500.0, ge=0)
    terminate_delay_ms: float = Field(100.0, ge=0)
    batching_util_slope: float = Field(1.0, gt=0)
    p_idle: float = Field(50.0, gt=0)
    p_max: float = Field(250.0, gt=0)
    u1: float = Field(0.1, gt=0, le=1)
    # Clipper baseline
    clipper_step: int = Field(4, ge=1)
    clipper_backoff: float = Field(0.10, ge=0, lt=1)

    @model_validator(mode="after")
    def _check_power_range(self) -> "ControllerSettings":
        if self.p_idle >= self.p_max:
            raise ValueError("p_idle must be below p_max")
        return self

    def with_overrides(self, **overrides: Any) -> "ControllerSettings":
        """Return a validated copy with the non-None overrides applied."""
        update = {k: v for k, v in overrides.items() if v is not None}
        if not update:
            return self
        try:
            return ControllerSettings(**{**self.model_dump(), **update})
        except ValidationError as e:
            first = e.errors()[0]
            field = ".".join(str(part) for part in first["loc"]) or "settings"
            raise ConfigError(f"invalid setting '{field}': {first['msg']}") from e


def default_seed() -> int:
    """Seed from DNNSCALER_SEED, falling back to DEFAULT_SEED."""
    raw = os.getenv("DNNSCALER_SEED")
    if raw is None or raw == "":
        return DEFAULT_SEED
    try:
        return int(raw)
    except ValueError as e:
        raise ConfigError(f"DNNSCALER_SEED must be an integer, got '{raw}'") from e


def configure_logging(level: Optional[str] = None) -> int:
    """Configure root logging from the argument or DNNSCALER_LOG; returns the numeric level."""
    name = (level or os.getenv("DNNSCALER_LOG") or "WARNING").upper()
    numeric = logging.getLevelName(name)
    if not isinstance(numeric, int):
        raise ConfigError(f"unknown log level '{name}'")
    logging.basicConfig(level=numeric, format=LOG_FORMAT, force=True)
    return numeric
