"""Run configuration: documented defaults, a TOML file, then flag overrides.

Recognized keys (dotted form, TOML sections map to the prefixes):

  resolution          working image size, power of two >= 32 (default 256)
  base_filters        channel width of both networks (default 64)
  motion_epsilon      flow magnitude below which a pixel is static (0.1)
  max_displacement    flow encoding clamp, pixels/frame (16.0)
  mode                discriminator | generator | disc-f | disc-o
  flow.pyramid_levels, flow.iterations_per_level, flow.smoothness_weight
  train.epochs, train.batch_size, train.optimizer, train.momentum_or_beta1,
  train.learning_rate, train.l1_weight, train.seed

Unknown keys are rejected by name; flags win over file values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .data import DEFAULT_MAX_DISPLACEMENT, DEFAULT_RESOLUTION
from .errors import ConfigError
from .flow import DEFAULT_MOTION_EPSILON, FlowConfig
from .training import TrainConfig

DETECT_MODES = ("discriminator", "generator", "disc-f", "disc-o")

_SCHEMA = {
    "resolution": int,
    "base_filters": int,
    "motion_epsilon": float,
    "max_displacement": float,
    "mode": str,
    "flow.pyramid_levels": int,
    "flow.iterations_per_level": int,
    "flow.smoothness_weight": float,
    "train.epochs": int,
    "train.batch_size": int,
    "train.optimizer": str,
    "train.momentum_or_beta1": float,
    "train.learning_rate": float,
    "train.l1_weight": float,
    "train.seed": int,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated settings shared by the CLI subcommands."""

    resolution: int = DEFAULT_RESOLUTION
    base_filters: int = 64
    motion_epsilon: float = DEFAULT_MOTION_EPSILON
    max_displacement: float = DEFAULT_MAX_DISPLACEMENT
    mode: str = "discriminator"
    flow: FlowConfig = FlowConfig()
    train: TrainConfig = TrainConfig()

    def __post_init__(self):
        if (
            self.resolution < 32
            or self.resolution & (self.resolution - 1) != 0
        ):
            raise ConfigError(
                f"resolution must be a power of two >= 32, got {self.resolution}"
            )
        if self.base_filters < 1:
            raise ConfigError(f"base_filters must be >= 1, got {self.base_filters}")
        if self.motion_epsilon <= 0:
            raise ConfigError(
                f"motion_epsilon must be positive, got {self.motion_epsilon}"
            )
        if self.max_displacement <= 0:
            raise ConfigError(
                f"max_displacement must be positive, got {self.max_displacement}"
            )
        if self.mode not in DETECT_MODES:
            raise ConfigError(
                f"mode must be one of {DETECT_MODES}, got {self.mode!r}"
            )


def _cast(key: str, value):
    want = _SCHEMA[key]
    if want is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"config key {key!r} must be an integer, got {value!r}")
        return value
    if want is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"config key {key!r} must be a number, got {value!r}")
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"config key {key!r} must be a string, got {value!r}")
    return value


def _flatten(table: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in table.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def parse_config(
    path: Optional[str] = None, overrides: Optional[dict] = None
) -> RunConfig:
    """Merge defaults, an optional TOML file, and override values (which win)."""
    merged: dict = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                table = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: invalid TOML: {exc}") from exc
        merged.update(_flatten(table))
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value

    for key in merged:
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
    values = {key: _cast(key, value) for key, value in merged.items()}

    def pick(prefix: str) -> dict:
        return {
            key[len(prefix) :]: value
            for key, value in values.items()
            if key.startswith(prefix)
        }

    top = {k: v for k, v in values.items() if "." not in k}
    flow = FlowConfig(
        **pick("flow."),
        motion_epsilon=top.get("motion_epsilon", DEFAULT_MOTION_EPSILON),
        max_displacement=top.get("max_displacement", DEFAULT_MAX_DISPLACEMENT),
    )
    train = TrainConfig(**pick("train."))
    return RunConfig(flow=flow, train=train, **top)
