"""Run configuration: the registry of keys and defaults, and resolved RunConfigs."""

from .registry import (
    ConfigKey,
    ConfigRegistry,
    ConfigValue,
    Section,
    ValueType,
    coerce,
    get_registry,
)
from .run import SNAPSHOT_NAME, RunConfig, load_run_config

__all__ = [
    "ConfigKey",
    "ConfigRegistry",
    "ConfigValue",
    "Section",
    "ValueType",
    "coerce",
    "get_registry",
    "RunConfig",
    "load_run_config",
    "SNAPSHOT_NAME",
]
