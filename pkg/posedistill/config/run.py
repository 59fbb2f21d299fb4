"""
Resolved run configuration.

A run config file is a flat YAML mapping of registry keys. Resolution
starts from the registry defaults, applies the file, then explicit
overrides; every problem is collected and raised in one ConfigError.
The resolved mapping and its SHA-256 hash are embedded in every artifact.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from collections.abc import Mapping
from pathlib import Path
from types import MappingProxyType
from typing import Any

import yaml

from posedistill.datagen import DatasetConfig, PoseRanges
from posedistill.errors import ConfigError
from posedistill.losses import LossWeights
from posedistill.models import EncoderConfig
from posedistill.trainer import TrainConfig

from .registry import ConfigRegistry, ConfigValue, Section, coerce, get_registry

logger = logging.getLogger(__name__)

SNAPSHOT_NAME = "resolved_config.yaml"


def _resolve(
    base: Mapping[str, ConfigValue],
    updates: Mapping[str, Any],
    registry: ConfigRegistry,
    origin: str,
) -> dict[str, ConfigValue]:
    values = dict(base)
    errors: list[str] = []
    for key, raw in updates.items():
        if key not in registry.keys:
            errors.append(f"unknown config key {key!r}")
            continue
        try:
            values[key] = coerce(registry.keys[key].type, raw)
        except TypeError as exc:
            errors.append(f"{key}: {exc}")
    if errors:
        raise ConfigError(
            f"{origin}: config validation failed ({len(errors)} error(s)):\n"
            + "\n".join(f"  • {e}" for e in errors)
        )
    return values


class RunConfig:
    """
    Immutable key → value mapping covering every registry key, plus its hash.

    Builders turn the flat mapping into the typed configs each package
    takes; constructor errors surface as ConfigError.
    """

    def __init__(
        self, values: Mapping[str, ConfigValue], registry: ConfigRegistry | None = None
    ) -> None:
        self._registry = registry or get_registry()
        missing = set(self._registry.keys) - set(values)
        if missing:
            raise ConfigError(f"run config is missing key(s): {', '.join(sorted(missing))}")
        ordered = {k: values[k] for k in self._registry.keys}
        self.values: MappingProxyType[str, ConfigValue] = MappingProxyType(ordered)
        self.hash = hashlib.sha256(self.canonical_json().encode()).hexdigest()

    # ── Mapping access ────────────────────────────────────────────────────────

    def __getitem__(self, key: str) -> ConfigValue:
        return self.values[key]

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RunConfig) and self.hash == other.hash

    def __hash__(self) -> int:
        return hash(self.hash)

    def __repr__(self) -> str:
        return f"RunConfig(hash={self.hash[:12]})"

    def __reduce__(self) -> tuple[Any, ...]:
        # values only; the receiving process uses its own registry singleton
        return (RunConfig, (dict(self.values),))

    def to_dict(self) -> dict[str, Any]:
        """Plain YAML/JSON-ready copy: tuples become lists."""
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self.values.items()}

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    def with_overrides(self, overrides: Mapping[str, Any]) -> RunConfig:
        """A new config with *overrides* applied, validated like a file."""
        values = _resolve(self.values, overrides, self._registry, "overrides")
        return RunConfig(values, self._registry)

    def section(self, section: Section | str) -> dict[str, ConfigValue]:
        return {k: self.values[k] for k in self._registry.in_section(section)}

    # ── Persistence ───────────────────────────────────────────────────────────

    def snapshot(self, directory: str | Path) -> Path:
        """
        Write ``resolved_config.yaml`` into *directory*.

        The file is itself a valid run config; its first line records the hash.
        """
        path = Path(directory) / SNAPSHOT_NAME
        path.parent.mkdir(parents=True, exist_ok=True)
        body = yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)
        path.write_text(f"# config_hash: {self.hash}\n{body}")
        return path

    # ── Builders ──────────────────────────────────────────────────────────────

    def dataset_config(self) -> DatasetConfig:
        v = self.values
        try:
            ranges = PoseRanges(
                azimuth=_radians_pair("azimuth_range_deg", v["azimuth_range_deg"]),
                elevation=_radians_pair("elevation_range_deg", v["elevation_range_deg"]),
                inplane=_radians_pair("inplane_range_deg", v["inplane_range_deg"]),
            )
            return DatasetConfig(
                categories=v["categories"],  # type: ignore[arg-type]
                samples_per_category=v["samples_per_category"],  # type: ignore[arg-type]
                resolution=v["resolution"],  # type: ignore[arg-type]
                n_points=v["n_points"],  # type: ignore[arg-type]
                noise_std=v["noise_std"],  # type: ignore[arg-type]
                split_mode=v["split_mode"],  # type: ignore[arg-type]
                unseen_categories=v["unseen_categories"],  # type: ignore[arg-type]
                few_shot_k=v["few_shot_k"],  # type: ignore[arg-type]
                val_fraction=v["val_fraction"],  # type: ignore[arg-type]
                master_seed=v["master_seed"],  # type: ignore[arg-type]
                pose_ranges=ranges,
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def encoder_config(self) -> EncoderConfig:
        fields = self.section(Section.ENCODER)
        return EncoderConfig(
            resolution=self.values["resolution"],  # type: ignore[arg-type]
            n_points=self.values["n_points"],  # type: ignore[arg-type]
            **fields,  # type: ignore[arg-type]
        )

    def loss_weights(self) -> LossWeights:
        return LossWeights(**self.section(Section.WEIGHTS))  # type: ignore[arg-type]

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(
                weights=self.loss_weights(),
                **self.section(Section.TRAIN),  # type: ignore[arg-type]
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def _radians_pair(key: str, value: ConfigValue) -> tuple[float, float]:
    if not isinstance(value, tuple) or len(value) != 2:
        raise ConfigError(f"{key} must be a [lo, hi] pair, got {value!r}")
    lo, hi = (float(x) for x in value)
    return (math.radians(lo), math.radians(hi))


def load_run_config(
    path: str | Path | None = None,
    overrides: Mapping[str, Any] | None = None,
    *,
    registry: ConfigRegistry | None = None,
) -> RunConfig:
    """
    Resolve defaults ← *path* ← *overrides* into a RunConfig.

    Raises
    ------
    ConfigError
        If the file is missing, unparseable or not a mapping, or names an
        unknown key or a value of the wrong type. The message names the
        file and every offending key.
    """
    reg = registry or get_registry()
    values = reg.defaults()
    if path is not None:
        p = Path(path)
        try:
            loaded = yaml.safe_load(p.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {p}") from None
        except OSError as exc:
            raise ConfigError(f"cannot read config file {p}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config file {p}: {exc}") from exc
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file {p} must hold a key: value mapping")
        values = _resolve(values, loaded, reg, str(p))
    if overrides:
        values = _resolve(values, overrides, reg, "overrides")
    config = RunConfig(values, reg)
    logger.debug("resolved run config %s", config.hash[:12])
    return config
