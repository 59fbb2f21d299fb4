"""
Configuration key registry: loads ``data/defaults.yaml`` once at import
time, validates it, and coerces user values to the declared types.

The registry is a module-level singleton; call get_registry() to obtain it.
Instantiate ConfigRegistry directly with another data directory to load a
custom table.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from types import MappingProxyType
from typing import Any, cast

import yaml

_DATA_DIR = Path(__file__).parent / "data"
_TABLE = "defaults.yaml"


class Section(str, Enum):
    """Which builder consumes a key."""

    DATASET = "dataset"
    SPLIT = "split"
    ENCODER = "encoder"
    TRAIN = "train"
    WEIGHTS = "weights"


class ValueType(str, Enum):
    INT = "int"
    FLOAT = "float"
    BOOL = "bool"
    STR = "str"
    INT_LIST = "int_list"
    FLOAT_LIST = "float_list"
    STR_LIST = "str_list"


# Resolved values: scalars, or tuples for the list types.
ConfigValue = int | float | bool | str | tuple[int, ...] | tuple[float, ...] | tuple[str, ...]


def _scalar(kind: ValueType, value: Any) -> int | float | bool | str:
    if kind is ValueType.BOOL:
        if isinstance(value, bool):
            return value
    elif kind is ValueType.INT:
        if isinstance(value, int) and not isinstance(value, bool):
            return value
    elif kind is ValueType.FLOAT:
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            return float(value)
        # YAML 1.1 reads "1e-4" (no dot) as a string
        if isinstance(value, str):
            try:
                return float(value)
            except ValueError:
                pass
    elif isinstance(value, str):
        return value
    raise TypeError(f"expected {kind.value}, got {value!r}")


def coerce(kind: ValueType, value: Any) -> ConfigValue:
    """
    Convert a YAML value to *kind*.

    Ints are accepted where floats are expected; nothing else is converted
    implicitly (``true`` is not an int, ``"3"`` is not an int).

    Raises
    ------
    TypeError
        If *value* does not fit *kind*.
    """
    if kind in (ValueType.INT_LIST, ValueType.FLOAT_LIST, ValueType.STR_LIST):
        if not isinstance(value, (list, tuple)):
            raise TypeError(f"expected {kind.value}, got {value!r}")
        element = ValueType(kind.value.removesuffix("_list"))
        return tuple(_scalar(element, v) for v in value)  # type: ignore[return-value]
    return _scalar(kind, value)


@dataclass(frozen=True)
class ConfigKey:
    """One entry of the defaults table."""

    key: str
    section: Section
    type: ValueType
    default: ConfigValue
    description: str = ""


class ConfigRegistry:
    """
    Read-only table of every run-configuration key.

    ``keys`` is wrapped in MappingProxyType after loading and keeps table
    order. Every problem found in the table is collected and reported in a
    single ValueError.
    """

    def __init__(self, data_dir: Path = _DATA_DIR) -> None:
        self._data_dir = data_dir
        self.keys: MappingProxyType[str, ConfigKey]
        self._load()

    # ── Loading ────────────────────────────────────────────────────────────────

    def _load_yaml(self) -> dict[str, Any]:
        path = self._data_dir / _TABLE
        try:
            with open(path) as f:
                return cast(dict[str, Any], yaml.safe_load(f))
        except FileNotFoundError:
            raise FileNotFoundError(f"Config defaults file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ValueError(f"Failed to parse config defaults file {path}: {exc}") from exc

    def _load(self) -> None:
        data = self._load_yaml()
        errors: list[str] = []
        result: dict[str, ConfigKey] = {}

        for raw in data.get("keys") or []:
            name = str(raw.get("key", ""))
            if not name:
                errors.append(f"entry {raw!r}: missing key name")
                continue
            if name in result:
                errors.append(f"key {name!r}: duplicate entry")
                continue
            try:
                section = Section(raw.get("section"))
            except ValueError:
                errors.append(f"key {name!r}: unknown section {raw.get('section')!r}")
                continue
            try:
                kind = ValueType(raw.get("type"))
            except ValueError:
                errors.append(f"key {name!r}: unknown type {raw.get('type')!r}")
                continue
            try:
                default = coerce(kind, raw.get("default"))
            except TypeError as exc:
                errors.append(f"key {name!r}: default {exc}")
                continue
            result[name] = ConfigKey(
                key=name,
                section=section,
                type=kind,
                default=default,
                description=str(raw.get("description", "")).strip(),
            )

        if errors:
            raise ValueError(
                f"Config registry validation failed ({len(errors)} error(s)):\n"
                + "\n".join(f"  • {e}" for e in errors)
            )
        self.keys = MappingProxyType(result)

    # ── Queries ───────────────────────────────────────────────────────────────

    def get(self, key: str) -> ConfigKey:
        try:
            return self.keys[key]
        except KeyError:
            raise KeyError(f"No config key {key!r}") from None

    def defaults(self) -> dict[str, ConfigValue]:
        return {name: entry.default for name, entry in self.keys.items()}

    def in_section(self, section: Section | str) -> tuple[str, ...]:
        wanted = Section(section)
        return tuple(name for name, entry in self.keys.items() if entry.section is wanted)


# ── Module-level singleton ─────────────────────────────────────────────────────

_registry: ConfigRegistry = ConfigRegistry()


def get_registry() -> ConfigRegistry:
    """Return the module-level registry singleton."""
    return _registry
