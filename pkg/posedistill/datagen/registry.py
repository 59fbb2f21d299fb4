"""
Shape category registry: loads ``data/categories.yaml`` once at import time,
validates it, and exposes a read-only query API.

The registry is a module-level singleton; call get_registry() to obtain it.
Instantiate CategoryRegistry directly with another data directory to load
a custom table (tests use this to feed corrupted tables).
"""

from __future__ import annotations

from pathlib import Path
from types import MappingProxyType
from typing import Any, cast

import yaml

from .types import REQUIRED_PARAMS, CategoryEntry, ParamRange, ShapeCategory

_DATA_DIR = Path(__file__).parent / "data"
_TABLE = "categories.yaml"


class CategoryRegistry:
    """
    Read-only registry of shape categories and their size ranges.

    ``entries`` is wrapped in MappingProxyType after loading. Every problem
    found in the table is collected and reported in a single ValueError.
    """

    def __init__(self, data_dir: Path = _DATA_DIR) -> None:
        self._data_dir = data_dir
        self.entries: MappingProxyType[ShapeCategory, CategoryEntry]
        self._load()

    # ── Loading ────────────────────────────────────────────────────────────────

    def _load_yaml(self) -> dict[str, Any]:
        path = self._data_dir / _TABLE
        try:
            with open(path) as f:
                return cast(dict[str, Any], yaml.safe_load(f))
        except FileNotFoundError:
            raise FileNotFoundError(f"Category data file not found: {path}") from None
        except yaml.YAMLError as exc:
            raise ValueError(f"Failed to parse category data file {path}: {exc}") from exc

    def _load(self) -> None:
        data = self._load_yaml()
        errors: list[str] = []
        result: dict[ShapeCategory, CategoryEntry] = {}

        for raw in data.get("entries") or []:
            raw_id = raw.get("id")
            try:
                cat = ShapeCategory(raw_id)
            except ValueError:
                errors.append(f"entry {raw_id!r}: not a known shape category")
                continue
            if cat in result:
                errors.append(f"entry {raw_id!r}: duplicate category")
                continue
            params = tuple(
                ParamRange(name=str(p["name"]), min=float(p["min"]), max=float(p["max"]))
                for p in raw.get("params", [])
            )
            result[cat] = CategoryEntry(
                id=cat,
                description=str(raw.get("description", "")).strip(),
                mirror_symmetric=bool(raw.get("mirror_symmetric", False)),
                params=params,
            )

        for cat in ShapeCategory:
            if cat not in result:
                errors.append(f"category {cat.value!r}: no entry in {_TABLE}")
        for cat, entry in result.items():
            self._check_entry(cat, entry, errors)

        if errors:
            raise ValueError(
                f"Category registry validation failed ({len(errors)} error(s)):\n"
                + "\n".join(f"  • {e}" for e in errors)
            )
        self.entries = MappingProxyType(result)

    @staticmethod
    def _check_entry(cat: ShapeCategory, entry: CategoryEntry, errors: list[str]) -> None:
        prefix = f"category {cat.value!r}"
        if entry.param_names != REQUIRED_PARAMS[cat]:
            errors.append(
                f"{prefix}: params must be {list(REQUIRED_PARAMS[cat])}, "
                f"got {list(entry.param_names)}"
            )
        for p in entry.params:
            if p.min <= 0:
                errors.append(f"{prefix}: {p.name} min must be positive, got {p.min}")
            if p.max < p.min:
                errors.append(f"{prefix}: {p.name} max {p.max} is below min {p.min}")

    # ── Queries ───────────────────────────────────────────────────────────────

    def get(self, category: ShapeCategory | str) -> CategoryEntry:
        try:
            return self.entries[ShapeCategory(category)]
        except (KeyError, ValueError):
            raise KeyError(f"No category entry for {category!r}") from None

    def names(self) -> tuple[str, ...]:
        """Category ids in table order."""
        return tuple(c.value for c in self.entries)

    def mirror_symmetric(self, category: ShapeCategory | str) -> bool:
        return self.get(category).mirror_symmetric


# ── Module-level singleton ─────────────────────────────────────────────────────

_registry: CategoryRegistry = CategoryRegistry()


def get_registry() -> CategoryRegistry:
    """Return the module-level registry singleton."""
    return _registry
