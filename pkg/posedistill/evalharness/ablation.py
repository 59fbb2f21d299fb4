"""
Ablation sweeps over strategies, loss terms, augmentation and student width.

Every entry is one strategy plus one set of flat config overrides. Each
(entry, seed) cell trains into ``<out>/<entry>/seed-<s>/`` and leaves a
``metrics.json``; cells that already have one are read back instead of
retrained, and half-finished cells resume from their last checkpoints.
"""

from __future__ import annotations

import csv
import logging
import re
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Any

import numpy as np

from posedistill.config import RunConfig, get_registry
from posedistill.datagen import Dataset
from posedistill.errors import ConfigError
from posedistill.models import Role
from posedistill.trainer import Strategy, run_strategy

from .report import METRICS_NAME, MetricsReport, evaluate

logger = logging.getLogger(__name__)

ABLATION_CSV = "ablation.csv"
CSV_HEADER = ("configuration", "seed", "acc30", "mederr")
SUMMARY_CSV = "ablation_summary.csv"
SUMMARY_HEADER = (
    "configuration",
    "seeds",
    "acc30_mean",
    "acc30_median",
    "mederr_mean",
    "mederr_median",
)

_NAME_PATTERN = re.compile(r"^[a-z0-9+\-][a-z0-9+\-_]*$")


@dataclass(frozen=True)
class AblationEntry:
    """One row group of the ablation table."""

    name: str
    strategy: Strategy
    overrides: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not _NAME_PATTERN.match(self.name):
            raise ConfigError(f"ablation name must match {_NAME_PATTERN.pattern}, got {self.name!r}")
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        registry = get_registry()
        unknown = sorted(k for k in self.overrides if k not in registry.keys)
        if unknown:
            raise ConfigError(f"ablation {self.name!r}: unknown config keys {unknown}")
        if "seed" in self.overrides:
            raise ConfigError(f"ablation {self.name!r}: seeds come from AblationSpec.seeds, not overrides")
        object.__setattr__(self, "overrides", MappingProxyType(dict(self.overrides)))

    def __reduce__(self) -> tuple[Any, ...]:
        return (AblationEntry, (self.name, self.strategy, dict(self.overrides)))

    def resolve(self, base: RunConfig, seed: int) -> RunConfig:
        return base.with_overrides({**self.overrides, "seed": seed})


@dataclass(frozen=True)
class AblationSpec:
    entries: tuple[AblationEntry, ...]
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)

    def __post_init__(self) -> None:
        object.__setattr__(self, "entries", tuple(self.entries))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        if not self.entries:
            raise ConfigError("ablation spec needs at least one entry")
        if not self.seeds:
            raise ConfigError("ablation spec needs at least one seed")
        names = [e.name for e in self.entries]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ConfigError(f"duplicate ablation names: {dupes}")
        if len(set(self.seeds)) != len(self.seeds) or min(self.seeds) < 0:
            raise ConfigError(f"seeds must be distinct and >= 0, got {list(self.seeds)}")


def student_variants(base: RunConfig) -> dict[str, dict[str, Any]]:
    """
    Student encoder overrides derived from *base*: ``student-wide`` doubles
    every hidden width, ``student-shallow`` drops the hidden layers so the
    image encoder and head are single layers.
    """
    hidden = tuple(base["student_image_hidden"])  # type: ignore[arg-type]
    head = tuple(base["student_head"])  # type: ignore[arg-type]
    return {
        "student-wide": {
            "student_image_hidden": [2 * w for w in hidden],
            "student_head": [2 * w for w in head[:-1]] + [head[-1]],
        },
        "student-shallow": {
            "student_image_hidden": [],
            "student_head": [head[-1]],
        },
    }


def default_ablation_spec(base: RunConfig, seeds: Sequence[int] = (0, 1, 2, 3, 4)) -> AblationSpec:
    """
    The five strategies (``3daug`` is the full method) followed by the
    component ablations of the full method.
    """
    entries = [AblationEntry(s.value, s) for s in Strategy]
    entries += [
        AblationEntry("-cl+kl", Strategy.THREE_D_AUG, {"omega2": 0.0}),
        AblationEntry("-kd", Strategy.THREE_D_AUG, {"omega3": 0.0}),
        AblationEntry("-augmentation", Strategy.THREE_D_AUG, {"rotation_deg": 0.0, "flip_prob": 0.0}),
    ]
    entries += [
        AblationEntry(name, Strategy.THREE_D_AUG, overrides)
        for name, overrides in student_variants(base).items()
    ]
    return AblationSpec(tuple(entries), tuple(seeds))


@dataclass(frozen=True)
class AblationCell:
    configuration: str
    seed: int
    report: MetricsReport


@dataclass(frozen=True)
class AblationTable:
    """Per-seed cells in spec order, plus per-configuration aggregates."""

    cells: tuple[AblationCell, ...]

    def configurations(self) -> list[str]:
        return list(dict.fromkeys(c.configuration for c in self.cells))

    def rows(self, configuration: str) -> list[AblationCell]:
        return [c for c in self.cells if c.configuration == configuration]

    def aggregate(self, configuration: str) -> dict[str, float]:
        cells = self.rows(configuration)
        if not cells:
            raise KeyError(f"no configuration {configuration!r} in table")
        accs = np.array([c.report.acc30 for c in cells])
        meds = np.array([c.report.mederr for c in cells])
        return {
            "acc30_mean": float(accs.mean()),
            "acc30_median": float(np.median(accs)),
            "mederr_mean": float(meds.mean()),
            "mederr_median": float(np.median(meds)),
        }

    def write_csv(self, path: str | Path) -> Path:
        """Write ``configuration,seed,acc30,mederr``, one row per cell."""
        p = Path(path)
        if p.is_dir():
            p = p / ABLATION_CSV
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_HEADER)
            for name in self.configurations():
                for cell in self.rows(name):
                    writer.writerow([name, cell.seed, _fmt(cell.report.acc30), _fmt(cell.report.mederr)])
        return p

    def write_summary(self, path: str | Path) -> Path:
        """Write one row of seed means and medians per configuration."""
        p = Path(path)
        if p.is_dir():
            p = p / SUMMARY_CSV
        p.parent.mkdir(parents=True, exist_ok=True)
        with p.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=SUMMARY_HEADER)
            writer.writeheader()
            for name in self.configurations():
                agg = self.aggregate(name)
                row: dict[str, str | int] = {k: _fmt(v) for k, v in agg.items()}
                writer.writerow({"configuration": name, "seeds": len(self.rows(name)), **row})
        return p


def _fmt(value: float) -> str:
    return f"{value:.6f}"


def cell_dir(out_dir: str | Path, configuration: str, seed: int) -> Path:
    return Path(out_dir) / configuration / f"seed-{seed}"


def _run_cell(
    entry: AblationEntry, seed: int, dataset: Dataset, base: RunConfig, out_dir: Path
) -> MetricsReport:
    directory = cell_dir(out_dir, entry.name, seed)
    metrics = directory / METRICS_NAME
    if metrics.is_file():
        logger.info("%s seed %d: already done, reading %s", entry.name, seed, metrics)
        return MetricsReport.read(metrics)

    cfg = entry.resolve(base, seed)
    cfg.snapshot(directory)
    run = run_strategy(
        entry.strategy,
        dataset,
        cfg.train_config(),
        cfg.encoder_config(),
        out_dir=directory,
        resume=True,
        config_hash=cfg.hash,
    )
    role = Role.TEACHER if entry.strategy is Strategy.TEACHER else Role.STUDENT
    report = evaluate(
        run.bundle,
        dataset,
        "val",
        role=role,
        strategy=entry.strategy.value,
        seed=seed,
        config_hash=cfg.hash,
    )
    report.write(metrics)
    return report


def run_ablation(
    spec: AblationSpec,
    dataset: Dataset,
    base: RunConfig,
    out_dir: str | Path,
    *,
    workers: int = 1,
) -> AblationTable:
    """
    Train and evaluate every (entry, seed) cell, then write ``ablation.csv``
    and ``ablation_summary.csv``.

    Cells are independent runs, so *workers* > 1 spreads them over worker
    processes; the table is the same for any worker count.

    Raises
    ------
    ConfigError
        If an entry's overrides do not resolve against *base*.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # resolve every cell up front so a bad override fails before any training
    for entry in spec.entries:
        entry.resolve(base, spec.seeds[0]).encoder_config()

    jobs = [(entry, seed) for entry in spec.entries for seed in spec.seeds]
    logger.info("ablation: %d cells on %d worker(s)", len(jobs), max(1, workers))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_cell, e, s, dataset, base, out) for e, s in jobs]
            reports = [f.result() for f in futures]
    else:
        reports = [_run_cell(e, s, dataset, base, out) for e, s in jobs]

    table = AblationTable(
        tuple(AblationCell(e.name, s, r) for (e, s), r in zip(jobs, reports, strict=True))
    )
    table.write_csv(out / ABLATION_CSV)
    table.write_summary(out / SUMMARY_CSV)
    return table
