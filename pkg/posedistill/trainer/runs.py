"""Full strategy recipes and their per-seed result rows."""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from posedistill.datagen import Dataset
from posedistill.models import EncoderConfig, ModelBundle, Role
from posedistill.posemath import acc30, mederr

from .config import TrainConfig
from .stages import TrainResult, train_stage1_teacher, train_stage2_student, validation_errors
from .strategy import Strategy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StrategyRun:
    """One (strategy, seed) outcome scored on the dataset's validation split."""

    strategy: Strategy
    seed: int
    acc30: float
    mederr: float
    role: Role
    bundle: ModelBundle

    def row(self) -> dict[str, object]:
        return {
            "strategy": self.strategy.value,
            "seed": self.seed,
            "acc30": self.acc30,
            "mederr": self.mederr,
        }


def run_strategy(
    strategy: Strategy | str,
    dataset: Dataset,
    config: TrainConfig,
    encoder: EncoderConfig,
    *,
    out_dir: str | Path | None = None,
    resume: bool = False,
    config_hash: str = "",
) -> StrategyRun:
    """
    Run every stage of *strategy* and score the final network on val.

    Stage outputs go to ``<out_dir>/stage1`` and ``<out_dir>/stage2``.
    ``teacher`` is scored with its point clouds; every other strategy
    scores the student from images alone.
    """
    strategy = Strategy(strategy)
    root = Path(out_dir) if out_dir is not None else None

    def stage_dir(name: str) -> Path | None:
        return root / name if root is not None else None

    result: TrainResult | None = None
    teacher: ModelBundle | None = None
    if strategy.runs_stage1:
        result = train_stage1_teacher(
            dataset,
            config,
            encoder,
            strategy=strategy.stage1_strategy(),
            out_dir=stage_dir("stage1"),
            resume=resume,
            config_hash=config_hash,
        )
        teacher = result.bundle
    if strategy.runs_stage2:
        result = train_stage2_student(
            dataset,
            config,
            strategy,
            teacher=teacher,
            encoder=encoder,
            out_dir=stage_dir("stage2"),
            resume=resume,
            config_hash=config_hash,
        )
    assert result is not None

    role = Role.TEACHER if strategy is Strategy.TEACHER else Role.STUDENT
    errors = validation_errors(result.bundle, dataset, dataset.split.val, role)
    run = StrategyRun(
        strategy=strategy,
        seed=config.seed,
        acc30=acc30(errors),
        mederr=mederr(errors),
        role=role,
        bundle=result.bundle,
    )
    logger.info(
        "%s seed %d: acc30=%.3f mederr=%.1f°", strategy.value, run.seed, run.acc30, run.mederr
    )
    return run


def summarize_runs(runs: Iterable[StrategyRun]) -> dict[str, dict[str, float]]:
    """Per-strategy mean and median Acc30/MedErr across seeds, in first-seen order."""
    grouped: dict[str, list[StrategyRun]] = {}
    for run in runs:
        grouped.setdefault(run.strategy.value, []).append(run)
    summary: dict[str, dict[str, float]] = {}
    for name, items in grouped.items():
        accs = np.array([r.acc30 for r in items])
        meds = np.array([r.mederr for r in items])
        summary[name] = {
            "seeds": float(len(items)),
            "acc30_mean": float(accs.mean()),
            "acc30_median": float(np.median(accs)),
            "mederr_mean": float(meds.mean()),
            "mederr_median": float(np.median(meds)),
        }
    return summary
