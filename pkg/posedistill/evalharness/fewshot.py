"""
Zero-shot and few-shot protocols.

Teacher and student train on seen categories only. The zero-shot score is
the student on unseen-category validation samples. The few-shot score
fine-tunes that student on the k labelled shots per unseen category
(``fewshot_epochs`` epochs at ``fewshot_lr_factor · lr0``) and scores the
same unseen samples.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from posedistill.datagen import Dataset, SplitMode, category_id
from posedistill.errors import ConfigError
from posedistill.models import EncoderConfig, ModelBundle, Role
from posedistill.trainer import (
    Strategy,
    TrainConfig,
    train_stage1_teacher,
    train_stage2_student,
)

from .report import MetricsReport, evaluate

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProtocolIndices:
    """Index sets of a zero/few-shot split, grouped by seen/unseen category."""

    seen_train: np.ndarray
    seen_val: np.ndarray
    shots: np.ndarray
    unseen_val: np.ndarray

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> ProtocolIndices:
        split = dataset.split
        if split.mode is SplitMode.FULLY_SUPERVISED:
            raise ConfigError("zero/few-shot protocols need a zero_shot or few_shot split")
        unseen_ids = [category_id(c) for c in split.unseen]
        unseen_train = np.isin(dataset.categories[split.train], unseen_ids)
        unseen_val = np.isin(dataset.categories[split.val], unseen_ids)
        return cls(
            seen_train=split.train[~unseen_train],
            seen_val=split.val[~unseen_val],
            shots=split.train[unseen_train],
            unseen_val=split.val[unseen_val],
        )


@dataclass(frozen=True)
class FewShotOutcome:
    """Unseen-category reports before and after fine-tuning on the shots."""

    zero_shot: MetricsReport
    few_shot: MetricsReport
    k: int
    bundle: ModelBundle


def run_fewshot(
    dataset: Dataset,
    config: TrainConfig,
    encoder: EncoderConfig,
    *,
    strategy: Strategy | str = Strategy.THREE_D_AUG,
    teacher: ModelBundle | None = None,
    out_dir: str | Path | None = None,
    config_hash: str = "",
) -> FewShotOutcome:
    """
    Run the zero/few-shot protocol on a dataset split in zero_shot or
    few_shot mode.

    *teacher* skips stage 1 with an already trained teacher. With k = 0
    (or a zero_shot split) there are no shots and both reports are the
    zero-shot report.

    Raises
    ------
    ConfigError
        If the split is fully supervised, or the shots are too few to form
        a batch of two.
    """
    strategy = Strategy(strategy)
    if strategy is Strategy.TEACHER:
        raise ConfigError("the few-shot protocol scores a student; use a student strategy")
    parts = ProtocolIndices.from_dataset(dataset)
    k = dataset.split.k or 0
    root = Path(out_dir) if out_dir is not None else None

    def stage_dir(name: str) -> Path | None:
        return root / name if root is not None else None

    if teacher is None and strategy.runs_stage1:
        teacher = train_stage1_teacher(
            dataset,
            config,
            encoder,
            strategy=strategy.stage1_strategy(),
            train_indices=parts.seen_train,
            val_indices=parts.seen_val,
            out_dir=stage_dir("stage1"),
            config_hash=config_hash,
        ).bundle
    student = train_stage2_student(
        dataset,
        config,
        strategy,
        teacher=teacher,
        encoder=encoder,
        train_indices=parts.seen_train,
        val_indices=parts.seen_val,
        out_dir=stage_dir("stage2"),
        config_hash=config_hash,
    ).bundle

    def score(bundle: ModelBundle) -> MetricsReport:
        report = evaluate(
            bundle,
            dataset,
            parts.unseen_val,
            role=Role.STUDENT,
            strategy=strategy.value,
            seed=config.seed,
            config_hash=config_hash,
        )
        return replace(report, split="unseen")

    zero = score(student)
    if parts.shots.size == 0:
        return FewShotOutcome(zero_shot=zero, few_shot=zero, k=k, bundle=student)
    if parts.shots.size < 2:
        raise ConfigError(f"fine-tuning needs at least 2 shots, got {parts.shots.size}")

    logger.info("fine-tuning on %d shots (k=%d)", parts.shots.size, k)
    tuned = train_stage2_student(
        dataset,
        config,
        strategy,
        teacher=student,
        warm_start=True,
        train_indices=parts.shots,
        val_indices=np.array([], dtype=np.int64),
        epochs=config.fewshot_epochs,
        lr0=config.lr0 * config.fewshot_lr_factor,
        out_dir=stage_dir("finetune"),
        config_hash=config_hash,
    ).bundle
    return FewShotOutcome(zero_shot=zero, few_shot=score(tuned), k=k, bundle=tuned)
