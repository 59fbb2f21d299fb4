"""
Two-stage training.

Stage 1 trains the teacher on pose + contrastive losses (with the student
alongside for the joint strategy). Stage 2 freezes the teacher and trains
the student from images only. Both stages run the same epoch loop:

  1. shuffle the training indices          → batches of ≥ 2 samples
  2. augment (stage 2, or stage 1 by flag)  → images + consistent poses
  3. forward + loss on a fresh tape         → LossBreakdown
  4. backward + Adam at lr_at(epoch)        → DivergenceError on NaN/Inf
  5. validate, keep the best epoch          → Acc30, MedErr as tie-break
  6. append to train.log.jsonl, checkpoint  → ``last/`` and ``checkpoint/``

A run is single-threaded and deterministic: identical data, config and
seed give bitwise-identical parameters, and resuming from ``last/``
continues the same trajectory.
"""

from __future__ import annotations

import json
import logging
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from posedistill.datagen import Dataset
from posedistill.diffmath import NonFiniteError, ParamStore, Tape, adam_step, backward
from posedistill.errors import CheckpointError, ConfigError, NumericalError
from posedistill.losses import (
    EmbeddingMatch,
    LossBreakdown,
    PoseTargets,
    joint_loss,
    student_loss,
    teacher_loss,
)
from posedistill.models import EncoderConfig, ModelBundle, Role, predict_poses
from posedistill.posemath import EulerPose, acc30, mederr, pose_error_deg

from .augment import augmented_batch
from .config import TrainConfig, lr_at
from .strategy import Strategy

logger = logging.getLogger(__name__)

LOG_NAME = "train.log.jsonl"
BEST_DIR = "checkpoint"
LAST_DIR = "last"

_SHUFFLE_STREAM = 2
_AUGMENT_STREAM = 3

_Step = Callable[[ModelBundle, Tape, np.ndarray, np.ndarray, PoseTargets], LossBreakdown]


class DivergenceError(NumericalError):
    """A loss or gradient became non-finite.

    Attributes:
        stage: ``"stage1"`` or ``"stage2"``.
        epoch: 0-based epoch of the failing step.
        batch_indices: Dataset indices of the offending batch.
    """

    def __init__(self, stage: str, epoch: int, batch_indices: Sequence[int], detail: str) -> None:
        super().__init__(f"[{stage}] epoch {epoch}: {detail}")
        self.stage = stage
        self.epoch = epoch
        self.batch_indices = tuple(int(i) for i in batch_indices)
        self.detail = detail


@dataclass(frozen=True)
class TrainResult:
    """One finished stage: the bundle restored to its best epoch, plus the epoch records."""

    bundle: ModelBundle
    stage: int
    strategy: Strategy
    best_epoch: int
    best_acc30: float | None
    best_mederr: float | None
    history: tuple[dict[str, Any], ...]

    @property
    def lr_trace(self) -> list[float]:
        return [float(r["lr"]) for r in self.history]


# ── Helpers ───────────────────────────────────────────────────────────────────


def validation_errors(
    bundle: ModelBundle, dataset: Dataset, indices: np.ndarray, role: Role | str
) -> np.ndarray:
    """Geodesic error in degrees of each prediction for *indices*, in order."""
    idx = np.asarray(indices, dtype=np.int64)
    preds = predict_poses(bundle, dataset.images[idx], dataset.clouds[idx], role=role)
    return np.array(
        [pose_error_deg(EulerPose.from_array(p), dataset.pose(int(i))) for p, i in zip(preds, idx)],
        dtype=np.float64,
    )


def _batches(order: np.ndarray, size: int) -> list[np.ndarray]:
    """Consecutive chunks of *order*; a trailing single sample joins the previous chunk."""
    chunks = [order[i : i + size] for i in range(0, len(order), size)]
    if len(chunks) > 1 and len(chunks[-1]) < 2:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return chunks


def _improves(acc: float, med: float, best: dict[str, Any] | None) -> bool:
    if best is None:
        return True
    return acc > best["acc30"] or (acc == best["acc30"] and med < best["mederr"])


@dataclass(frozen=True)
class _Snapshot:
    values: dict[str, np.ndarray]
    buffers: dict[str, np.ndarray]

    @classmethod
    def capture(cls, store: ParamStore) -> _Snapshot:
        return cls(
            values=store.snapshot(),
            buffers={n: store.buffer(n).copy() for n in store.buffer_names},
        )

    def restore(self, store: ParamStore) -> None:
        for name, value in self.values.items():
            store.set_value(name, value)
        for name, value in self.buffers.items():
            store.buffer(name)[...] = value


class TrainLog:
    """Append-only JSON-lines log, one object per epoch."""

    def __init__(self, path: str | Path) -> None:
        self.path = Path(path)

    def append(self, record: dict[str, Any]) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, sort_keys=True) + "\n")

    def records(self) -> list[dict[str, Any]]:
        if not self.path.exists():
            return []
        return [json.loads(line) for line in self.path.read_text().splitlines() if line.strip()]


# ── Epoch loop ────────────────────────────────────────────────────────────────


@dataclass(frozen=True)
class _StagePlan:
    stage: int
    strategy: Strategy
    kind: str  # checkpoint kind: "teacher" or "student"
    role: Role  # network scored on validation
    epochs: int
    lr0: float
    augment: bool
    train_indices: np.ndarray
    val_indices: np.ndarray


def _header(
    plan: _StagePlan,
    config: TrainConfig,
    config_hash: str,
    epoch: int,
    history: list[dict[str, Any]],
    best: dict[str, Any] | None,
    rngs: dict[str, Any],
) -> dict[str, Any]:
    return {
        "kind": plan.kind,
        "stage": plan.stage,
        "strategy": plan.strategy.value,
        "epoch": epoch,
        "config_hash": config_hash,
        "train_config": config.to_dict(),
        "history": history,
        "best": best,
        "rng": rngs,
    }


def _run_stage(
    bundle: ModelBundle,
    dataset: Dataset,
    config: TrainConfig,
    plan: _StagePlan,
    step: _Step,
    *,
    out_dir: str | Path | None,
    resume: bool,
    config_hash: str,
) -> TrainResult:
    stage_name = f"stage{plan.stage}"
    if len(plan.train_indices) < 2:
        raise ConfigError(
            f"{stage_name}: training needs at least 2 samples, got {len(plan.train_indices)}"
        )
    bundle.check_compatible(dataset.resolution, dataset.n_points)

    shuffle_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(_SHUFFLE_STREAM, plan.stage))
    )
    augment_rng = np.random.default_rng(
        np.random.SeedSequence(config.seed, spawn_key=(_AUGMENT_STREAM, plan.stage))
    )
    out = Path(out_dir) if out_dir is not None else None
    log = TrainLog(out / LOG_NAME) if out is not None else None

    start = 0
    history: list[dict[str, Any]] = []
    best: dict[str, Any] | None = None
    snapshot: _Snapshot | None = None

    if out is not None and resume and (out / LAST_DIR).is_dir():
        bundle, header = ModelBundle.load(out / LAST_DIR)
        for key, expected in (
            ("stage", plan.stage),
            ("strategy", plan.strategy.value),
            ("config_hash", config_hash),
        ):
            if header.get(key) != expected:
                raise CheckpointError(
                    f"cannot resume from {out / LAST_DIR}: {key} is {header.get(key)!r}, "
                    f"this run has {expected!r}"
                )
        shuffle_rng.bit_generator.state = header["rng"]["shuffle"]
        augment_rng.bit_generator.state = header["rng"]["augment"]
        start = int(header["epoch"]) + 1
        history = list(header["history"])
        best = header["best"]
        if best is not None:
            snapshot = _Snapshot.capture(ModelBundle.load(out / BEST_DIR)[0].store)
        logger.info("%s: resuming %s at epoch %d", stage_name, plan.strategy.value, start)

    for epoch in range(start, plan.epochs):
        lr = lr_at(epoch, plan.epochs, plan.lr0)
        order = shuffle_rng.permutation(plan.train_indices)
        batches = _batches(order, config.batch_size)
        total = 0.0
        sums: dict[str, float] = {}
        for batch in batches:
            if plan.augment:
                images, poses = augmented_batch(dataset, batch, augment_rng, config)
            else:
                images, poses = dataset.images[batch], dataset.poses[batch]
            targets = PoseTargets.from_poses(poses, bundle.config.bin_spec)
            tape = Tape()
            detail = ""
            try:
                loss = step(bundle, tape, images, dataset.clouds[batch], targets)
                grads = backward(tape, loss.total)
            except NonFiniteError as exc:
                detail = str(exc)
            else:
                if not all(np.isfinite(g).all() for g in grads.values()):
                    detail = "non-finite gradient"
            if detail:
                if log is not None:
                    log.append({
                        "stage": plan.stage,
                        "epoch": epoch,
                        "diverged": True,
                        "batch_indices": [int(i) for i in batch],
                    })
                raise DivergenceError(stage_name, epoch, batch, detail)
            adam_step(bundle.store, grads, lr)
            total += loss.value
            for name, value in loss.terms.items():
                sums[name] = sums.get(name, 0.0) + value

        record: dict[str, Any] = {
            "stage": plan.stage,
            "strategy": plan.strategy.value,
            "epoch": epoch,
            "lr": lr,
            "loss": total / len(batches),
            **{f"loss_{name}": value / len(batches) for name, value in sums.items()},
        }
        improved = False
        if len(plan.val_indices):
            errors = validation_errors(bundle, dataset, plan.val_indices, plan.role)
            acc, med = acc30(errors), mederr(errors)
            record["val_acc30"], record["val_mederr"] = acc, med
            if _improves(acc, med, best):
                best = {"epoch": epoch, "acc30": acc, "mederr": med}
                snapshot = _Snapshot.capture(bundle.store)
                improved = True
        history.append(record)
        logger.info(
            "%s %s epoch %d/%d  lr=%.2e  loss=%.4f%s",
            stage_name,
            plan.strategy.value,
            epoch + 1,
            plan.epochs,
            lr,
            record["loss"],
            f"  acc30={record['val_acc30']:.3f}" if "val_acc30" in record else "",
        )

        if out is not None:
            assert log is not None
            log.append(record)
            rngs = {
                "shuffle": shuffle_rng.bit_generator.state,
                "augment": augment_rng.bit_generator.state,
            }
            header = _header(plan, config, config_hash, epoch, history, best, rngs)
            if improved:
                bundle.save(out / BEST_DIR, header)
            bundle.save(out / LAST_DIR, header)

    if snapshot is not None:
        snapshot.restore(bundle.store)
    best_epoch = best["epoch"] if best is not None else plan.epochs - 1
    if out is not None:
        final = _header(plan, config, config_hash, plan.epochs - 1, history, best, {})
        bundle.save(out / BEST_DIR, {**final, "best_epoch": best_epoch})

    return TrainResult(
        bundle=bundle,
        stage=plan.stage,
        strategy=plan.strategy,
        best_epoch=best_epoch,
        best_acc30=None if best is None else best["acc30"],
        best_mederr=None if best is None else best["mederr"],
        history=tuple(history),
    )


# ── Stages ────────────────────────────────────────────────────────────────────


def _indices(given: np.ndarray | None, default: np.ndarray) -> np.ndarray:
    return default if given is None else np.asarray(given, dtype=np.int64)


def train_stage1_teacher(
    dataset: Dataset,
    config: TrainConfig,
    encoder: EncoderConfig,
    *,
    strategy: Strategy | str = Strategy.TEACHER,
    train_indices: np.ndarray | None = None,
    val_indices: np.ndarray | None = None,
    out_dir: str | Path | None = None,
    resume: bool = False,
    config_hash: str = "",
) -> TrainResult:
    """
    Train the teacher (pose + InfoNCE(z_t, h_t)) over every teacher group.

    With ``Strategy.JOINT_CL`` the student trains too, on the joint
    objective pose_t + pose_s + InfoNCE(z_s, h_t). Validation scores the
    teacher.

    Raises
    ------
    ConfigError
        If *strategy* has no stage-1 recipe of its own.
    DivergenceError
        If a loss or gradient becomes non-finite.
    """
    strategy = Strategy(strategy)
    strategy.check_stage(1)
    bundle = ModelBundle.create(encoder, config.seed)
    spec = encoder.bin_spec
    weights = config.weights

    if strategy.trains_student_in_stage1:

        def step(b: ModelBundle, tape: Tape, images: np.ndarray, clouds: np.ndarray,
                 targets: PoseTargets) -> LossBreakdown:
            params = b.bind(tape)
            teacher = b.teacher_forward(params, images, clouds)
            student = b.student_forward(params, images, training=True)
            return joint_loss(teacher, student, targets, weights, spec)

    else:
        bundle.freeze("student")

        def step(b: ModelBundle, tape: Tape, images: np.ndarray, clouds: np.ndarray,
                 targets: PoseTargets) -> LossBreakdown:
            return teacher_loss(b.teacher_forward(b.bind(tape), images, clouds), targets, weights, spec)

    plan = _StagePlan(
        stage=1,
        strategy=strategy,
        kind="teacher",
        role=Role.TEACHER,
        epochs=config.epochs_stage1,
        lr0=config.lr0,
        augment=config.augment_stage1,
        train_indices=_indices(train_indices, dataset.split.train),
        val_indices=_indices(val_indices, dataset.split.val),
    )
    logger.info("stage 1 (%s): %d training samples", strategy.value, len(plan.train_indices))
    return _run_stage(
        bundle, dataset, config, plan, step, out_dir=out_dir, resume=resume, config_hash=config_hash
    )


def train_stage2_student(
    dataset: Dataset,
    config: TrainConfig,
    strategy: Strategy | str,
    *,
    teacher: ModelBundle | None = None,
    encoder: EncoderConfig | None = None,
    warm_start: bool = False,
    train_indices: np.ndarray | None = None,
    val_indices: np.ndarray | None = None,
    epochs: int | None = None,
    lr0: float | None = None,
    out_dir: str | Path | None = None,
    resume: bool = False,
    config_hash: str = "",
) -> TrainResult:
    """
    Train the student against a frozen teacher.

    The teacher's parameters (Contrastive Learner included) are copied from
    *teacher* and frozen; its forward has no batch-dependent statistics, so
    distillation targets do not depend on batch composition. The student
    starts fresh from ``config.seed`` unless *warm_start* (always for
    ``JOINT_CL``) copies the student from *teacher*'s bundle too.

    *train_indices*, *val_indices*, *epochs* and *lr0* override the
    dataset split and the config, for fine-tuning schedules. An empty
    *val_indices* disables best-epoch selection: the last epoch is kept.

    Raises
    ------
    ConfigError
        If *strategy* has no stage 2, or needs a teacher and none is given.
    CheckpointError
        If the teacher's topology does not fit the dataset.
    DivergenceError
        If a loss or gradient becomes non-finite.
    """
    strategy = Strategy(strategy)
    strategy.check_stage(2)
    if strategy.needs_teacher and teacher is None:
        raise ConfigError(f"strategy {strategy.value!r} needs a trained teacher checkpoint")
    topology = teacher.config if teacher is not None else encoder
    if topology is None:
        raise ConfigError("stage 2 needs a teacher bundle or an encoder configuration")

    bundle = ModelBundle.create(topology, config.seed)
    if teacher is not None:
        teacher.check_compatible(dataset.resolution, dataset.n_points)
        bundle.adopt(teacher, "teacher")
        if warm_start or strategy is Strategy.JOINT_CL:
            bundle.adopt(teacher, "student")
    bundle.freeze("teacher")

    spec = topology.bin_spec
    weights = strategy.stage2_weights(config.weights)
    match = strategy.embedding_match
    uses_teacher = weights.omega2 > 0 or weights.omega3 > 0

    def step(b: ModelBundle, tape: Tape, images: np.ndarray, clouds: np.ndarray,
             targets: PoseTargets) -> LossBreakdown:
        params = b.bind(tape)
        student = b.student_forward(params, images, training=True)
        if not uses_teacher:
            return student_loss(student, targets, weights, spec=spec)
        frozen = b.teacher_forward(params, images, clouds)
        bridge = frozen.h_t if match is EmbeddingMatch.INFONCE else frozen.z_t
        return student_loss(
            student,
            targets,
            weights,
            bridge=bridge,
            teacher_logits=frozen.heads.logits,
            match=match,
            spec=spec,
        )

    plan = _StagePlan(
        stage=2,
        strategy=strategy,
        kind="student",
        role=Role.STUDENT,
        epochs=config.epochs_stage2 if epochs is None else epochs,
        lr0=config.lr0 if lr0 is None else lr0,
        augment=True,
        train_indices=_indices(train_indices, dataset.split.train),
        val_indices=_indices(val_indices, dataset.split.val),
    )
    logger.info("stage 2 (%s): %d training samples", strategy.value, len(plan.train_indices))
    return _run_stage(
        bundle, dataset, config, plan, step, out_dir=out_dir, resume=resume, config_hash=config_hash
    )
