"""
Two-stage teacher/student training: schedule, augmentation, strategies,
the shared epoch loop, and resumable checkpoints.
"""

from .augment import apply_augmentation, augmented_batch
from .config import AugmentMode, TrainConfig, decay_epoch, lr_at
from .runs import StrategyRun, run_strategy, summarize_runs
from .stages import (
    BEST_DIR,
    LAST_DIR,
    LOG_NAME,
    DivergenceError,
    TrainLog,
    TrainResult,
    train_stage1_teacher,
    train_stage2_student,
    validation_errors,
)
from .strategy import Strategy

__all__ = [
    # configuration
    "TrainConfig",
    "AugmentMode",
    "lr_at",
    "decay_epoch",
    # augmentation
    "apply_augmentation",
    "augmented_batch",
    # strategies and stages
    "Strategy",
    "TrainResult",
    "DivergenceError",
    "TrainLog",
    "train_stage1_teacher",
    "train_stage2_student",
    "validation_errors",
    "StrategyRun",
    "run_strategy",
    "summarize_runs",
    # artifact names
    "LOG_NAME",
    "BEST_DIR",
    "LAST_DIR",
]
