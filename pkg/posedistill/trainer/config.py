"""Training hyperparameters and the step learning-rate schedule."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any

from posedistill.errors import ConfigError
from posedistill.losses import LossWeights

# lr drops by 10× once 4/5 of the epochs are done
_DECAY_NUM, _DECAY_DEN = 4, 5
_DECAY_DIVISOR = 10.0


class AugmentMode(str, Enum):
    """How a rotation/flip augmentation produces the new image."""

    PIXELS = "pixels"  # flip and rotate the stored raster
    RERENDER = "rerender"  # re-render the procedural shape at the new pose


@dataclass(frozen=True)
class TrainConfig:
    """
    Everything that steers one training run besides the data and topology.

    Defaults are desk-scale: 150 teacher epochs, 90 student epochs and
    batches of 32. Augmentation draws φ uniformly from ±rotation_deg and
    flips with probability flip_prob; it is active in stage 2 and, with
    augment_stage1, in stage 1 too.
    """

    lr0: float = 1e-4
    epochs_stage1: int = 150
    epochs_stage2: int = 90
    batch_size: int = 32
    weights: LossWeights = field(default_factory=LossWeights)
    rotation_deg: float = 15.0
    flip_prob: float = 0.5
    augment_stage1: bool = False
    augment_mode: AugmentMode = AugmentMode.PIXELS
    fewshot_epochs: int = 20
    fewshot_lr_factor: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "augment_mode", AugmentMode(self.augment_mode))
        if not (self.lr0 > 0 and math.isfinite(self.lr0)):
            raise ConfigError(f"lr0 must be a positive finite value, got {self.lr0}")
        for name in ("epochs_stage1", "epochs_stage2", "fewshot_epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.batch_size < 2:
            raise ConfigError(
                f"batch_size must be >= 2 (contrastive terms need negatives), got {self.batch_size}"
            )
        if not 0.0 <= self.rotation_deg <= 180.0:
            raise ConfigError(f"rotation_deg must be in [0, 180], got {self.rotation_deg}")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ConfigError(f"flip_prob must be in [0, 1], got {self.flip_prob}")
        if not 0.0 < self.fewshot_lr_factor <= 1.0:
            raise ConfigError(f"fewshot_lr_factor must be in (0, 1], got {self.fewshot_lr_factor}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")

    @property
    def rotation_rad(self) -> float:
        return math.radians(self.rotation_deg)

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["augment_mode"] = self.augment_mode.value
        return data


def decay_epoch(epochs: int) -> int:
    """First epoch run at the decayed rate: ceil(0.8 · epochs)."""
    return -(-_DECAY_NUM * epochs // _DECAY_DEN)


def lr_at(epoch: int, epochs: int, lr0: float) -> float:
    """
    Learning rate for 0-based *epoch* of a stage lasting *epochs* epochs.

    lr0 before ceil(0.8 · epochs), lr0 / 10 from then on. A one-epoch
    stage never decays.
    """
    if not 0 <= epoch < epochs:
        raise ValueError(f"epoch must be in [0, {epochs}), got {epoch}")
    return lr0 if epoch < decay_epoch(epochs) else lr0 / _DECAY_DIVISOR
