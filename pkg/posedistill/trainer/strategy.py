"""Training strategies: which networks train in which stage, under which losses."""

from __future__ import annotations

import dataclasses
from enum import Enum

from posedistill.errors import ConfigError
from posedistill.losses import EmbeddingMatch, LossWeights


class Strategy(str, Enum):
    """
    TEACHER      stage 1 only; the 3D-augmented teacher is the model.
    BASELINE     stage 2 only; the student with the pose loss alone.
    THREE_D_AUG  stage 1 teacher, then a frozen-teacher student with pose,
                 embedding KL and output KL.
    ONE_SIDE_CL  as THREE_D_AUG, but z_s is pulled to the frozen h_t by
                 InfoNCE instead of the embedding KL.
    JOINT_CL     teacher and student trained together in stage 1 with
                 InfoNCE(z_s, h_t), then the student fine-tuned on pose and
                 output KL.
    """

    TEACHER = "teacher"
    BASELINE = "baseline"
    THREE_D_AUG = "3daug"
    ONE_SIDE_CL = "onesidecl"
    JOINT_CL = "jointcl"

    @property
    def runs_stage1(self) -> bool:
        return self in (Strategy.TEACHER, Strategy.THREE_D_AUG, Strategy.ONE_SIDE_CL, Strategy.JOINT_CL)

    @property
    def runs_stage2(self) -> bool:
        return self is not Strategy.TEACHER

    @property
    def trains_student_in_stage1(self) -> bool:
        return self is Strategy.JOINT_CL

    @property
    def needs_teacher(self) -> bool:
        """Whether stage 2 needs a trained teacher checkpoint."""
        return self.runs_stage2 and self is not Strategy.BASELINE

    @property
    def embedding_match(self) -> EmbeddingMatch:
        return EmbeddingMatch.INFONCE if self is Strategy.ONE_SIDE_CL else EmbeddingMatch.KL

    def stage1_strategy(self) -> Strategy:
        """Recipe used for this strategy's stage 1."""
        return Strategy.JOINT_CL if self is Strategy.JOINT_CL else Strategy.TEACHER

    def stage2_weights(self, weights: LossWeights) -> LossWeights:
        """Student-stage weights with the terms this strategy does not use zeroed."""
        if self is Strategy.BASELINE:
            return dataclasses.replace(weights, omega2=0.0, omega3=0.0)
        if self is Strategy.JOINT_CL:
            return dataclasses.replace(weights, omega2=0.0)
        return weights

    def check_stage(self, stage: int) -> None:
        """
        Raise ConfigError unless *stage* can be run directly with this strategy.

        3daug and onesidecl share the ``teacher`` recipe for stage 1, so
        only ``teacher`` and ``jointcl`` name a stage-1 run.
        """
        if stage == 1:
            ok = self in (Strategy.TEACHER, Strategy.JOINT_CL)
        else:
            ok = stage == 2 and self.runs_stage2
        if not ok:
            raise ConfigError(f"strategy {self.value!r} has no stage {stage} of its own")
