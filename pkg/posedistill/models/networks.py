"""
Teacher, Contrastive Learner and student networks over one shared ParamStore.

Teacher:  x_t = R_t(image)            image MLP
          d_t = P_t(cloud)            per-point MLP, max-pooled over points
          h_t = FC_t([d_t, x_t])      FuseNet, tanh output
          heads(h_t)                  per-angle bin logits and sigmoid offsets
          z_t = G_t(x_t)              projection head; G_t ∘ R_t is the
                                      Contrastive Learner
Student:  x_s = R_s(image)
          h_s = FC_s(x_s)             linear → batch norm → ReLU per layer
          heads(h_s), z_s = G_s(h_s)

Parameter groups are ``teacher.*`` and ``student.*``; freezing a group
binds its parameters as constants and puts its batch norms in eval mode.
"""

from __future__ import annotations

import logging
from collections.abc import Iterable
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from posedistill.diffmath import (
    BoundParams,
    ParamStore,
    ShapeError,
    Tape,
    Tensor,
    concat,
    max_over_axis,
    read_params,
    reshape,
    sigmoid,
    tanh,
    write_params,
)
from posedistill.errors import CheckpointError, ConfigError
from posedistill.posemath import ANGLES

from .config import EncoderConfig
from .layers import init_linear, init_mlp, linear, mlp

logger = logging.getLogger(__name__)

TEACHER_GROUPS: tuple[str, ...] = (
    "teacher.image_encoder",
    "teacher.point_encoder",
    "teacher.fusenet",
    "teacher.pose_head",
    "teacher.projection",
)
STUDENT_GROUPS: tuple[str, ...] = (
    "student.image_encoder",
    "student.head_stack",
    "student.pose_head",
    "student.projection",
)
_ROLE_GROUPS = {"teacher": TEACHER_GROUPS, "student": STUDENT_GROUPS}

_TEACHER_STREAM = 0
_STUDENT_STREAM = 1


@dataclass(frozen=True)
class PoseHeadOutputs:
    """Per-angle (α, β, γ) bin logits (B, n_bins) and offsets in [0, 1]."""

    logits: tuple[Tensor, Tensor, Tensor]
    offsets: tuple[Tensor, Tensor, Tensor]


@dataclass(frozen=True)
class TeacherOutputs:
    x_t: Tensor
    d_t: Tensor
    h_t: Tensor
    z_t: Tensor
    heads: PoseHeadOutputs


@dataclass(frozen=True)
class StudentOutputs:
    x_s: Tensor
    h_s: Tensor
    z_s: Tensor
    heads: PoseHeadOutputs


class ModelBundle:
    """The teacher/student pair: topology, parameters and forward passes."""

    def __init__(self, config: EncoderConfig, store: ParamStore) -> None:
        self.config = config
        self.store = store

    # ── Construction ──────────────────────────────────────────────────────────

    @classmethod
    def create(cls, config: EncoderConfig, seed: int) -> ModelBundle:
        """
        Initialize every parameter from *seed*.

        Teacher and student draw from independent streams, so the student's
        initial weights do not depend on whether a trained teacher is later
        adopted into the bundle.
        """
        store = ParamStore()
        t_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_TEACHER_STREAM,)))
        s_rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(_STUDENT_STREAM,)))
        c, e = config, config.fused_dim

        init_mlp(store, "teacher.image_encoder", c.image_size,
                 (*c.teacher_image_hidden, c.teacher_image_dim), "teacher.image_encoder", t_rng)
        init_mlp(store, "teacher.point_encoder", 3,
                 (*c.point_hidden, c.shape_dim), "teacher.point_encoder", t_rng)
        init_mlp(store, "teacher.fusenet", c.shape_dim + c.teacher_image_dim, c.fusenet,
                 "teacher.fusenet", t_rng, final_gain=1.0)
        _init_pose_head(store, "teacher.pose_head", c, t_rng)
        init_mlp(store, "teacher.projection", c.teacher_image_dim,
                 (*c.teacher_projection_hidden, e), "teacher.projection", t_rng, final_gain=1.0)

        init_mlp(store, "student.image_encoder", c.image_size,
                 (*c.student_image_hidden, c.student_image_dim), "student.image_encoder", s_rng)
        init_mlp(store, "student.head_stack", c.student_image_dim, c.student_head,
                 "student.head_stack", s_rng, batch_norm_layers=True)
        _init_pose_head(store, "student.pose_head", c, s_rng)
        init_mlp(store, "student.projection", e, (*c.student_projection_hidden, e),
                 "student.projection", s_rng, final_gain=1.0)

        logger.debug("initialized %d parameters from seed %d", len(store), seed)
        return cls(config, store)

    # ── Persistence ───────────────────────────────────────────────────────────

    def save(self, directory: str | Path, header: dict[str, Any] | None = None) -> Path:
        """Write parameters, optimizer state and topology to *directory*."""
        return write_params(self.store, directory, {**(header or {}), "topology": self.config.to_dict()})

    @classmethod
    def load(cls, directory: str | Path) -> tuple[ModelBundle, dict[str, Any]]:
        """
        Rebuild a bundle from a checkpoint using the topology in its header.

        Raises
        ------
        CheckpointError
            If the checkpoint is unreadable, carries no topology, or its
            parameters do not match that topology.
        """
        store, header = read_params(directory)
        if "topology" not in header:
            raise CheckpointError(f"{directory}: checkpoint has no model topology")
        try:
            config = EncoderConfig.from_dict(header["topology"])
        except ConfigError as exc:
            raise CheckpointError(f"{directory}: {exc}") from exc

        reference = cls.create(config, 0).store
        expected = {n: reference.value(n).shape for n in reference.names}
        found = {n: store.value(n).shape for n in store.names}
        if expected != found or set(reference.buffer_names) != set(store.buffer_names):
            raise CheckpointError(f"{directory}: parameters do not match the stored topology")
        return cls(config, store), header

    def adopt(self, other: ModelBundle, role: str = "teacher") -> None:
        """Copy *role*'s parameters and buffers from *other* into this bundle."""
        if other.config != self.config:
            raise CheckpointError(f"cannot adopt {role} parameters: model topologies differ")
        prefix = f"{role}."
        for name in other.store.names:
            if name.startswith(prefix):
                self.store.set_value(name, other.store.value(name))
        for name in other.store.buffer_names:
            if name.startswith(prefix):
                self.store.buffer(name)[...] = other.store.buffer(name)

    def check_compatible(self, resolution: int, n_points: int) -> None:
        """Raise CheckpointError unless the data matches the input layer sizes."""
        if (resolution, n_points) != (self.config.resolution, self.config.n_points):
            raise CheckpointError(
                f"model expects {self.config.resolution}px images and {self.config.n_points} "
                f"points, data has {resolution}px and {n_points}"
            )

    # ── Freezing ──────────────────────────────────────────────────────────────

    def _groups(self, targets: str | Iterable[str]) -> list[str]:
        items = [targets] if isinstance(targets, str) else list(targets)
        groups: list[str] = []
        for item in items:
            groups.extend(_ROLE_GROUPS.get(item, (item,)))
        return groups

    def freeze(self, targets: str | Iterable[str]) -> None:
        """Freeze ``"teacher"``, ``"student"`` or explicit group names."""
        self.store.freeze(self._groups(targets))

    def unfreeze(self, targets: str | Iterable[str]) -> None:
        self.store.unfreeze(self._groups(targets))

    def is_frozen(self, role: str) -> bool:
        return all(self.store.group_frozen(g) for g in _ROLE_GROUPS[role])

    def bind(self, tape: Tape | None) -> BoundParams:
        return self.store.bind(tape)

    # ── Forward passes ────────────────────────────────────────────────────────

    def _image_batch(self, images: np.ndarray) -> np.ndarray:
        arr = np.asarray(images, dtype=np.float64)
        r = self.config.resolution
        if arr.ndim != 3 or arr.shape[1:] != (r, r):
            raise ShapeError(f"images must be (B, {r}, {r}), got {arr.shape}")
        return arr.reshape(arr.shape[0], r * r)

    def _image_features(self, params: BoundParams, flat: np.ndarray) -> Tensor:
        c = self.config
        return mlp(params, "teacher.image_encoder", flat, len(c.teacher_image_hidden) + 1)

    def _projection_t(self, params: BoundParams, x_t: Tensor) -> Tensor:
        n = len(self.config.teacher_projection_hidden) + 1
        return mlp(params, "teacher.projection", x_t, n, final=None)

    def encode_points(self, params: BoundParams, clouds: np.ndarray) -> Tensor:
        """d_t: shared per-point MLP then max over points. Order-invariant."""
        arr = np.asarray(clouds, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[1] != self.config.n_points:
            raise ShapeError(f"clouds must be (B, {self.config.n_points}, 3), got {arr.shape}")
        b, n, _ = arr.shape
        c = self.config
        per_point = mlp(params, "teacher.point_encoder", arr.reshape(b * n, 3),
                        len(c.point_hidden) + 1)
        return max_over_axis(reshape(per_point, (b, n, c.shape_dim)), axis=1)

    def teacher_forward(
        self, params: BoundParams, images: np.ndarray, clouds: np.ndarray
    ) -> TeacherOutputs:
        flat = self._image_batch(images)
        if np.asarray(clouds).shape[0] != flat.shape[0]:
            raise ShapeError(
                f"images and clouds batch sizes differ: {flat.shape[0]} vs {np.asarray(clouds).shape[0]}"
            )
        x_t = self._image_features(params, flat)
        d_t = self.encode_points(params, clouds)
        h_t = mlp(params, "teacher.fusenet", concat([d_t, x_t], axis=-1),
                  len(self.config.fusenet), final=tanh)
        return TeacherOutputs(
            x_t=x_t,
            d_t=d_t,
            h_t=h_t,
            z_t=self._projection_t(params, x_t),
            heads=_pose_head(params, "teacher.pose_head", h_t),
        )

    def contrastive_forward(self, params: BoundParams, images: np.ndarray) -> Tensor:
        """z_t = G_t(R_t(image)), the Contrastive Learner's bridge embedding."""
        return self._projection_t(params, self._image_features(params, self._image_batch(images)))

    def student_forward(
        self, params: BoundParams, images: np.ndarray, *, training: bool = False
    ) -> StudentOutputs:
        c = self.config
        flat = self._image_batch(images)
        x_s = mlp(params, "student.image_encoder", flat, len(c.student_image_hidden) + 1)
        bn_training = training and not self.store.group_frozen("student.head_stack")
        h_s = mlp(params, "student.head_stack", x_s, len(c.student_head),
                  batch_norm_layers=True, training=bn_training)
        z_s = mlp(params, "student.projection", h_s, len(c.student_projection_hidden) + 1,
                  final=None)
        return StudentOutputs(x_s=x_s, h_s=h_s, z_s=z_s,
                              heads=_pose_head(params, "student.pose_head", h_s))


# ── Pose heads ────────────────────────────────────────────────────────────────


def _init_pose_head(
    store: ParamStore, prefix: str, config: EncoderConfig, rng: np.random.Generator
) -> None:
    for angle in ANGLES:
        n_bins = config.bin_spec.n_bins(angle)
        for part in ("bins", "offsets"):
            init_linear(store, f"{prefix}.{angle.value}.{part}", config.fused_dim, n_bins,
                        prefix, rng, gain=1.0)


def _pose_head(params: BoundParams, prefix: str, h: Tensor) -> PoseHeadOutputs:
    logits = [linear(params, f"{prefix}.{a.value}.bins", h) for a in ANGLES]
    offsets = [sigmoid(linear(params, f"{prefix}.{a.value}.offsets", h)) for a in ANGLES]
    return PoseHeadOutputs(
        logits=(logits[0], logits[1], logits[2]),
        offsets=(offsets[0], offsets[1], offsets[2]),
    )
