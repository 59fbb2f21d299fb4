"""
Training objectives.

Every function takes and returns diffmath Tensors so that gradients flow
to whatever parameters produced the inputs. Batch reductions are means.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType

import numpy as np

from posedistill.diffmath import (
    ShapeError,
    Tensor,
    TensorLike,
    add,
    as_tensor,
    cosine_similarity,
    detach,
    log_softmax,
    mean,
    mul,
    neg,
    pick,
    scale,
    smooth_l1,
    softmax,
    sub,
    sum_,
)
from posedistill.errors import ConfigError
from posedistill.models import PoseHeadOutputs, StudentOutputs, TeacherOutputs
from posedistill.posemath import ANGLES, DEFAULT_BIN_SPEC, AngleBinSpec, encode_poses

# ── Configuration and results ─────────────────────────────────────────────────


@dataclass(frozen=True)
class LossWeights:
    """κ weights the teacher stage, ω the student stage; τ is the InfoNCE temperature."""

    kappa1: float = 1.0
    kappa2: float = 0.5
    omega1: float = 0.25
    omega2: float = 0.75
    omega3: float = 0.75
    tau: float = 0.1

    def __post_init__(self) -> None:
        for name in ("kappa1", "kappa2", "omega1", "omega2", "omega3"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ConfigError(f"{name} must be a finite value >= 0, got {value}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ConfigError(f"tau must be positive, got {self.tau}")


class EmbeddingMatch(str, Enum):
    """How the student's z_s is tied to the frozen teacher during stage 2."""

    KL = "kl"  # kl_embed(z_t, z_s) against the Contrastive Learner
    INFONCE = "infonce"  # one-sided InfoNCE of z_s against frozen h_t


@dataclass(frozen=True)
class LossBreakdown:
    """The weighted total plus each active unweighted term, for logging."""

    total: Tensor
    terms: Mapping[str, float] = field(default_factory=lambda: MappingProxyType({}))

    @property
    def value(self) -> float:
        return self.total.item()


@dataclass(frozen=True)
class PoseTargets:
    """
    Batched supervision: signed bin indices (B, 3) int64 and in-bin
    offsets (B, 3) float64, in (α, β, γ) column order.
    """

    bins: np.ndarray
    offsets: np.ndarray

    @classmethod
    def from_poses(cls, poses: np.ndarray, spec: AngleBinSpec = DEFAULT_BIN_SPEC) -> PoseTargets:
        bins, offsets = encode_poses(poses, spec)
        return cls(bins=bins, offsets=offsets)

    def __len__(self) -> int:
        return int(self.bins.shape[0])


# ── Components ────────────────────────────────────────────────────────────────


def pose_loss(
    heads: PoseHeadOutputs, targets: PoseTargets, spec: AngleBinSpec = DEFAULT_BIN_SPEC
) -> Tensor:
    """
    Σ over angles of bin cross-entropy plus smooth-L1 on the ground-truth
    bin's offset, averaged over the batch.

    Raises
    ------
    ValueError
        If a target bin is outside its angle's index range.
    ShapeError
        If head widths or batch sizes disagree with the targets.
    """
    per_sample: Tensor | None = None
    for col, (angle, logits, offsets) in enumerate(zip(ANGLES, heads.logits, heads.offsets)):
        lo, hi = spec.index_range(angle)
        bins = targets.bins[:, col]
        if np.any(bins < lo) or np.any(bins > hi):
            raise ValueError(f"{angle.value} target bin outside [{lo}, {hi}]")
        if logits.shape != (len(targets), spec.n_bins(angle)):
            raise ShapeError(
                f"{angle.value} logits must be ({len(targets)}, {spec.n_bins(angle)}), "
                f"got {logits.shape}"
            )
        pos = bins - lo
        ce = neg(pick(log_softmax(logits, axis=1), pos))
        reg = smooth_l1(sub(pick(offsets, pos), targets.offsets[:, col]))
        term = add(ce, reg)
        per_sample = term if per_sample is None else add(per_sample, term)
    assert per_sample is not None
    return mean(per_sample)


def infonce(z: TensorLike, h: TensorLike, tau: float) -> Tensor:
    """
    −(1/N) Σᵢ log softmaxⱼ(s(zᵢ, hⱼ)/τ)ᵢ with cosine similarity s.

    Row i of *z* and row i of *h* form the positive pair; every other row
    of *h* is a negative.
    """
    tz, th = as_tensor(z), as_tensor(h)
    if tz.ndim != 2 or tz.shape != th.shape:
        raise ShapeError(f"infonce: z and h must be equal (N, E) batches, got {tz.shape} and {th.shape}")
    n = tz.shape[0]
    if n < 2:
        raise ShapeError(f"infonce needs a batch of at least 2 for negatives, got {n}")
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    logits = scale(cosine_similarity(tz, th), 1.0 / tau)
    return neg(mean(pick(log_softmax(logits, axis=1), np.arange(n))))


def _kl_rows(p_logits: TensorLike, q_logits: TensorLike) -> Tensor:
    """Per-row D_KL(softmax(p) ‖ softmax(q)), shape (B,)."""
    log_p = log_softmax(p_logits, axis=1)
    return sum_(mul(softmax(p_logits, axis=1), sub(log_p, log_softmax(q_logits, axis=1))), axis=1)


def kl_embed(z_t: TensorLike, z_s: TensorLike) -> Tensor:
    """D_KL(softmax(z_t) ‖ softmax(z_s)) over the embedding axis, batch mean."""
    tt, ts = as_tensor(z_t), as_tensor(z_s)
    if tt.ndim != 2 or tt.shape != ts.shape:
        raise ShapeError(f"kl_embed: z_t and z_s must be equal (B, E), got {tt.shape} and {ts.shape}")
    return mean(_kl_rows(tt, ts))


def kl_output(teacher_logits: Sequence[TensorLike], student_logits: Sequence[TensorLike]) -> Tensor:
    """
    Σ over the three heads of D_KL(p_t ‖ p_s), batch mean.

    The teacher side is detached: gradients reach the student logits only.
    """
    if len(teacher_logits) != len(student_logits):
        raise ShapeError(
            f"kl_output: {len(teacher_logits)} teacher heads vs {len(student_logits)} student heads"
        )
    total: Tensor | None = None
    for t_raw, s_raw in zip(teacher_logits, student_logits):
        t, s = detach(t_raw), as_tensor(s_raw)
        if t.ndim != 2 or t.shape != s.shape:
            raise ShapeError(f"kl_output: head shapes differ, {t.shape} vs {s.shape}")
        rows = _kl_rows(t, s)
        total = rows if total is None else add(total, rows)
    if total is None:
        raise ShapeError("kl_output: no heads given")
    return mean(total)


# ── Stage objectives ──────────────────────────────────────────────────────────


def _combine(parts: list[tuple[str, float, Tensor]]) -> LossBreakdown:
    total: Tensor | None = None
    terms: dict[str, float] = {}
    for name, weight, value in parts:
        terms[name] = value.item()
        weighted = scale(value, weight)
        total = weighted if total is None else add(total, weighted)
    if total is None:
        raise ConfigError("every loss weight of this objective is zero")
    return LossBreakdown(total=total, terms=MappingProxyType(terms))


def teacher_loss(
    outputs: TeacherOutputs,
    targets: PoseTargets,
    weights: LossWeights,
    spec: AngleBinSpec = DEFAULT_BIN_SPEC,
) -> LossBreakdown:
    """κ₁·L_POS + κ₂·InfoNCE(z_t, h_t). Zero-weight terms are not computed."""
    parts: list[tuple[str, float, Tensor]] = []
    if weights.kappa1 > 0:
        parts.append(("pose", weights.kappa1, pose_loss(outputs.heads, targets, spec)))
    if weights.kappa2 > 0:
        parts.append(("cl", weights.kappa2, infonce(outputs.z_t, outputs.h_t, weights.tau)))
    return _combine(parts)


def student_loss(
    outputs: StudentOutputs,
    targets: PoseTargets,
    weights: LossWeights,
    *,
    bridge: TensorLike | None = None,
    teacher_logits: Sequence[TensorLike] | None = None,
    match: EmbeddingMatch = EmbeddingMatch.KL,
    spec: AngleBinSpec = DEFAULT_BIN_SPEC,
) -> LossBreakdown:
    """
    ω₁·L_POS + ω₂·L_embed + ω₃·L_KD.

    *bridge* is the frozen teacher embedding the student is tied to: z_t
    for ``EmbeddingMatch.KL`` or h_t for the one-sided ``INFONCE`` variant.
    *teacher_logits* are the frozen teacher's bin logits for L_KD.
    """
    parts: list[tuple[str, float, Tensor]] = []
    if weights.omega1 > 0:
        parts.append(("pose", weights.omega1, pose_loss(outputs.heads, targets, spec)))
    if weights.omega2 > 0:
        if bridge is None:
            raise ValueError("omega2 > 0 needs the teacher's bridge embedding")
        if match is EmbeddingMatch.KL:
            parts.append(("kl", weights.omega2, kl_embed(detach(bridge), outputs.z_s)))
        else:
            parts.append(("cl", weights.omega2, infonce(outputs.z_s, detach(bridge), weights.tau)))
    if weights.omega3 > 0:
        if teacher_logits is None:
            raise ValueError("omega3 > 0 needs the teacher's bin logits")
        parts.append(("kd", weights.omega3, kl_output(teacher_logits, outputs.heads.logits)))
    return _combine(parts)


def joint_loss(
    teacher: TeacherOutputs,
    student: StudentOutputs,
    targets: PoseTargets,
    weights: LossWeights,
    spec: AngleBinSpec = DEFAULT_BIN_SPEC,
) -> LossBreakdown:
    """
    Joint contrastive objective: κ₁·(L_POS teacher + L_POS student) +
    κ₂·InfoNCE(z_s, h_t), with gradients reaching both networks.
    """
    parts: list[tuple[str, float, Tensor]] = []
    if weights.kappa1 > 0:
        parts.append(("pose", weights.kappa1, pose_loss(teacher.heads, targets, spec)))
        parts.append(("pose_student", weights.kappa1, pose_loss(student.heads, targets, spec)))
    if weights.kappa2 > 0:
        parts.append(("cl", weights.kappa2, infonce(student.z_s, teacher.h_t, weights.tau)))
    return _combine(parts)
