"""
Network topology configuration.

Widths are the full-scale backbone dimensions divided by 16, keeping the
ratios: teacher image features 1024 → 64, shape features 1024 → 64,
student image features 2048 → 128, head stack 800-400-200 → 64-32-16.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

from posedistill.errors import ConfigError
from posedistill.posemath import DEFAULT_BIN_SPEC, AngleBinSpec


def _widths(name: str, value: Any) -> tuple[int, ...]:
    widths = tuple(int(w) for w in value)
    if any(w < 1 for w in widths):
        raise ConfigError(f"{name} widths must all be >= 1, got {list(widths)}")
    return widths


@dataclass(frozen=True)
class EncoderConfig:
    """
    Layer widths of every network in the teacher/student pair.

    ``fused_dim`` is the shared embedding width E: the FuseNet output h_t,
    the student head-stack output h_s, and both projection heads end there.
    Hidden tuples list the widths before each encoder's output layer.
    """

    resolution: int = 32
    n_points: int = 256
    teacher_image_dim: int = 64
    teacher_image_hidden: tuple[int, ...] = (128,)
    shape_dim: int = 64
    point_hidden: tuple[int, ...] = (32,)
    fusenet: tuple[int, ...] = (64, 32, 32, 16)
    teacher_projection_hidden: tuple[int, ...] = (64, 32)
    student_image_dim: int = 128
    student_image_hidden: tuple[int, ...] = (256,)
    student_head: tuple[int, ...] = (64, 32, 16)
    student_projection_hidden: tuple[int, ...] = (32,)
    fused_dim: int = 16
    bin_spec: AngleBinSpec = DEFAULT_BIN_SPEC

    def __post_init__(self) -> None:
        for name in (
            "teacher_image_hidden",
            "point_hidden",
            "fusenet",
            "teacher_projection_hidden",
            "student_image_hidden",
            "student_head",
            "student_projection_hidden",
        ):
            object.__setattr__(self, name, _widths(name, getattr(self, name)))
        for name in ("resolution", "n_points", "teacher_image_dim", "shape_dim",
                     "student_image_dim", "fused_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not self.fusenet or self.fusenet[-1] != self.fused_dim:
            raise ConfigError(
                f"fusenet must end at fused_dim {self.fused_dim}, got {list(self.fusenet)}"
            )
        if not self.student_head or self.student_head[-1] != self.fused_dim:
            raise ConfigError(
                f"student_head must end at fused_dim {self.fused_dim}, "
                f"got {list(self.student_head)}"
            )

    @property
    def image_size(self) -> int:
        return self.resolution * self.resolution

    def to_dict(self) -> dict[str, Any]:
        """JSON-ready topology, stored in every checkpoint header."""
        data = asdict(self)
        data["bin_spec"] = {
            "bin_width": self.bin_spec.bin_width,
            "index_range_azimuth_inplane": list(self.bin_spec.index_range_azimuth_inplane),
            "index_range_elevation": list(self.bin_spec.index_range_elevation),
        }
        for key, value in data.items():
            if isinstance(value, tuple):
                data[key] = list(value)
        return data

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> EncoderConfig:
        raw = dict(data)
        spec = raw.pop("bin_spec", None)
        if spec is not None:
            raw["bin_spec"] = AngleBinSpec(
                bin_width=float(spec["bin_width"]),
                index_range_azimuth_inplane=tuple(spec["index_range_azimuth_inplane"]),
                index_range_elevation=tuple(spec["index_range_elevation"]),
            )
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(f"bad topology: {exc}") from exc
