"""
Orthographic depth renderer and pixel-space image transforms.

The camera looks down −z from z = 2 in a frame with x right and y up. Pixel
(i, j) samples the ray through (x_j, y_i) with
x_j = −1 + (j + ½)·2/W and y_i = 1 − (i + ½)·2/H, so the pixel grid is
symmetric under left/right flips and quarter turns.

In-plane rotation is split into a multiple of 90°, applied as an exact
np.rot90 of the raster, plus a remainder applied to the shape. This makes
render(γ + 90°) bitwise equal to the 90°-rotated render(γ).
"""

from __future__ import annotations

import math

import numpy as np

from posedistill.posemath import HALF_PI, EulerPose, euler_to_matrix

from .shapes import first_hit
from .types import ShapeSpec

MIN_RESOLUTION = 8
DEFAULT_RESOLUTION = 32

_EYE_Z = 2.0
_DEPTH_FLOOR = 0.25  # intensity of the farthest visible surface


def _pixel_rays(resolution: int) -> np.ndarray:
    """Camera-frame ray origins, row-major over the H×W grid."""
    step = 2.0 / resolution
    centres = -1.0 + (np.arange(resolution) + 0.5) * step
    xs, ys = np.meshgrid(centres, -centres)
    return np.stack([xs.ravel(), ys.ravel(), np.full(xs.size, _EYE_Z)], axis=1)


def render(
    spec: ShapeSpec,
    pose: EulerPose,
    resolution: int = DEFAULT_RESOLUTION,
    *,
    noise_std: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """
    Render *spec* at *pose* to an H×W normalized depth image in [0, 1].

    Visible surface points map to 0.25 (far, z = −1) … 1.0 (near, z = +1);
    background pixels are 0. With ``noise_std > 0`` i.i.d. Gaussian pixel
    noise drawn from *rng* is added after rasterization and the result is
    clipped back to [0, 1].

    Raises
    ------
    ValueError
        If resolution < 8, noise_std < 0, or noise is requested without rng.
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}, got {resolution}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be >= 0, got {noise_std}")
    if noise_std > 0 and rng is None:
        raise ValueError("noise_std > 0 requires an rng")

    quarter_turns = round(pose.gamma / HALF_PI)
    residual = EulerPose(pose.alpha, pose.beta, pose.gamma - quarter_turns * HALF_PI)
    rot = euler_to_matrix(residual).m

    origins = _pixel_rays(resolution)
    # camera → object frame is Rᵀ; for row vectors that is a right product by R
    t = first_hit(spec, origins @ rot, -rot[2, :])
    hit = np.isfinite(t)
    depth = np.where(hit, _EYE_Z - t, -1.0)
    intensity = _DEPTH_FLOOR + (1.0 - _DEPTH_FLOOR) * (np.clip(depth, -1.0, 1.0) + 1.0) / 2.0
    img = np.where(hit, intensity, 0.0).reshape(resolution, resolution)
    img = np.rot90(img, quarter_turns).copy()

    if noise_std > 0:
        assert rng is not None
        img = np.clip(img + rng.normal(0.0, noise_std, img.shape), 0.0, 1.0)
    return img


# ── Image transforms ──────────────────────────────────────────────────────────


def flip_image(img: np.ndarray) -> np.ndarray:
    """Horizontal (left/right) mirror."""
    return np.fliplr(img).copy()


def rotate_image(img: np.ndarray, phi: float) -> np.ndarray:
    """
    Rotate a square image counter-clockwise by *phi* radians.

    Quarter turns are exact (np.rot90). Any remainder is applied by
    nearest-neighbour resampling about the image centre; pixels that map
    outside the source are 0.
    """
    h, w = img.shape
    if h != w:
        raise ValueError(f"rotate_image needs a square image, got {img.shape}")
    quarter_turns = round(phi / HALF_PI)
    out = np.rot90(img, quarter_turns)
    residual = phi - quarter_turns * HALF_PI
    if residual == 0.0:
        return out.copy()

    c, s = math.cos(residual), math.sin(residual)
    centre = (h - 1) / 2.0
    rows, cols = np.indices((h, w), dtype=np.float64)
    # destination (x right, y up) → source by the inverse rotation
    x, y = cols - centre, centre - rows
    src_x = c * x + s * y
    src_y = -s * x + c * y
    src_c = np.rint(src_x + centre).astype(np.int64)
    src_r = np.rint(centre - src_y).astype(np.int64)
    valid = (src_r >= 0) & (src_r < h) & (src_c >= 0) & (src_c < w)
    result = np.zeros_like(out)
    result[valid] = out[src_r[valid], src_c[valid]]
    return result
