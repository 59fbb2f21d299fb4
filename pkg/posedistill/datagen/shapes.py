"""
Procedural primitives: instance construction, area-uniform surface
sampling, analytic surface residuals, and ray intersection.

Every primitive lives in its canonical frame, centred at the origin. The
L and T shapes are unions of two axis-aligned boxes; everything else is a
single analytic solid. All randomness comes from a Generator seeded by the
instance seed, so the same ShapeSpec always yields the same points.
"""

from __future__ import annotations

import math

import numpy as np

from .registry import get_registry
from .types import ShapeCategory, ShapeSpec

MIN_POINTS = 8

_INF = math.inf
_PARALLEL_EPS = 1e-12
_CONTAIN_TOL = 1e-12
_BATCH = 512

# (center, half-extents) pairs
Box = tuple[np.ndarray, np.ndarray]


# ── Instances ─────────────────────────────────────────────────────────────────


def make_shape_spec(category: ShapeCategory | str, instance_seed: int) -> ShapeSpec:
    """Draw size parameters uniformly within the category's table ranges."""
    entry = get_registry().get(category)
    rng = np.random.default_rng(instance_seed)
    params = tuple(float(rng.uniform(p.min, p.max)) for p in entry.params)
    return ShapeSpec(category=entry.id, size_params=params, instance_seed=instance_seed)


def validate_shape_spec(spec: ShapeSpec) -> None:
    """Raise ValueError if any size parameter is outside its table range."""
    entry = get_registry().get(spec.category)
    bad = [
        f"{p.name}={v} not in [{p.min}, {p.max}]"
        for p, v in zip(entry.params, spec.size_params)
        if not p.contains(v)
    ]
    if bad:
        raise ValueError(f"invalid {spec.category.value} size params: " + "; ".join(bad))


def component_boxes(spec: ShapeSpec) -> list[Box]:
    """The boxes whose union is the shape (box, lshape, tshape only)."""
    if spec.category is ShapeCategory.BOX:
        half = np.array(spec.size_params)
        return [(np.zeros(3), half)]
    a, w, d = spec.size_params
    if spec.category is ShapeCategory.LSHAPE:
        return [
            (np.array([-a + w, 0.0, 0.0]), np.array([w, a, d])),  # vertical bar
            (np.array([0.0, -a + w, 0.0]), np.array([a, w, d])),  # bottom bar
        ]
    if spec.category is ShapeCategory.TSHAPE:
        return [
            (np.array([0.0, a - w, 0.0]), np.array([a, w, d])),  # top bar
            (np.array([0.0, 0.0, 0.0]), np.array([w, a, d])),  # stem
        ]
    raise ValueError(f"{spec.category.value} is not a union of boxes")


# ── Surface sampling ──────────────────────────────────────────────────────────


def sample_point_cloud(spec: ShapeSpec, n: int) -> np.ndarray:
    """
    Sample *n* points area-uniformly on the surface of *spec*.

    Returns an (n, 3) float64 array in the canonical frame. Deterministic
    for a given spec (its instance seed drives the generator).

    Raises
    ------
    ValueError
        If n < 8 or a size parameter lies outside its category range.
    """
    if n < MIN_POINTS:
        raise ValueError(f"n must be >= {MIN_POINTS}, got {n}")
    validate_shape_spec(spec)
    rng = np.random.default_rng([spec.instance_seed, n])
    cat = spec.category
    if cat in (ShapeCategory.BOX, ShapeCategory.LSHAPE, ShapeCategory.TSHAPE):
        return _sample_box_union(component_boxes(spec), n, rng)
    if cat is ShapeCategory.CYLINDER:
        return _sample_cylinder(spec.param("radius"), spec.param("half_height"), n, rng)
    if cat is ShapeCategory.CONE:
        return _sample_cone(spec.param("radius"), spec.param("half_height"), n, rng)
    return _sample_ellipsoid(np.array(spec.size_params), n, rng)


def _sample_box_faces(center: np.ndarray, half: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    hx, hy, hz = half
    # faces ±x, ±y, ±z
    areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy])
    face = rng.choice(6, size=n, p=areas / areas.sum())
    pts = rng.uniform(-1.0, 1.0, size=(n, 3)) * half
    axis = face // 2
    sign = np.where(face % 2 == 0, 1.0, -1.0)
    pts[np.arange(n), axis] = sign * half[axis]
    return pts + center


def _inside(points: np.ndarray, box: Box, *, closed: bool) -> np.ndarray:
    center, half = box
    rel = np.abs(points - center)
    if closed:
        return np.all(rel <= half + _CONTAIN_TOL, axis=1)
    return np.all(rel < half - _CONTAIN_TOL, axis=1)


def _sample_box_union(boxes: list[Box], n: int, rng: np.random.Generator) -> np.ndarray:
    areas = np.array([8.0 * (h[1] * h[2] + h[0] * h[2] + h[0] * h[1]) for _, h in boxes])
    probs = areas / areas.sum()
    kept: list[np.ndarray] = []
    total = 0
    while total < n:
        which = rng.choice(len(boxes), size=_BATCH, p=probs)
        for i, box in enumerate(boxes):
            count = int(np.count_nonzero(which == i))
            if count == 0:
                continue
            pts = _sample_box_faces(box[0], box[1], count, rng)
            keep = np.ones(count, dtype=bool)
            # shared coplanar patches belong to the earlier box
            for j, other in enumerate(boxes):
                if j < i:
                    keep &= ~_inside(pts, other, closed=True)
                elif j > i:
                    keep &= ~_inside(pts, other, closed=False)
            kept.append(pts[keep])
            total += int(keep.sum())
    return np.concatenate(kept)[:n]


def _disk(radius: float, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    rho = radius * np.sqrt(rng.uniform(0.0, 1.0, n))
    theta = rng.uniform(0.0, 2.0 * math.pi, n)
    return rho * np.cos(theta), rho * np.sin(theta)


def _sample_cylinder(r: float, h: float, n: int, rng: np.random.Generator) -> np.ndarray:
    side, cap = 2.0 * math.pi * r * 2.0 * h, math.pi * r * r
    part = rng.choice(3, size=n, p=np.array([side, cap, cap]) / (side + 2.0 * cap))
    pts = np.empty((n, 3))

    m = part == 0
    theta = rng.uniform(0.0, 2.0 * math.pi, int(m.sum()))
    pts[m, 0] = r * np.cos(theta)
    pts[m, 1] = r * np.sin(theta)
    pts[m, 2] = rng.uniform(-h, h, int(m.sum()))

    for idx, z in ((1, h), (2, -h)):
        m = part == idx
        x, y = _disk(r, int(m.sum()), rng)
        pts[m, 0], pts[m, 1], pts[m, 2] = x, y, z
    return pts


def _sample_cone(r: float, h: float, n: int, rng: np.random.Generator) -> np.ndarray:
    slant = math.hypot(r, 2.0 * h)
    lateral, base = math.pi * r * slant, math.pi * r * r
    on_side = rng.uniform(0.0, 1.0, n) < lateral / (lateral + base)
    pts = np.empty((n, 3))

    count = int(on_side.sum())
    # fraction of the way from apex to base; sqrt makes it area-uniform
    frac = np.sqrt(rng.uniform(0.0, 1.0, count))
    theta = rng.uniform(0.0, 2.0 * math.pi, count)
    pts[on_side, 0] = frac * r * np.cos(theta)
    pts[on_side, 1] = frac * r * np.sin(theta)
    pts[on_side, 2] = h - 2.0 * h * frac

    x, y = _disk(r, n - count, rng)
    pts[~on_side, 0], pts[~on_side, 1], pts[~on_side, 2] = x, y, -h
    return pts


def _sample_ellipsoid(semi: np.ndarray, n: int, rng: np.random.Generator) -> np.ndarray:
    a, b, c = semi
    # area element of the map u ↦ semi·u on the unit sphere, up to a constant
    weights = np.array([b * c, a * c, a * b])
    w_max = float(weights.max())
    kept: list[np.ndarray] = []
    total = 0
    while total < n:
        u = rng.normal(size=(_BATCH, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        g = np.sqrt(((u * weights) ** 2).sum(axis=1))
        accept = rng.uniform(0.0, w_max, _BATCH) < g
        kept.append(u[accept] * semi)
        total += int(accept.sum())
    return np.concatenate(kept)[:n]


# ── Surface residuals ─────────────────────────────────────────────────────────


def surface_residual(spec: ShapeSpec, points: np.ndarray) -> np.ndarray:
    """
    Per-point residual of the analytic surface equation; zero on the surface.

    Boxes and box unions use the exact unsigned distance. The cylinder uses
    its exact signed-distance magnitude. The cone and ellipsoid use the
    residual of their implicit equations scaled to length units, which is
    exact on the surface and first-order accurate near it.
    """
    p = np.asarray(points, dtype=np.float64)
    cat = spec.category
    if cat in (ShapeCategory.BOX, ShapeCategory.LSHAPE, ShapeCategory.TSHAPE):
        sdf = np.min([_box_sdf(p, box) for box in component_boxes(spec)], axis=0)
        return np.abs(sdf)
    if cat is ShapeCategory.CYLINDER:
        r, h = spec.param("radius"), spec.param("half_height")
        d = np.stack([np.hypot(p[:, 0], p[:, 1]) - r, np.abs(p[:, 2]) - h], axis=1)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=1)
        return np.abs(np.minimum(d.max(axis=1), 0.0) + outside)
    if cat is ShapeCategory.CONE:
        r, h = spec.param("radius"), spec.param("half_height")
        k = r / (2.0 * h)
        rho = np.hypot(p[:, 0], p[:, 1])
        in_height = (p[:, 2] >= -h - _CONTAIN_TOL) & (p[:, 2] <= h + _CONTAIN_TOL)
        lateral = np.where(
            in_height, np.abs(rho - k * (h - p[:, 2])) / math.sqrt(1.0 + k * k), _INF
        )
        base = np.where(rho <= r + _CONTAIN_TOL, np.abs(p[:, 2] + h), _INF)
        return np.minimum(lateral, base)
    semi = np.array(spec.size_params)
    return np.abs(np.linalg.norm(p / semi, axis=1) - 1.0) * float(semi.min())


def _box_sdf(p: np.ndarray, box: Box) -> np.ndarray:
    center, half = box
    q = np.abs(p - center) - half
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    return outside + np.minimum(q.max(axis=1), 0.0)


# ── Ray intersection ──────────────────────────────────────────────────────────


def first_hit(spec: ShapeSpec, origins: np.ndarray, direction: np.ndarray) -> np.ndarray:
    """
    Ray parameter of the first surface crossing for parallel rays.

    *origins* is (M, 3) and *direction* a single (3,) vector shared by all
    rays, both in the canonical frame. Returns t ≥ 0 per ray, or +inf where
    the ray misses.
    """
    o = np.asarray(origins, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    cat = spec.category
    if cat in (ShapeCategory.BOX, ShapeCategory.LSHAPE, ShapeCategory.TSHAPE):
        return np.min([_hit_box(o, d, box) for box in component_boxes(spec)], axis=0)
    if cat is ShapeCategory.CYLINDER:
        return _hit_cylinder(o, d, spec.param("radius"), spec.param("half_height"))
    if cat is ShapeCategory.CONE:
        return _hit_cone(o, d, spec.param("radius"), spec.param("half_height"))
    return _hit_ellipsoid(o, d, np.array(spec.size_params))


def _slab(o: np.ndarray, d: float, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    if abs(d) < _PARALLEL_EPS:
        inside = (o >= lo) & (o <= hi)
        return np.where(inside, -_INF, _INF), np.where(inside, _INF, -_INF)
    t1, t2 = (lo - o) / d, (hi - o) / d
    return np.minimum(t1, t2), np.maximum(t1, t2)


def _entry(t_in: np.ndarray, t_out: np.ndarray) -> np.ndarray:
    hit = (t_in <= t_out) & (t_out >= 0.0)
    return np.where(hit, np.maximum(t_in, 0.0), _INF)


def _hit_box(o: np.ndarray, d: np.ndarray, box: Box) -> np.ndarray:
    center, half = box
    t_in = np.full(o.shape[0], -_INF)
    t_out = np.full(o.shape[0], _INF)
    for axis in range(3):
        lo, hi = _slab(o[:, axis], float(d[axis]), center[axis] - half[axis], center[axis] + half[axis])
        t_in, t_out = np.maximum(t_in, lo), np.minimum(t_out, hi)
    return _entry(t_in, t_out)


def _quadratic_interval(
    a: float, b: np.ndarray, c: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Interval where a·t² + b·t + c ≤ 0, for a > 0 (empty where no real roots)."""
    disc = b * b - 4.0 * a * c
    ok = disc >= 0.0
    s = np.sqrt(np.where(ok, disc, 0.0))
    return (
        np.where(ok, (-b - s) / (2.0 * a), _INF),
        np.where(ok, (-b + s) / (2.0 * a), -_INF),
    )


def _hit_ellipsoid(o: np.ndarray, d: np.ndarray, semi: np.ndarray) -> np.ndarray:
    os_, ds = o / semi, d / semi
    a = float(ds @ ds)
    t_in, t_out = _quadratic_interval(a, 2.0 * (os_ @ ds), (os_ * os_).sum(axis=1) - 1.0)
    return _entry(t_in, t_out)


def _hit_cylinder(o: np.ndarray, d: np.ndarray, r: float, h: float) -> np.ndarray:
    a = float(d[0] ** 2 + d[1] ** 2)
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
    if a < _PARALLEL_EPS:
        inside = c <= 0.0
        t_in, t_out = np.where(inside, -_INF, _INF), np.where(inside, _INF, -_INF)
    else:
        b = 2.0 * (o[:, 0] * d[0] + o[:, 1] * d[1])
        t_in, t_out = _quadratic_interval(a, b, c)
    z_in, z_out = _slab(o[:, 2], float(d[2]), -h, h)
    return _entry(np.maximum(t_in, z_in), np.minimum(t_out, z_out))


def _hit_cone(o: np.ndarray, d: np.ndarray, r: float, h: float) -> np.ndarray:
    """
    The solid is ρ ≤ k·(h − z) for z ∈ [−h, h], k = r / 2h: the lower nappe
    of a double cone clipped by a slab. The slab removes the upper nappe, so
    the hit interval is the (single) piece of {f ≤ 0} inside the slab.
    """
    k2 = (r / (2.0 * h)) ** 2
    u = h - o[:, 2]
    a = float(d[0] ** 2 + d[1] ** 2 - k2 * d[2] ** 2)
    b = 2.0 * (o[:, 0] * d[0] + o[:, 1] * d[1]) + 2.0 * k2 * u * d[2]
    c = o[:, 0] ** 2 + o[:, 1] ** 2 - k2 * u * u
    z_in, z_out = _slab(o[:, 2], float(d[2]), -h, h)

    if a > _PARALLEL_EPS:
        t_in, t_out = _quadratic_interval(a, b, c)
        return _entry(np.maximum(t_in, z_in), np.minimum(t_out, z_out))

    if a < -_PARALLEL_EPS:
        disc = b * b - 4.0 * a * c
        real = disc >= 0.0
        s = np.sqrt(np.where(real, disc, 0.0))
        r1, r2 = (-b + s) / (2.0 * a), (-b - s) / (2.0 * a)  # r1 <= r2 since a < 0
        lo1, hi1 = z_in, np.minimum(z_out, np.where(real, r1, _INF))
        lo2, hi2 = np.maximum(z_in, np.where(real, r2, -_INF)), z_out
        first = np.where(lo1 <= hi1, _entry(lo1, hi1), _INF)
        second = np.where(lo2 <= hi2, _entry(lo2, hi2), _INF)
        return np.minimum(first, second)

    # ray parallel to a generator: f is linear in t
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -c / b
    t_in = np.where(b > 0, -_INF, np.where(b < 0, root, np.where(c <= 0, -_INF, _INF)))
    t_out = np.where(b > 0, root, np.where(b < 0, _INF, np.where(c <= 0, _INF, -_INF)))
    return _entry(np.maximum(t_in, z_in), np.minimum(t_out, z_out))
