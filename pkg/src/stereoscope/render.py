"""Small vectorised ray tracer used as the stereo ground-truth oracle.

Flat shading only: a hit takes its material albedo, mirrors reflect once and
scale the reflected albedo by their reflectivity.  A mirror pixel carries two
depths, the mirror surface and the virtual image behind it, which is exactly
what single-layer depth maps cannot hold.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal, Union

import numpy as np

from .errors import InputError
from .geometry import CameraRig, Eye, project_points

T_MIN = 1e-9
# relative tolerance for "the right ray lands on the same world point"
_SAME_POINT_RTOL = 1e-6

Vec3 = tuple[float, float, float]


def _vec(v, name: str) -> Vec3:
    try:
        x, y, z = (float(c) for c in v)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} must be a 3-vector") from exc
    if not all(math.isfinite(c) for c in (x, y, z)):
        raise InputError(f"{name} must be finite")
    return (x, y, z)


def _rgb(v, name: str) -> Vec3:
    out = _vec(v, name)
    if not all(0.0 <= c <= 1.0 for c in out):
        raise InputError(f"{name} must lie in [0, 1]")
    return out


# ---------------------------------------------------------------- shapes


@dataclass(frozen=True)
class Sphere:
    center: Vec3
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _vec(self.center, "sphere centre"))
        if not self.radius > 0:
            raise InputError("sphere radius must be positive")


@dataclass(frozen=True)
class Plane:
    point: Vec3
    normal: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "point", _vec(self.point, "plane point"))
        n = np.array(_vec(self.normal, "plane normal"))
        norm = float(np.sqrt(n @ n))
        if norm == 0.0:
            raise InputError("plane normal must be non-zero")
        object.__setattr__(self, "normal", tuple(float(c) for c in n / norm))


@dataclass(frozen=True)
class Quad:
    corner: Vec3
    edge_u: Vec3
    edge_v: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "corner", _vec(self.corner, "quad corner"))
        object.__setattr__(self, "edge_u", _vec(self.edge_u, "quad edge_u"))
        object.__setattr__(self, "edge_v", _vec(self.edge_v, "quad edge_v"))
        if float(np.linalg.norm(np.cross(self.edge_u, self.edge_v))) == 0.0:
            raise InputError("quad edges are degenerate")


Shape = Union[Sphere, Plane, Quad]


# ---------------------------------------------------------------- materials


@dataclass(frozen=True)
class Solid:
    rgb: Vec3

    def __post_init__(self) -> None:
        object.__setattr__(self, "rgb", _rgb(self.rgb, "rgb"))


@dataclass(frozen=True)
class Checker:
    """Two-colour checkerboard.

    ``variation`` scales each cell's brightness by a hashed per-cell factor in
    ``[1 - variation, 1]`` so that block matching is not fooled by the
    pattern's period.  Zero gives a plain two-colour board.
    """

    rgb_a: Vec3
    rgb_b: Vec3
    cell_m: float
    variation: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "rgb_a", _rgb(self.rgb_a, "rgb_a"))
        object.__setattr__(self, "rgb_b", _rgb(self.rgb_b, "rgb_b"))
        if not self.cell_m > 0:
            raise InputError("checker cell size must be positive")
        if not 0.0 <= self.variation <= 1.0:
            raise InputError("checker variation must lie in [0, 1]")


@dataclass(frozen=True)
class Mirror:
    reflectivity: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 < self.reflectivity <= 1.0:
            raise InputError("mirror reflectivity must lie in (0, 1]")


Material = Union[Solid, Checker, Mirror]


@dataclass(frozen=True)
class Primitive:
    id: str
    shape: Shape
    material: Material


@dataclass(frozen=True)
class Scene:
    primitives: tuple[Primitive, ...] = ()
    background: Vec3 = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        object.__setattr__(self, "primitives", tuple(self.primitives))
        object.__setattr__(self, "background", _rgb(self.background, "background"))
        ids = [p.id for p in self.primitives]
        if len(set(ids)) != len(ids):
            raise InputError("primitive ids must be unique")

    @property
    def has_mirror(self) -> bool:
        return any(isinstance(p.material, Mirror) for p in self.primitives)

    def get(self, prim_id: str) -> Primitive:
        for p in self.primitives:
            if p.id == prim_id:
                return p
        raise KeyError(prim_id)

    def without_mirrors(self, rgb: Vec3 = (0.5, 0.5, 0.5)) -> "Scene":
        """Same geometry with every mirror replaced by a solid material."""
        prims = tuple(
            replace(p, material=Solid(rgb)) if isinstance(p.material, Mirror) else p for p in self.primitives
        )
        return Scene(prims, self.background)

    # JSON ------------------------------------------------------------

    def to_dict(self) -> dict:
        return {"background": list(self.background), "primitives": [_prim_to_dict(p) for p in self.primitives]}

    @classmethod
    def from_dict(cls, data: dict) -> "Scene":
        try:
            prims = tuple(_prim_from_dict(p) for p in data.get("primitives", []))
            return cls(prims, tuple(data.get("background", (0.0, 0.0, 0.0))))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"invalid scene description: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "Scene":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _prim_to_dict(p: Primitive) -> dict:
    s, m = p.shape, p.material
    if isinstance(s, Sphere):
        shape = {"type": "sphere", "center": list(s.center), "radius": s.radius}
    elif isinstance(s, Plane):
        shape = {"type": "plane", "point": list(s.point), "normal": list(s.normal)}
    else:
        shape = {"type": "quad", "corner": list(s.corner), "edge_u": list(s.edge_u), "edge_v": list(s.edge_v)}
    if isinstance(m, Solid):
        mat = {"type": "solid", "rgb": list(m.rgb)}
    elif isinstance(m, Checker):
        mat = {
            "type": "checker",
            "rgb_a": list(m.rgb_a),
            "rgb_b": list(m.rgb_b),
            "cell_m": m.cell_m,
            "variation": m.variation,
            "seed": m.seed,
        }
    else:
        mat = {"type": "mirror", "reflectivity": m.reflectivity}
    return {"id": p.id, "shape": shape, "material": mat}


def _prim_from_dict(d: dict) -> Primitive:
    s, m = d["shape"], d["material"]
    kind = s["type"]
    if kind == "sphere":
        shape: Shape = Sphere(s["center"], float(s["radius"]))
    elif kind == "plane":
        shape = Plane(s["point"], s["normal"])
    elif kind == "quad":
        shape = Quad(s["corner"], s["edge_u"], s["edge_v"])
    else:
        raise InputError(f"unknown shape type {kind!r}")
    kind = m["type"]
    if kind == "solid":
        mat: Material = Solid(m["rgb"])
    elif kind == "checker":
        mat = Checker(m["rgb_a"], m["rgb_b"], float(m["cell_m"]), float(m.get("variation", 0.0)), int(m.get("seed", 0)))
    elif kind == "mirror":
        mat = Mirror(float(m.get("reflectivity", 1.0)))
    else:
        raise InputError(f"unknown material type {kind!r}")
    return Primitive(str(d["id"]), shape, mat)


# ---------------------------------------------------------------- ray math


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # explicit sum keeps per-ray results independent of array chunking
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack(
        [
            a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
            a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
            a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
        ],
        axis=-1,
    )


def _intersect_shape(shape: Shape, o: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Smallest hit parameter ``t > T_MIN`` per ray, ``inf`` on a miss."""
    inf = np.full(o.shape[0], np.inf)
    with np.errstate(divide="ignore", invalid="ignore"):
        if isinstance(shape, Sphere):
            oc = o - np.asarray(shape.center)
            a = _dot(d, d)
            half_b = _dot(oc, d)
            c = _dot(oc, oc) - shape.radius * shape.radius
            disc = half_b * half_b - a * c
            root = np.sqrt(np.where(disc >= 0, disc, 0.0))
            t0 = (-half_b - root) / a
            t1 = (-half_b + root) / a
            t = np.where(t0 > T_MIN, t0, np.where(t1 > T_MIN, t1, np.inf))
            return np.where(disc >= 0, t, inf)
        if isinstance(shape, Plane):
            n = np.asarray(shape.normal)
            denom = _dot(d, np.broadcast_to(n, d.shape))
            t = _dot(np.asarray(shape.point) - o, np.broadcast_to(n, o.shape)) / denom
            return np.where((denom != 0) & (t > T_MIN), t, inf)
        corner = np.asarray(shape.corner)
        eu, ev = np.asarray(shape.edge_u), np.asarray(shape.edge_v)
        n = np.cross(eu, ev)
        w = n / float(n @ n)
        denom = _dot(d, np.broadcast_to(n, d.shape))
        t = _dot(corner - o, np.broadcast_to(n, o.shape)) / denom
        hit = o + t[:, None] * d
        q = hit - corner
        alpha = _dot(np.broadcast_to(w, q.shape), _cross(q, np.broadcast_to(ev, q.shape)))
        beta = _dot(np.broadcast_to(w, q.shape), _cross(np.broadcast_to(eu, q.shape), q))
        ok = (denom != 0) & (t > T_MIN) & (alpha >= 0) & (alpha <= 1) & (beta >= 0) & (beta <= 1)
        return np.where(ok, t, inf)


def _nearest(scene: Scene, o: np.ndarray, d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    best_t = np.full(o.shape[0], np.inf)
    best_i = np.full(o.shape[0], -1, dtype=np.int64)
    for i, prim in enumerate(scene.primitives):
        t = _intersect_shape(prim.shape, o, d)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_i = np.where(closer, i, best_i)
    return best_t, best_i


def _normal_at(shape: Shape, pts: np.ndarray) -> np.ndarray:
    if isinstance(shape, Sphere):
        return (pts - np.asarray(shape.center)) / shape.radius
    if isinstance(shape, Plane):
        return np.broadcast_to(np.asarray(shape.normal), pts.shape)
    n = np.cross(shape.edge_u, shape.edge_v)
    return np.broadcast_to(n / np.linalg.norm(n), pts.shape)


def _plane_basis(normal: Vec3) -> tuple[np.ndarray, np.ndarray]:
    n = np.asarray(normal)
    helper = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    u = np.cross(n, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(n, u)


def _cell_hash(ix: np.ndarray, iy: np.ndarray, iz: np.ndarray, seed: int) -> np.ndarray:
    """Deterministic value in [0, 1] per integer cell."""
    h = (
        ix.astype(np.int64).astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
        ^ iy.astype(np.int64).astype(np.uint64) * np.uint64(0xC2B2AE3D27D4EB4F)
        ^ iz.astype(np.int64).astype(np.uint64) * np.uint64(0x165667B19E3779F9)
        ^ np.uint64(seed & 0xFFFFFFFF)
    )
    h ^= h >> np.uint64(29)
    h *= np.uint64(0xBF58476D1CE4E5B9)
    h ^= h >> np.uint64(32)
    return (h & np.uint64(0xFFFF)).astype(np.float64) / 65535.0


def _albedo(prim: Primitive, pts: np.ndarray) -> np.ndarray:
    m = prim.material
    if isinstance(m, Solid):
        return np.broadcast_to(np.asarray(m.rgb), pts.shape).copy()
    if isinstance(m, Mirror):
        return np.zeros_like(pts)
    s = prim.shape
    if isinstance(s, Quad):
        corner = np.asarray(s.corner)
        eu, ev = np.asarray(s.edge_u), np.asarray(s.edge_v)
        n = np.cross(eu, ev)
        w = n / float(n @ n)
        q = pts - corner
        a = _dot(np.broadcast_to(w, q.shape), _cross(q, np.broadcast_to(ev, q.shape))) * np.linalg.norm(eu)
        b = _dot(np.broadcast_to(w, q.shape), _cross(np.broadcast_to(eu, q.shape), q)) * np.linalg.norm(ev)
        cells = (np.floor(a / m.cell_m), np.floor(b / m.cell_m), np.zeros(len(pts)))
    elif isinstance(s, Plane):
        u, v = _plane_basis(s.normal)
        q = pts - np.asarray(s.point)
        cells = (
            np.floor(_dot(q, np.broadcast_to(u, q.shape)) / m.cell_m),
            np.floor(_dot(q, np.broadcast_to(v, q.shape)) / m.cell_m),
            np.zeros(len(pts)),
        )
    else:
        cells = tuple(np.floor(pts[:, k] / m.cell_m) for k in range(3))
    parity = (cells[0] + cells[1] + cells[2]).astype(np.int64) % 2
    rgb = np.where(parity[:, None] == 0, np.asarray(m.rgb_a), np.asarray(m.rgb_b))
    if m.variation > 0:
        scale = 1.0 - m.variation * _cell_hash(*cells, seed=m.seed)
        rgb = rgb * scale[:, None]
    return rgb


@dataclass
class TraceResult:
    """Per-ray outcome of a (possibly reflected) trace."""

    color: np.ndarray  # (N, 3)
    first_index: np.ndarray  # primitive index of the first hit, -1 on miss
    first_point: np.ndarray  # (N, 3), NaN on miss
    is_mirror: np.ndarray  # first hit is a mirror
    real_point: np.ndarray  # point whose colour is seen, NaN if none
    real_index: np.ndarray
    virtual_point: np.ndarray  # unfolded image of real_point along the primary ray


def trace(scene: Scene, origins: np.ndarray, dirs: np.ndarray) -> TraceResult:
    n = origins.shape[0]
    bg = np.asarray(scene.background, dtype=np.float64)
    nan3 = np.full((n, 3), np.nan)
    color = np.broadcast_to(bg, (n, 3)).copy()
    t, idx = _nearest(scene, origins, dirs)
    hit = idx >= 0
    first = np.where(hit[:, None], origins + np.where(hit, t, 0.0)[:, None] * dirs, nan3)
    mirror_ids = [i for i, p in enumerate(scene.primitives) if isinstance(p.material, Mirror)]
    is_mirror = np.isin(idx, mirror_ids) if mirror_ids else np.zeros(n, dtype=bool)

    real_point = np.where((hit & ~is_mirror)[:, None], first, nan3)
    real_index = np.where(hit & ~is_mirror, idx, -1)
    virtual = real_point.copy()

    for i, prim in enumerate(scene.primitives):
        sel = np.nonzero(idx == i)[0]
        if sel.size == 0:
            continue
        if not isinstance(prim.material, Mirror):
            color[sel] = _albedo(prim, first[sel])
            continue
        # single bounce
        nrm = _normal_at(prim.shape, first[sel])
        d_in = dirs[sel]
        r = d_in - 2.0 * _dot(d_in, nrm)[:, None] * nrm
        t2, idx2 = _nearest(scene, first[sel], r)
        hit2 = idx2 >= 0
        refl = np.broadcast_to(bg, (sel.size, 3)).copy()
        p2 = first[sel] + np.where(hit2, t2, 0.0)[:, None] * r
        for j in np.unique(idx2[hit2]):
            sub = np.nonzero(idx2 == j)[0]
            # a second mirror is past the bounce budget and shades black
            refl[sub] = _albedo(scene.primitives[j], p2[sub])
        color[sel] = prim.material.reflectivity * refl
        ok = hit2 & ~np.isin(idx2, mirror_ids)
        seg = np.sqrt(_dot(p2 - first[sel], p2 - first[sel]))
        unit = d_in / np.sqrt(_dot(d_in, d_in))[:, None]
        virt = first[sel] + seg[:, None] * unit
        real_point[sel] = np.where(ok[:, None], p2, np.nan)
        real_index[sel] = np.where(ok, idx2, -1)
        virtual[sel] = np.where(ok[:, None], virt, np.nan)

    return TraceResult(
        color=np.clip(color, 0.0, 1.0),
        first_index=idx,
        first_point=first,
        is_mirror=is_mirror,
        real_point=real_point,
        real_index=real_index,
        virtual_point=virtual,
    )


def camera_rays(rig: CameraRig, eye: Eye, px: np.ndarray, py: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """World-space rays through (sub)pixel coordinates; direction has unit camera z."""
    centre, rot = rig.camera_pose(eye)
    cam = np.stack([(px - rig.cx) / rig.focal_px, (py - rig.cy) / rig.focal_px, np.ones_like(px)], axis=-1)
    # rot is orthonormal: world = rot.T @ cam
    world = np.stack([_dot(cam, np.broadcast_to(rot[:, k], cam.shape)) for k in range(3)], axis=-1)
    return np.broadcast_to(centre, world.shape).copy(), world


def trace_pixels(scene: Scene, rig: CameraRig, eye: Eye, px, py) -> TraceResult:
    px = np.asarray(px, dtype=np.float64).ravel()
    py = np.asarray(py, dtype=np.float64).ravel()
    o, d = camera_rays(rig, eye, px, py)
    return trace(scene, o, d)


# ---------------------------------------------------------------- views


@dataclass
class DepthLayers:
    surface: np.ndarray  # first-hit camera depth, NaN where nothing is hit
    virtual: np.ndarray  # virtual-image depth at mirror pixels, NaN elsewhere
    mirror_mask: np.ndarray


@dataclass
class RenderOutput:
    left: np.ndarray
    right: np.ndarray
    layers_left: DepthLayers
    gt_disparity_left: np.ndarray  # NaN where no valid correspondence
    gt_right_y: np.ndarray = field(repr=False)  # row of the correspondence in the right view


def _pixel_grid(rig: CameraRig, rows: range) -> tuple[np.ndarray, np.ndarray]:
    ys, xs = np.meshgrid(np.arange(rows.start, rows.stop) + 0.5, np.arange(rig.width_px) + 0.5, indexing="ij")
    return xs.ravel(), ys.ravel()


def _row_chunks(height: int, workers: int) -> list[range]:
    workers = max(1, min(workers, height))
    bounds = np.linspace(0, height, workers + 1).round().astype(int)
    return [range(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _trace_view(scene: Scene, rig: CameraRig, eye: Eye, workers: int) -> TraceResult:
    chunks = _row_chunks(rig.height_px, workers)

    def run(rows: range) -> TraceResult:
        xs, ys = _pixel_grid(rig, rows)
        return trace_pixels(scene, rig, eye, xs, ys)

    if len(chunks) == 1:
        return run(chunks[0])
    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        parts = list(pool.map(run, chunks))
    return TraceResult(*(np.concatenate([getattr(p, f) for p in parts]) for f in TraceResult.__dataclass_fields__))


def _layers(tr: TraceResult, rig: CameraRig, eye: Eye) -> DepthLayers:
    h, w = rig.height_px, rig.width_px
    _, _, z_first = project_points(tr.first_point, rig, eye)
    _, _, z_virt = project_points(tr.virtual_point, rig, eye)
    surface = np.where(tr.first_index >= 0, z_first, np.nan).reshape(h, w)
    virtual = np.where(tr.is_mirror, z_virt, np.nan).reshape(h, w)
    return DepthLayers(surface=surface, virtual=virtual, mirror_mask=tr.is_mirror.reshape(h, w))


def render_view(scene: Scene, rig: CameraRig, eye: Eye = "left", workers: int = 1) -> tuple[np.ndarray, DepthLayers]:
    tr = _trace_view(scene, rig, eye, workers)
    frame = tr.color.reshape(rig.height_px, rig.width_px, 3)
    return frame, _layers(tr, rig, eye)


def _same_point(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = np.sqrt(_dot(a - b, a - b))
    scale = np.maximum(1.0, np.sqrt(_dot(b, b)))
    with np.errstate(invalid="ignore"):
        return diff <= _SAME_POINT_RTOL * scale


def render_stereo(scene: Scene, rig: CameraRig, workers: int = 1) -> RenderOutput:
    h, w = rig.height_px, rig.width_px
    tr = _trace_view(scene, rig, "left", workers)
    left = tr.color.reshape(h, w, 3)
    right, _ = render_view(scene, rig, "right", workers)

    # correspondence target: the hit itself, or the virtual image behind a mirror
    target = np.where(tr.is_mirror[:, None], tr.virtual_point, tr.real_point)
    xr, yr, zr = project_points(target, rig, "right")
    xs, _ = _pixel_grid(rig, range(0, h))
    with np.errstate(invalid="ignore"):
        in_view = np.isfinite(target[:, 0]) & (zr > 0) & (xr >= 0) & (xr < w) & (yr >= 0) & (yr < h)

    # occlusion test: re-trace the right ray towards the target
    centre, _ = rig.camera_pose("right")
    o = np.broadcast_to(centre, target.shape).copy()
    d = np.where(in_view[:, None], target - centre, np.array([0.0, 0.0, 1.0]))
    back = trace(scene, o, d)
    visible = (
        in_view
        & (back.first_index >= 0)
        & (back.is_mirror == tr.is_mirror)
        & (back.real_index == tr.real_index)
        & _same_point(back.real_point, tr.real_point)
    )
    # a mirror pixel must be seen through the same mirror
    visible &= ~tr.is_mirror | (back.first_index == tr.first_index)

    gt = np.where(visible, xs - xr, np.nan).reshape(h, w)
    gy = np.where(visible, yr, np.nan).reshape(h, w)
    return RenderOutput(left=left, right=right, layers_left=_layers(tr, rig, "left"), gt_disparity_left=gt, gt_right_y=gy)


# ---------------------------------------------------------------- demo scene

# on-screen displacement of the mirror frame, matching the 11 px reported for Q
DEMO_FRAME_SHIFT_PX = 11.0
# on-screen displacement of the reflected backdrop
DEMO_REFLECTION_SHIFT_PX = 0.2


def make_mirror_demo_scene(rig: CameraRig) -> Scene:
    """Wall with a mirror set into it, reflecting a distant backdrop and a pole.

    The wall (region Q) and the mirror surface (region P) sit at nearly the
    same depth, chosen so the wall moves ``DEMO_FRAME_SHIFT_PX`` between the
    views.  The mirror reflects content behind the cameras whose virtual
    image lies far away, so the reflection barely moves.
    """
    fb = rig.focal_px * rig.baseline_m
    z_wall = fb / DEMO_FRAME_SHIFT_PX
    z_mirror = z_wall * (1.0 - 2e-3)
    d_virtual = fb / DEMO_REFLECTION_SHIFT_PX
    z_backdrop = -(d_virtual - 2.0 * z_mirror)
    x_mid = 0.0 if rig.is_converged else rig.baseline_m / 2.0

    # extents in metres at the wall depth
    half_w = z_wall * rig.width_px / rig.focal_px
    half_h = z_wall * rig.height_px / rig.focal_px
    px_wall = z_wall / rig.focal_px  # one pixel on the wall
    mir_w = 0.5 * z_wall * rig.width_px / (2 * rig.focal_px)
    mir_h = 0.6 * z_wall * rig.height_px / (2 * rig.focal_px)

    wall = Primitive(
        "wall",
        Quad((x_mid - 2 * half_w, -2 * half_h, z_wall), (4 * half_w, 0.0, 0.0), (0.0, 4 * half_h, 0.0)),
        Checker((0.85, 0.75, 0.55), (0.35, 0.25, 0.15), cell_m=3.3 * px_wall, variation=0.5, seed=1),
    )
    mirror = Primitive(
        "mirror",
        Quad((x_mid - mir_w, -mir_h, z_mirror), (2 * mir_w, 0.0, 0.0), (0.0, 2 * mir_h, 0.0)),
        Mirror(0.9),
    )
    px_back = d_virtual / rig.focal_px
    span = 4.0 * d_virtual
    backdrop = Primitive(
        "backdrop",
        Plane((0.0, 0.0, z_backdrop), (0.0, 0.0, 1.0)),
        Checker((0.3, 0.55, 0.9), (0.9, 0.95, 1.0), cell_m=3.7 * px_back, variation=0.5, seed=2),
    )
    pole_z = z_backdrop * 0.9
    pole_w = 3.0 * (2.0 * z_mirror - pole_z) / rig.focal_px
    pole = Primitive(
        "pole",
        Quad((x_mid + 0.3 * mir_w * (2.0 * z_mirror - pole_z) / z_mirror, -span, pole_z), (pole_w, 0.0, 0.0), (0.0, 2 * span, 0.0)),
        Solid((0.1, 0.1, 0.12)),
    )
    return Scene((wall, mirror, backdrop, pole), background=(0.05, 0.05, 0.08))
