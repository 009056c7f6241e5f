"""Seeded synthetic scenes and clips shared by the test modules."""

from __future__ import annotations

import numpy as np

from stereoscope.geometry import CameraRig, default_rig
from stereoscope.pipeline import Clip
from stereoscope.render import Checker, Plane, Primitive, Quad, Scene, Sphere, render_stereo


def _checker(rng: np.random.Generator, cell_m: float, seed: int) -> Checker:
    a = tuple(rng.uniform(0.55, 0.95, 3))
    b = tuple(rng.uniform(0.05, 0.4, 3))
    return Checker(a, b, cell_m=cell_m, variation=0.6, seed=seed)


def cluttered_scene(
    seed: int,
    rig: CameraRig,
    z_near: float = 0.35,
    z_far: float = 2.0,
    shift_m: float = 0.0,
    z_obj_max: float | None = None,
) -> Scene:
    """Textured back wall at ``z_far`` with spheres and quads in front of it.

    ``shift_m`` slides every object sideways, which is how clips get motion.
    """
    rng = np.random.default_rng(seed)
    f = rig.focal_px
    x_mid = 0.0 if rig.is_converged else rig.baseline_m / 2.0
    prims = [
        Primitive(
            "wall",
            Plane((0.0, 0.0, z_far), (0.0, 0.0, -1.0)),
            _checker(rng, cell_m=3.0 * z_far / f, seed=seed * 7 + 1),
        )
    ]
    for k in range(6):
        z = rng.uniform(z_near, 0.75 * z_far if z_obj_max is None else z_obj_max)
        half_w = z * rig.width_px / (2 * f)
        half_h = z * rig.height_px / (2 * f)
        cx = x_mid + shift_m + rng.uniform(-0.7, 0.7) * half_w
        cy = rng.uniform(-0.6, 0.6) * half_h
        size = rng.uniform(0.15, 0.35) * half_w
        mat = _checker(rng, cell_m=3.0 * z / f, seed=seed * 7 + 2 + k)
        if k % 2 == 0:
            shape = Sphere((cx, cy, z + size), size)
        else:
            shape = Quad((cx - size, cy - size, z), (2 * size, 0.0, 0.0), (0.0, 2 * size, 0.0))
        prims.append(Primitive(f"obj{k}", shape, mat))
    return Scene(tuple(prims), background=(0.0, 0.0, 0.0))


def render_clip(seed: int, rig: CameraRig, frames: int = 2, **scene_kw) -> tuple[Clip, Clip]:
    lefts, rights = [], []
    for i in range(frames):
        out = render_stereo(cluttered_scene(seed, rig, shift_m=0.01 * i, **scene_kw), rig)
        lefts.append(out.left)
        rights.append(out.right)
    tag = rig.format.name
    return (
        Clip(lefts, fps=16.0, eye="left", format_tag=tag, source_id=f"synthetic{seed}"),
        Clip(rights, fps=16.0, eye="right", format_tag=tag, source_id=f"synthetic{seed}"),
    )


def pseudo_stereo_clip(seed: int, shift_px: int = 12, frames: int = 2) -> tuple[Clip, Clip]:
    """Both eyes cropped from one wider mono render, ``shift_px`` apart."""
    wide = default_rig(width_px=128 + shift_px)
    # keep the focal length of the 128-px rig so content scale matches the other clips
    wide = CameraRig(wide.baseline_m, default_rig().focal_px, wide.width_px, wide.height_px)
    lefts, rights = [], []
    for i in range(frames):
        frame = render_stereo(cluttered_scene(seed, wide, shift_m=0.01 * i), wide).left
        # a point at wide column c lands at c in the left eye and c - shift_px in the right
        lefts.append(frame[:, : frame.shape[1] - shift_px].copy())
        rights.append(frame[:, shift_px:].copy())
    return (
        Clip(lefts, fps=16.0, eye="left", format_tag="unknown", source_id=f"pseudo{seed}"),
        Clip(rights, fps=16.0, eye="right", format_tag="unknown", source_id=f"pseudo{seed}"),
    )
