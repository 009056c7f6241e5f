from __future__ import annotations

import numpy as np
import pytest

from stereoscope.errors import InputError
from stereoscope.geometry import CameraRig, ConvergedFormat, default_rig, project_points
from stereoscope.render import (
    DEMO_FRAME_SHIFT_PX,
    DEMO_REFLECTION_SHIFT_PX,
    Checker,
    Mirror,
    Plane,
    Primitive,
    Quad,
    Scene,
    Solid,
    Sphere,
    make_mirror_demo_scene,
    render_stereo,
    render_view,
    trace,
    trace_pixels,
)

from _scenes import cluttered_scene


def _fronto_plane(z: float) -> Scene:
    return Scene((Primitive("wall", Plane((0, 0, z), (0, 0, -1)), Checker((1, 1, 1), (0, 0, 0), 0.05)),))


def _reflect(p: np.ndarray, point: np.ndarray, normal: np.ndarray) -> np.ndarray:
    n = normal / np.linalg.norm(normal)
    return p - 2.0 * ((p - point) @ n) * n


def test_sphere_hit_depth_matches_closed_form():
    scene = Scene((Primitive("s", Sphere((0.0, 0.0, 5.0), 1.0), Solid((1, 0, 0))),))
    res = trace(scene, np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]))
    assert res.first_point[0] == pytest.approx([0.0, 0.0, 4.0])
    assert res.color[0] == pytest.approx([1.0, 0.0, 0.0])
    # oblique ray: solve |t d - c|^2 = r^2 by hand
    d = np.array([0.1, 0.0, 1.0])
    c = np.array([0.0, 0.0, 5.0])
    a, b, cc = d @ d, -2 * d @ c, c @ c - 1.0
    t = (-b - np.sqrt(b * b - 4 * a * cc)) / (2 * a)
    res = trace(scene, np.zeros((1, 3)), d[None])
    assert res.first_point[0] == pytest.approx(t * d, rel=1e-12)


def test_miss_gives_background_and_nan():
    scene = Scene((Primitive("s", Sphere((0.0, 0.0, 5.0), 1.0), Solid((1, 0, 0))),), background=(0.2, 0.3, 0.4))
    res = trace(scene, np.zeros((1, 3)), np.array([[0.0, 1.0, 0.0]]))
    assert res.first_index[0] == -1
    assert res.color[0] == pytest.approx([0.2, 0.3, 0.4])
    assert np.isnan(res.first_point[0]).all()


def test_quad_bounds():
    q = Primitive("q", Quad((-1, -1, 3), (2, 0, 0), (0, 2, 0)), Solid((0, 1, 0)))
    scene = Scene((q,))
    dirs = np.array([[0.0, 0.0, 1.0], [0.3, 0.0, 1.0], [0.4, 0.0, 1.0]])
    res = trace(scene, np.zeros((3, 3)), dirs)
    assert list(res.first_index) == [0, 0, -1]


def test_fronto_plane_gt_disparity_is_fb_over_z():
    rig = CameraRig(0.063, 1000.0, 64, 40)
    out = render_stereo(_fronto_plane(6.3), rig)
    gt = out.gt_disparity_left
    valid = np.isfinite(gt)
    assert np.allclose(gt[valid], 10.0, atol=1e-9)
    # x_r = x_l - 10, so the leftmost columns fall off the right image
    assert not valid[:, :10].any() and valid[:, 10:].all()
    assert np.allclose(out.layers_left.surface, 6.3)
    assert np.isnan(out.layers_left.virtual).all()


def test_render_right_view_is_shifted_left_view():
    rig = CameraRig(0.063, 1000.0, 64, 40)
    out = render_stereo(_fronto_plane(6.3), rig)
    # integer disparity 10 on a fronto-parallel plane: right(x - 10) == left(x)
    assert np.array_equal(out.right[:, :-10], out.left[:, 10:])


def test_mirror_gt_matches_reflected_point_oracle():
    rig = CameraRig(0.063, 300.0, 96, 64)
    mirror_pt, mirror_n = np.array([0.0, 0.0, 2.0]), np.array([0.15, 0.05, -1.0])
    u = np.cross(mirror_n, [0.0, 1.0, 0.0])
    u /= np.linalg.norm(u)
    v = np.cross(mirror_n / np.linalg.norm(mirror_n), u)
    corner = mirror_pt - 0.8 * u - 0.8 * v
    scene = Scene(
        (
            Primitive("mirror", Quad(tuple(corner), tuple(1.6 * u), tuple(1.6 * v)), Mirror(0.8)),
            Primitive("back", Plane((0, 0, -3.0), (0, 0, 1)), Checker((0.9, 0.8, 0.1), (0.1, 0.2, 0.6), 0.07)),
        )
    )
    out = render_stereo(scene, rig)
    mask = out.layers_left.mirror_mask
    gt = out.gt_disparity_left
    assert mask.sum() > 500

    ys, xs = np.nonzero(mask & np.isfinite(gt))
    left = trace_pixels(scene, rig, "left", xs + 0.5, ys + 0.5)
    # independent oracle: mirror the seen point through the mirror plane and project it
    virt = np.array([_reflect(p, mirror_pt, mirror_n) for p in left.real_point])
    xr, yr, _ = project_points(virt, rig, "right")
    assert np.allclose(gt[ys, xs], xs + 0.5 - xr, atol=1e-7)
    assert np.allclose(out.gt_right_y[ys, xs], yr, atol=1e-7)
    # brute force: the right camera ray through the predicted pixel sees the same point
    right = trace_pixels(scene, rig, "right", xs + 0.5 - gt[ys, xs], out.gt_right_y[ys, xs])
    assert np.allclose(right.real_point, left.real_point, atol=1e-6)
    # virtual depth is the unfolded path length along the primary ray
    _, _, zc = project_points(virt, rig, "left")
    assert np.allclose(out.layers_left.virtual[ys, xs], zc, rtol=1e-9)


def test_mirror_color_scaled_by_reflectivity():
    scene = Scene(
        (
            Primitive("m", Quad((-1, -1, 1), (2, 0, 0), (0, 2, 0)), Mirror(0.5)),
            Primitive("b", Plane((0, 0, -1), (0, 0, 1)), Solid((0.8, 0.4, 0.2))),
        )
    )
    res = trace(scene, np.zeros((1, 3)), np.array([[0.0, 0.0, 1.0]]))
    assert res.is_mirror[0]
    assert res.color[0] == pytest.approx([0.4, 0.2, 0.1])
    assert res.virtual_point[0] == pytest.approx([0.0, 0.0, 3.0])


def test_occluded_pixels_have_no_gt():
    rig = CameraRig(0.2, 100.0, 64, 32)
    scene = Scene(
        (
            Primitive("wall", Plane((0, 0, 5), (0, 0, -1)), Checker((1, 1, 1), (0, 0, 0), 0.2)),
            Primitive("box", Quad((-0.2, -0.3, 1.0), (0.4, 0, 0), (0, 0.6, 0)), Solid((1, 0, 0))),
        )
    )
    out = render_stereo(scene, rig)
    gt = out.gt_disparity_left
    # the box moves 20 px left in the right view, the wall 4 px, so the wall
    # just left of the box is hidden from the right camera
    row = 16
    box_cols = np.nonzero(out.layers_left.surface[row] < 2)[0]
    assert box_cols.min() > 0
    assert np.isnan(gt[row, : box_cols.min()]).all()
    assert np.allclose(gt[row, box_cols[box_cols >= 20]], 20.0)
    assert np.allclose(gt[row, box_cols.max() + 1 :], 4.0)


def test_render_is_independent_of_workers():
    rig = default_rig()
    scene = cluttered_scene(4, rig)
    a = render_stereo(scene, rig, workers=1)
    b = render_stereo(scene, rig, workers=5)
    for name in ("left", "right", "gt_disparity_left"):
        assert np.array_equal(getattr(a, name), getattr(b, name), equal_nan=True)
    assert np.array_equal(a.layers_left.surface, b.layers_left.surface, equal_nan=True)


def test_converged_render_zero_disparity_at_convergence():
    rig = default_rig(convergence_m=1.5)
    scene = Scene((Primitive("wall", Plane((0, 0, 1.5), (0, 0, -1)), Checker((1, 1, 1), (0, 0, 0), 0.05)),))
    out = render_stereo(scene, rig)
    gt = out.gt_disparity_left
    # only the centre of a fronto plane lies on the zero-disparity surface
    assert abs(gt[36, 64]) < 0.05


def test_scene_json_round_trip(tmp_path):
    scene = make_mirror_demo_scene(default_rig())
    path = tmp_path / "scene.json"
    scene.save(path)
    again = Scene.load(path)
    assert again == scene
    assert again.has_mirror
    assert not scene.without_mirrors().has_mirror


def test_scene_validation(tmp_path):
    s = Solid((1, 1, 1))
    with pytest.raises(InputError):
        Scene((Primitive("a", Sphere((0, 0, 1), 1), s), Primitive("a", Sphere((0, 0, 2), 1), s)))
    with pytest.raises(InputError):
        Sphere((0, 0, 1), -1.0)
    with pytest.raises(InputError):
        Plane((0, 0, 0), (0, 0, 0))
    with pytest.raises(InputError):
        Quad((0, 0, 0), (1, 0, 0), (2, 0, 0))
    with pytest.raises(InputError):
        Solid((1.5, 0, 0))
    with pytest.raises(InputError):
        Mirror(0.0)
    with pytest.raises(InputError):
        Scene.from_dict({"primitives": [{"id": "x", "shape": {"type": "torus"}, "material": {"type": "solid"}}]})
    bad = tmp_path / "bad.json"
    bad.write_text("[")
    with pytest.raises(InputError):
        Scene.load(bad)


def test_checker_variation_breaks_periodicity():
    plain = Checker((1, 1, 1), (0, 0, 0), 0.1)
    varied = Checker((1, 1, 1), (0, 0, 0), 0.1, variation=0.5, seed=3)
    quad = Quad((0, 0, 1), (1, 0, 0), (0, 1, 0))
    pts = np.array([[0.05, 0.05, 1.0], [0.25, 0.05, 1.0], [0.45, 0.05, 1.0]])
    from stereoscope.render import _albedo

    assert np.allclose(_albedo(Primitive("p", quad, plain), pts), 1.0)
    vals = _albedo(Primitive("v", quad, varied), pts)[:, 0]
    assert len(set(np.round(vals, 6))) == 3
    assert np.all((vals >= 0.5) & (vals <= 1.0))


def test_demo_scene_closed_form_depths():
    rig = default_rig()
    scene = make_mirror_demo_scene(rig)
    out = render_stereo(scene, rig)
    fb = rig.focal_px * rig.baseline_m
    mask = out.layers_left.mirror_mask
    gt = out.gt_disparity_left
    wall = ~mask & np.isfinite(gt)
    assert np.allclose(gt[wall], DEMO_FRAME_SHIFT_PX, atol=1e-9)
    assert np.allclose(out.layers_left.surface[wall], fb / DEMO_FRAME_SHIFT_PX)
    # most of the reflection is the backdrop, whose virtual image sits at fB / 0.2
    refl = mask & np.isfinite(gt)
    assert np.median(gt[refl]) == pytest.approx(DEMO_REFLECTION_SHIFT_PX, abs=1e-9)
    assert mask.mean() == pytest.approx(0.5 * 0.6, abs=0.02)


def test_render_view_shapes():
    rig = CameraRig(0.1, 50.0, 20, 10, format=ConvergedFormat(2.0))
    frame, layers = render_view(_fronto_plane(2.0), rig, "right")
    assert frame.shape == (10, 20, 3)
    assert layers.surface.shape == (10, 20)
    with pytest.raises(InputError):
        render_view(_fronto_plane(2.0), rig, "middle")


def test_virtual_depth_is_never_shallower_than_surface():
    rig = default_rig()
    out = render_stereo(make_mirror_demo_scene(rig), rig)
    layers = out.layers_left
    both = np.isfinite(layers.virtual)
    assert both.any()
    assert not (both & ~layers.mirror_mask).any()
    assert np.all(layers.virtual[both] >= layers.surface[both])


@pytest.mark.parametrize("which", ["cluttered", "mirror"])
def test_gt_correspondence_sees_same_colour(which):
    # subpixel re-trace of the right camera: matte and mirror pixels agree in colour
    rig = default_rig(width_px=64, height_px=64)
    scene = cluttered_scene(2, rig) if which == "cluttered" else make_mirror_demo_scene(rig)
    out = render_stereo(scene, rig)
    ys, xs = np.meshgrid(np.arange(64) + 0.5, np.arange(64) + 0.5, indexing="ij")
    ok = np.isfinite(out.gt_disparity_left)
    assert ok.mean() > 0.5
    tr = trace_pixels(scene, rig, "right", xs[ok] - out.gt_disparity_left[ok], out.gt_right_y[ok])
    assert np.max(np.abs(tr.color - out.left[ok])) <= 2 / 255


def test_gt_sign_by_rig_format():
    par = default_rig()
    gt = render_stereo(cluttered_scene(4, par), par).gt_disparity_left
    assert np.all(gt[np.isfinite(gt)] > 0)
    conv = default_rig(convergence_m=0.8)
    gt = render_stereo(cluttered_scene(4, conv, z_near=0.3, z_obj_max=0.55), conv).gt_disparity_left
    valid = gt[np.isfinite(gt)]
    assert (valid > 0).any() and (valid < 0).any()
