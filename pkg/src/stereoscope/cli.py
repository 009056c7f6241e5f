"""``stereoscope`` command line.

Every subcommand prints a run report as JSON on stdout.  With ``--out`` the
artifacts, a ``result.json`` payload (where the command has one) and the
``report.json`` land in that directory.  Exit codes: 0 ok, 2 bad input,
3 domain error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .analysis import classify_format
from .dwi import Constant, HorizontalExtend, ambiguity_report, dwi_warp_clip, inpaint_holes
from .errors import InputError, StereoError
from .flow import CONVERGED, PARALLEL, T0, VelocityField, cycle_objective, euler_integrate, feed_forward_predict
from .flow import flow_match_loss, lerp_path, stratified_times
from .frames import sha256_file, write_pfm, write_png
from .geometry import CameraRig, default_rig
from .metrics import CYCLE_WEIGHT, evaluate_frames
from .pipeline import (
    SEGMENT_FRAMES,
    TARGET_FPS,
    Clip,
    crop_clip,
    detect_black_borders,
    detect_shot_cuts,
    join_sbs_clip,
    load_clip,
    resample_fps,
    save_clip,
    segment_clips,
    split_sbs_clip,
)
from .render import Scene, make_mirror_demo_scene, render_stereo

log = logging.getLogger("stereoscope")


class RunContext:
    """Collects inputs, outputs and the result payload for the run report."""

    def __init__(self, command: str, out: Path | None, workers: int):
        self.command = command
        self.out = out
        self.workers = workers
        self.inputs: list[dict] = []
        self.outputs: list[Path] = []
        self.result = None

    def add_input(self, path: str | Path) -> Path:
        p = Path(path)
        if not p.exists():
            raise FileNotFoundError(f"input not found: {p}")
        self.inputs.append({"path": str(p), "sha256": _hash_path(p)})
        return p

    def output(self, name: str) -> Path:
        if self.out is None:
            raise InputError(f"{self.command} needs --out")
        p = self.out / name
        p.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(p)
        return p

    def output_dir(self, name: str) -> Path:
        p = self.output(name)
        p.mkdir(parents=True, exist_ok=True)
        return p


def _hash_path(p: Path) -> str:
    if p.is_file():
        return sha256_file(p)
    h = hashlib.sha256()
    for f in sorted(x for x in p.rglob("*") if x.is_file()):
        h.update(str(f.relative_to(p)).encode("utf-8"))
        h.update(bytes.fromhex(sha256_file(f)))
    return h.hexdigest()


def _output_entries(ctx: RunContext) -> list[dict]:
    entries = []
    for p in ctx.outputs:
        if not p.exists():
            continue
        rel = str(p.relative_to(ctx.out)) if ctx.out is not None else str(p)
        entries.append({"path": rel, "sha256": _hash_path(p)})
    return entries


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")


def _result(ctx: RunContext, payload) -> None:
    ctx.result = payload
    if ctx.out is not None:
        _write_json(ctx.output("result.json"), payload)


def _load_rig(path: str | None) -> CameraRig:
    return default_rig() if path is None else CameraRig.load(path)


def _parse_rgb(text: str) -> tuple[float, float, float]:
    try:
        parts = [float(v) for v in text.split(",")]
    except ValueError as exc:
        raise InputError(f"bad colour {text!r}") from exc
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or not all(0.0 <= v <= 1.0 for v in parts):
        raise InputError(f"colour must be one or three values in [0, 1], got {text!r}")
    return tuple(parts)


def _mask_frames(clip: Clip) -> list[np.ndarray]:
    return [(f if f.ndim == 2 else f.mean(axis=2)) > 0.5 for f in clip.frames]


# ---------------------------------------------------------------- commands


def cmd_render(args, ctx: RunContext) -> None:
    if args.demo_mirror:
        rig = _load_rig(args.rig and str(ctx.add_input(args.rig)))
        scene = make_mirror_demo_scene(rig)
    else:
        if args.scene is None:
            raise InputError("render needs --scene or --demo-mirror")
        scene = Scene.load(ctx.add_input(args.scene))
        rig = _load_rig(args.rig and str(ctx.add_input(args.rig)))
    if ctx.out is None:
        raise InputError("render needs --out")
    out = render_stereo(scene, rig, workers=ctx.workers)
    write_png(ctx.output("left.png"), out.left)
    write_png(ctx.output("right.png"), out.right)
    write_pfm(ctx.output("depth_surface.pfm"), out.layers_left.surface)
    write_pfm(ctx.output("depth_virtual.pfm"), out.layers_left.virtual)
    write_png(ctx.output("mirror_mask.png"), out.layers_left.mirror_mask)
    write_pfm(ctx.output("gt_disparity.pfm"), out.gt_disparity_left)
    if args.clip_frames > 0:
        n = args.clip_frames
        meta = dict(fps=args.fps, format_tag=rig.format.name, source_id="render")
        save_clip(Clip([out.left] * n, eye="left", **meta), ctx.output_dir("clips/left"))
        save_clip(Clip([out.right] * n, eye="right", **meta), ctx.output_dir("clips/right"))
        save_clip(Clip([out.layers_left.surface] * n, eye="left", kind="depth", **meta), ctx.output_dir("clips/depth"))
    gt = out.gt_disparity_left
    ctx.result = {
        "rig": rig.to_dict(),
        "mirror_pixels": int(out.layers_left.mirror_mask.sum()),
        "gt_valid_fraction": float(np.isfinite(gt).mean()),
    }


def cmd_convert_dwi(args, ctx: RunContext) -> None:
    left = load_clip(ctx.add_input(args.left_dir))
    depth = load_clip(ctx.add_input(args.depth_dir))
    rig = CameraRig.load(ctx.add_input(args.rig))
    strategy = HorizontalExtend() if args.fill == "horizontal" else Constant(_parse_rgb(args.fill_color))
    warps = dwi_warp_clip(left, depth, rig, workers=ctx.workers)
    right = left.with_frames([inpaint_holes(w, strategy) for w in warps], eye="right", format_tag="parallel")
    valid = left.with_frames([np.repeat((~w.holes)[..., None], 3, axis=2).astype(np.float64) for w in warps], eye="right")
    save_clip(right, ctx.output_dir("right"))
    save_clip(valid, ctx.output_dir("valid"))
    payload = {
        "frames": len(right),
        "fill": args.fill,
        "hole_fraction": float(np.mean([w.holes.mean() for w in warps])),
    }
    if args.fill == "constant":
        payload["fill_color"] = list(strategy.rgb)
    _result(ctx, payload)


def cmd_metrics(args, ctx: RunContext) -> None:
    a = load_clip(ctx.add_input(args.a_dir))
    b = load_clip(ctx.add_input(args.b_dir))
    masks = _mask_frames(load_clip(ctx.add_input(args.mask))) if args.mask else None
    _result(ctx, evaluate_frames(a.frames, b.frames, masks).to_dict())


def cmd_analyze(args, ctx: RunContext) -> None:
    left = load_clip(ctx.add_input(args.left_dir))
    right = load_clip(ctx.add_input(args.right_dir))
    _result(ctx, classify_format(left, right, max_abs_disp=args.max_disp).to_dict())


def cmd_ambiguity(args, ctx: RunContext) -> None:
    rig = _load_rig(args.rig and str(ctx.add_input(args.rig)))
    scene = Scene.load(ctx.add_input(args.scene)) if args.scene else make_mirror_demo_scene(rig)
    _result(ctx, ambiguity_report(scene, rig, workers=ctx.workers).to_dict())


def cmd_sbs(args, ctx: RunContext) -> None:
    if args.action == "split":
        if len(args.inputs) != 1:
            raise InputError("sbs split takes one clip directory")
        left, right = split_sbs_clip(load_clip(ctx.add_input(args.inputs[0])))
        save_clip(left, ctx.output_dir("left"))
        save_clip(right, ctx.output_dir("right"))
        _result(ctx, {"frames": len(left), "width": left.width, "height": left.height})
    else:
        if len(args.inputs) != 2:
            raise InputError("sbs join takes left and right clip directories")
        left = load_clip(ctx.add_input(args.inputs[0]))
        right = load_clip(ctx.add_input(args.inputs[1]))
        sbs = join_sbs_clip(left, right)
        save_clip(sbs, ctx.output_dir("sbs"))
        _result(ctx, {"frames": len(sbs), "width": sbs.width, "height": sbs.height})


def cmd_crop_borders(args, ctx: RunContext) -> None:
    left = load_clip(ctx.add_input(args.left_dir))
    rect = detect_black_borders(left, args.luma_thresh, args.frame_frac)
    save_clip(crop_clip(left, rect), ctx.output_dir("left"))
    if args.right_dir:
        right = load_clip(ctx.add_input(args.right_dir))
        save_clip(crop_clip(right, rect), ctx.output_dir("right"))
    _result(ctx, {"rect": rect.to_dict()})


def cmd_cuts(args, ctx: RunContext) -> None:
    clip = load_clip(ctx.add_input(args.clip_dir))
    _result(ctx, {"cuts": detect_shot_cuts(clip, args.threshold), "frames": len(clip)})


def cmd_resample(args, ctx: RunContext) -> None:
    clip = load_clip(ctx.add_input(args.clip_dir))
    out = resample_fps(clip, args.fps)
    save_clip(out, ctx.output_dir("clip"))
    _result(ctx, {"frames_in": len(clip), "frames_out": len(out), "fps": out.fps})


def cmd_segment(args, ctx: RunContext) -> None:
    clip = load_clip(ctx.add_input(args.clip_dir))
    segs = segment_clips(clip, args.len, args.keep_odd)
    for i, seg in enumerate(segs):
        save_clip(seg, ctx.output_dir(f"seg_{i:03d}"))
    _result(ctx, {"segments": len(segs), "frames_each": args.len, "source_frames": len(clip)})


def _demo_fields(kind: str, dim: int, rng: np.random.Generator, z0: np.ndarray, z1: np.ndarray):
    if kind == "constant":
        true_v = z1 - z0
        return VelocityField.uniform(lambda z, t: true_v)
    if kind == "linear":
        a = rng.normal(scale=0.5, size=(dim, dim))
        return VelocityField.uniform(lambda z, t: a @ z)
    a_par = np.eye(dim) + rng.normal(scale=0.1, size=(dim, dim))
    a_con = np.eye(dim) + rng.normal(scale=0.1, size=(dim, dim))
    return VelocityField.affine({PARALLEL: (a_par, np.full(dim, 0.25)), CONVERGED: (a_con, np.full(dim, -0.25))})


def cmd_flow_demo(args, ctx: RunContext) -> None:
    rng = np.random.default_rng(args.seed)
    dim = args.dim
    z0 = rng.normal(size=dim)
    z1 = rng.normal(size=dim)
    field = _demo_fields(args.field, dim, rng, z0, z1)
    ts = stratified_times(args.samples, args.seed)
    trace: list = []
    z_end = euler_integrate(field, z1, args.steps, 1.0 / args.steps, args.tag, trace=trace)
    path = [lerp_path(z0, z1, float(t)).z.tolist() for t in np.linspace(0.0, 1.0, 5)]
    ff = feed_forward_predict(field, z0, args.t0, args.tag)
    z_r = ff + rng.normal(scale=0.01, size=dim)
    terms = cycle_objective(field, field, z0, z_r, args.lam, args.tag, args.t0)
    _result(
        ctx,
        {
            "field": args.field,
            "tag": args.tag,
            "seed": args.seed,
            "z0": z0.tolist(),
            "z1": z1.tolist(),
            "path": path,
            "flow_match_loss": flow_match_loss(field, z0, z1, ts, args.tag),
            "euler": [{"t": s.t, "z": s.z.tolist()} for s in trace],
            "euler_error": float(np.linalg.norm(z_end - z0)),
            "feed_forward": {"t0": args.t0, "z": ff.tolist()},
            "cycle": terms.to_dict(),
        },
    )


# ---------------------------------------------------------------- parser


def _default_workers() -> int:
    env = os.environ.get("STEREOSCOPE_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, help="output directory for artifacts and report.json")
    common.add_argument("--workers", type=int, default=None, help="worker threads (default: $STEREOSCOPE_WORKERS or CPU count)")
    common.add_argument("--quiet", action="store_true", help="suppress log messages")

    parser = argparse.ArgumentParser(prog="stereoscope", description="Stereo geometry, DWI baseline and stereo-video curation tools.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", parents=[common], help="render the ground-truth stereo oracle")
    p.add_argument("--scene", help="scene JSON")
    p.add_argument("--rig", help="rig JSON (default: 128x72, 90 deg hfov, 6.3 cm baseline)")
    p.add_argument("--demo-mirror", action="store_true", help="use the built-in mirror demo scene")
    p.add_argument("--clip-frames", type=int, default=0, help="also write static left/right/depth clips of N frames")
    p.add_argument("--fps", type=float, default=TARGET_FPS)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("convert-dwi", parents=[common], help="depth-warp-inpaint a left clip into a right clip")
    p.add_argument("left_dir")
    p.add_argument("depth_dir")
    p.add_argument("--rig", required=True)
    p.add_argument("--fill", choices=("horizontal", "constant"), default="horizontal")
    p.add_argument("--fill-color", default="0.5", help="constant fill colour, 'v' or 'r,g,b'")
    p.set_defaults(func=cmd_convert_dwi)

    p = sub.add_parser("metrics", parents=[common], help="PSNR / SSIM / MS-SSIM between two clips")
    p.add_argument("a_dir")
    p.add_argument("b_dir")
    p.add_argument("--mask", help="clip of masks; bright pixels are evaluated")
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("analyze", parents=[common], help="classify a stereo pair's format")
    p.add_argument("left_dir")
    p.add_argument("right_dir")
    p.add_argument("--max-disp", type=int, default=16)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("ambiguity", parents=[common], help="DWI error on mirror versus non-mirror pixels")
    p.add_argument("--rig")
    p.add_argument("--scene", help="scene JSON with a mirror (default: built-in demo)")
    p.set_defaults(func=cmd_ambiguity)

    p = sub.add_parser("sbs", parents=[common], help="split or join side-by-side clips")
    p.add_argument("action", choices=("split", "join"))
    p.add_argument("inputs", nargs="+")
    p.set_defaults(func=cmd_sbs)

    p = sub.add_parser("crop-borders", parents=[common], help="detect black borders on the left eye, crop both eyes")
    p.add_argument("left_dir")
    p.add_argument("--right-dir")
    p.add_argument("--luma-thresh", type=float, default=8 / 255)
    p.add_argument("--frame-frac", type=float, default=0.99)
    p.set_defaults(func=cmd_crop_borders)

    p = sub.add_parser("cuts", parents=[common], help="shot boundary detection")
    p.add_argument("clip_dir")
    p.add_argument("--threshold", type=float, default=0.3)
    p.set_defaults(func=cmd_cuts)

    p = sub.add_parser("resample", parents=[common], help="nearest-frame frame-rate conversion")
    p.add_argument("clip_dir")
    p.add_argument("--fps", type=float, default=TARGET_FPS)
    p.set_defaults(func=cmd_resample)

    p = sub.add_parser("segment", parents=[common], help="fixed-length segmentation")
    p.add_argument("clip_dir")
    p.add_argument("--len", type=int, default=SEGMENT_FRAMES)
    p.add_argument("--keep-odd", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("flow-demo", parents=[common], help="rectified-flow numerics trace on an analytic field")
    p.add_argument("--field", choices=("constant", "linear", "switch"), default="constant")
    p.add_argument("--dim", type=int, default=4)
    p.add_argument("--steps", type=int, default=10)
    p.add_argument("--samples", type=int, default=8)
    p.add_argument("--tag", choices=(PARALLEL, CONVERGED), default=PARALLEL)
    p.add_argument("--t0", type=float, default=T0)
    p.add_argument("--lambda", dest="lam", type=float, default=CYCLE_WEIGHT)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_flow_demo)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s", stream=sys.stderr)
    workers = args.workers if args.workers is not None else _default_workers()
    if workers < 1:
        print("stereoscope: --workers must be at least 1", file=sys.stderr)
        return 2
    ctx = RunContext(args.command, args.out, workers)
    if ctx.out is not None:
        ctx.out.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()
    error = None
    code = 0
    try:
        args.func(args, ctx)
    except StereoError as exc:
        error, code = f"{type(exc).__name__}: {exc}", exc.exit_code
    except FileNotFoundError as exc:
        error, code = f"FileNotFound: {exc}", 2
    except OSError as exc:
        error, code = f"IOError: {exc}", 4

    report = {
        "command": args.command,
        "version": __version__,
        "inputs": ctx.inputs,
        "outputs": _output_entries(ctx),
        "result": ctx.result,
        "wall_time_s": round(time.perf_counter() - start, 6),
        "worker_count": workers,
        "error": error,
    }
    if error:
        log.error(error)
    else:
        log.info("%s finished in %.3f s", args.command, report["wall_time_s"])
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    if ctx.out is not None:
        try:
            (ctx.out / "report.json").write_text(text + "\n", encoding="utf-8")
        except OSError as exc:
            log.error("could not write report: %s", exc)
            code = code or 4
    print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
