"""Stereo video curation: clip storage, SBS handling, border crops, cuts,
frame-rate resampling and fixed-length segmentation.

Clips are image sequences on disk (``manifest.json`` plus ``frame_%06d``
files); no video codecs are involved.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import (
    AllBlack,
    EmptyClip,
    InputError,
    ManifestMismatch,
    MissingFrame,
    OddWidth,
    SizeMismatch,
)
from .frames import luma, read_pfm, read_png, read_png16, write_pfm, write_png

TARGET_FPS = 16.0
SEGMENT_FRAMES = 81
TARGET_SIZE = (832, 480)

EYES = ("left", "right", "sbs", "mono")
FORMAT_TAGS = ("parallel", "converged", "unknown")
KINDS = ("rgb", "depth")

_FRAME_RE = re.compile(r"^frame_(\d{6})\.(png|pfm)$")


@dataclass
class Clip:
    """Ordered frames plus metadata.

    RGB frames are ``(H, W, 3)`` floats in [0, 1]; depth frames are ``(H, W)``
    metres with NaN (or non-positive values) marking invalid pixels.
    """

    frames: list[np.ndarray]
    fps: float
    eye: str = "mono"
    format_tag: str = "unknown"
    source_id: str = ""
    kind: str = "rgb"
    extra: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.frames = [np.asarray(f, dtype=np.float64) for f in self.frames]
        if not self.fps > 0:
            raise InputError(f"fps must be positive, got {self.fps}")
        if self.eye not in EYES:
            raise InputError(f"unknown eye {self.eye!r}")
        if self.format_tag not in FORMAT_TAGS:
            raise InputError(f"unknown format tag {self.format_tag!r}")
        if self.kind not in KINDS:
            raise InputError(f"unknown clip kind {self.kind!r}")
        shapes = {f.shape for f in self.frames}
        if len(shapes) > 1:
            raise SizeMismatch(f"frames differ in size: {sorted(shapes)}")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def height(self) -> int:
        return self.frames[0].shape[0] if self.frames else 0

    @property
    def width(self) -> int:
        return self.frames[0].shape[1] if self.frames else 0

    @property
    def manifest(self) -> dict:
        m = {
            "width": self.width,
            "height": self.height,
            "fps": self.fps,
            "frame_count": len(self.frames),
            "eye": self.eye,
            "format_tag": self.format_tag,
            "source_id": self.source_id,
            "kind": self.kind,
        }
        m.update(self.extra)
        return m

    def with_frames(self, frames: list[np.ndarray], **changes) -> "Clip":
        return replace(self, frames=list(frames), **changes)


@dataclass(frozen=True)
class CropRect:
    x0: int
    y0: int
    x1: int
    y1: int

    def validate(self, width: int, height: int) -> None:
        if not (0 <= self.x0 < self.x1 <= width and 0 <= self.y0 < self.y1 <= height):
            raise InputError(f"crop {self} does not fit a {width}x{height} frame")

    def apply(self, frame: np.ndarray) -> np.ndarray:
        return frame[self.y0 : self.y1, self.x0 : self.x1]

    def to_dict(self) -> dict:
        return {"x0": self.x0, "y0": self.y0, "x1": self.x1, "y1": self.y1}


# ---------------------------------------------------------------- storage


def save_clip(clip: Clip, directory: str | Path, ext: str | None = None) -> Path:
    """Write frames and ``manifest.json``.  Depth clips default to PFM."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    ext = ext or ("pfm" if clip.kind == "depth" else "png")
    if ext not in ("png", "pfm"):
        raise InputError(f"unsupported frame format {ext!r}")
    for stale in out.glob("frame_*"):
        if _FRAME_RE.match(stale.name):
            stale.unlink()
    for i, frame in enumerate(clip.frames):
        path = out / f"frame_{i:06d}.{ext}"
        if ext == "png":
            if clip.kind == "depth":
                raise InputError("depth clips are stored as PFM")
            write_png(path, frame)
        else:
            write_pfm(path, frame)
    manifest = dict(clip.manifest, frame_ext=ext)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def load_clip(directory: str | Path) -> Clip:
    root = Path(directory)
    mpath = root / "manifest.json"
    if not mpath.is_file():
        raise InputError(f"{root}: missing manifest.json")
    try:
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestMismatch(f"{mpath}: {exc}") from exc

    numbered = []
    for p in root.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            numbered.append((int(m.group(1)), p))
    numbered.sort()
    for expected, (idx, p) in enumerate(numbered):
        if idx != expected:
            raise MissingFrame(f"{root}: frame {expected:06d} missing before {p.name}")

    count = manifest.get("frame_count")
    if count != len(numbered):
        raise ManifestMismatch(f"{root}: manifest lists {count} frames, found {len(numbered)}")

    kind = manifest.get("kind", "rgb")
    scale = manifest.get("depth_scale")
    frames = []
    for _, p in numbered:
        if p.suffix == ".pfm":
            frames.append(read_pfm(p))
        elif kind == "depth":
            if scale is None:
                raise ManifestMismatch(f"{root}: depth PNG frames need a depth_scale field")
            raw = read_png16(p)
            frames.append(np.where(raw > 0, raw * float(scale), np.nan))
        else:
            frames.append(read_png(p))
    if kind == "depth":
        frames = [f if f.ndim == 2 else f[..., 0] for f in frames]

    try:
        clip = Clip(
            frames=frames,
            fps=float(manifest["fps"]),
            eye=manifest.get("eye", "mono"),
            format_tag=manifest.get("format_tag", "unknown"),
            source_id=manifest.get("source_id", ""),
            kind=kind,
            extra={k: v for k, v in manifest.items() if k == "depth_scale"},
        )
    except SizeMismatch as exc:
        raise ManifestMismatch(f"{root}: {exc}") from exc
    except KeyError as exc:
        raise ManifestMismatch(f"{root}: manifest lacks {exc}") from exc
    if frames and (manifest.get("width") != clip.width or manifest.get("height") != clip.height):
        raise ManifestMismatch(
            f"{root}: manifest size {manifest.get('width')}x{manifest.get('height')} "
            f"!= frames {clip.width}x{clip.height}"
        )
    return clip


# ---------------------------------------------------------------- SBS


def split_sbs(frame: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = frame.shape[1]
    if w % 2:
        raise OddWidth(f"side-by-side frame width {w} is odd")
    half = w // 2
    return frame[:, :half].copy(), frame[:, half:].copy()


def join_sbs(left: np.ndarray, right: np.ndarray) -> np.ndarray:
    if left.shape != right.shape:
        raise SizeMismatch(f"{left.shape} vs {right.shape}")
    return np.concatenate([left, right], axis=1)


def split_sbs_clip(clip: Clip) -> tuple[Clip, Clip]:
    pairs = [split_sbs(f) for f in clip.frames]
    left = clip.with_frames([p[0] for p in pairs], eye="left")
    right = clip.with_frames([p[1] for p in pairs], eye="right")
    return left, right


def join_sbs_clip(left: Clip, right: Clip) -> Clip:
    if len(left) != len(right):
        raise SizeMismatch("left and right clips differ in length")
    return left.with_frames([join_sbs(a, b) for a, b in zip(left.frames, right.frames)], eye="sbs")


# ---------------------------------------------------------------- borders


def _band(black: np.ndarray) -> int:
    """Length of the symmetric run of True at both ends of a 1-D mask."""
    n = black.size
    lead = n if black.all() else int(np.argmin(black))
    trail = n if black.all() else int(np.argmin(black[::-1]))
    return min(lead, trail)


def detect_black_borders(clip: Clip, luma_thresh: float = 8 / 255, frame_frac: float = 0.99) -> CropRect:
    """Symmetric crop that removes black bars on all four sides.

    A column (row) counts as black when its mean luma is at most
    ``luma_thresh`` in at least ``frame_frac`` of the frames.  The band kept
    per axis is the shorter of the two sides so the crop stays centred.
    """
    if not clip.frames:
        raise EmptyClip("cannot detect borders on an empty clip")
    lumas = np.stack([luma(f) for f in clip.frames])  # (N, H, W)
    col_black = ((lumas.mean(axis=1) <= luma_thresh).mean(axis=0)) >= frame_frac
    row_black = ((lumas.mean(axis=2) <= luma_thresh).mean(axis=0)) >= frame_frac
    if col_black.all() or row_black.all():
        raise AllBlack("every row or column is black")
    bx, by = _band(col_black), _band(row_black)
    return CropRect(bx, by, clip.width - bx, clip.height - by)


def crop_clip(clip: Clip, rect: CropRect) -> Clip:
    rect.validate(clip.width, clip.height)
    return clip.with_frames([rect.apply(f).copy() for f in clip.frames])


# ---------------------------------------------------------------- cuts & time


def detect_shot_cuts(clip: Clip, threshold: float = 0.3) -> list[int]:
    """Indices ``i`` where frame ``i`` starts a new shot.

    Mean absolute luma difference between consecutive frames, a simple
    content detector; ``threshold`` is in luma units.
    """
    cuts = []
    prev = None
    for i, frame in enumerate(clip.frames):
        cur = luma(frame)
        if prev is not None and float(np.mean(np.abs(cur - prev))) > threshold:
            cuts.append(i)
        prev = cur
    return cuts


def split_at_cuts(clip: Clip, cuts: list[int]) -> list[Clip]:
    bounds = [0, *cuts, len(clip)]
    return [clip.with_frames(clip.frames[a:b]) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


def _round_half_up(x: Fraction) -> int:
    return math.floor(x + Fraction(1, 2))


def resample_indices(n_frames: int, src_fps: float, target_fps: float) -> list[int]:
    """Nearest-frame map: output ``k`` takes input ``round(k * src / target)``."""
    if not target_fps > 0 or not src_fps > 0:
        raise InputError("frame rates must be positive")
    if n_frames == 0:
        return []
    ratio = Fraction(src_fps).limit_denominator(1_000_000) / Fraction(target_fps).limit_denominator(1_000_000)
    count = max(1, math.ceil(n_frames / ratio))
    return [min(_round_half_up(k * ratio), n_frames - 1) for k in range(count)]


def resample_fps(clip: Clip, target: float = TARGET_FPS) -> Clip:
    idx = resample_indices(len(clip), clip.fps, target)
    return clip.with_frames([clip.frames[i] for i in idx], fps=float(target))


def segment_clips(clip: Clip, seg_len: int = SEGMENT_FRAMES, keep_odd: bool = True) -> list[Clip]:
    """Non-overlapping ``seg_len`` windows; the short tail is dropped.

    With ``keep_odd`` only segments 1, 3, 5, ... (1-based) survive.
    """
    if seg_len < 1:
        raise InputError("segment length must be at least 1")
    out = []
    for k in range(len(clip) // seg_len):
        if keep_odd and k % 2 == 1:
            continue
        seg = clip.frames[k * seg_len : (k + 1) * seg_len]
        out.append(clip.with_frames(seg, source_id=f"{clip.source_id}#seg{k + 1:03d}"))
    return out


# ---------------------------------------------------------------- resize


def resize_frame(frame: np.ndarray, size: tuple[int, int] = TARGET_SIZE) -> np.ndarray:
    w, h = size
    if frame.shape[1] == w and frame.shape[0] == h:
        return frame.copy()
    chans = frame[..., None] if frame.ndim == 2 else frame
    out = np.stack(
        [
            np.asarray(Image.fromarray(chans[..., c].astype(np.float32), mode="F").resize((w, h), Image.BICUBIC))
            for c in range(chans.shape[2])
        ],
        axis=-1,
    ).astype(np.float64)
    out = np.clip(out, 0.0, 1.0)
    return out[..., 0] if frame.ndim == 2 else out


def resize_clip(clip: Clip, size: tuple[int, int] = TARGET_SIZE) -> Clip:
    return clip.with_frames([resize_frame(f, size) for f in clip.frames])


# ---------------------------------------------------------------- composed


def sbs_segment_to_pair(segment: Clip, size: tuple[int, int] | None = TARGET_SIZE) -> tuple[Clip, Clip]:
    """SBS segment to a border-free left/right pair.

    Borders are measured on the left eye and the same crop is applied to
    both eyes.
    """
    left, right = split_sbs_clip(segment)
    rect = detect_black_borders(left)
    left, right = crop_clip(left, rect), crop_clip(right, rect)
    if size is not None:
        left, right = resize_clip(left, size), resize_clip(right, size)
    return left, right


def movie_to_pairs(
    movie: Clip,
    fps: float = TARGET_FPS,
    seg_len: int = SEGMENT_FRAMES,
    cut_threshold: float = 0.3,
    size: tuple[int, int] | None = TARGET_SIZE,
) -> list[tuple[Clip, Clip]]:
    """Full SBS movie curation: resample, cut into shots, segment, split, crop."""
    if not movie.frames:
        raise EmptyClip("movie has no frames")
    movie = resample_fps(movie, fps)
    pairs = []
    for shot in split_at_cuts(movie, detect_shot_cuts(movie, cut_threshold)):
        for seg in segment_clips(shot, seg_len, keep_odd=True):
            try:
                pairs.append(sbs_segment_to_pair(seg, size))
            except AllBlack:
                continue
    return pairs

