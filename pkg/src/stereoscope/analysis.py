"""Disparity estimation and stereo format classification.

The matcher is plain SAD block matching on 8-bit luma, computed with integer
box sums so that results are exact and independent of evaluation order.
Disparity search is two-sided because converged footage has both signs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .errors import EmptyClip, InsufficientValidPixels, RangeTooLarge, SizeMismatch
from .frames import luma

Label = Literal["parallel", "converged", "pseudo_stereo", "unknown"]

V_MIN = 1.0  # px^2
S_MIN = 0.05
ZERO_BAND = 0.5  # px
RATIO = 0.9
MIN_TEXTURE_VAR = 4.0  # in squared 8-bit luma levels
MIN_VALID_PIXELS = 64


def _luma_u8(frame: np.ndarray) -> np.ndarray:
    return np.round(np.clip(luma(frame), 0.0, 1.0) * 255.0).astype(np.int64)


def _box_sums(a: np.ndarray, r: int) -> np.ndarray:
    """Sums over ``(2r+1)^2`` windows centred at every pixel; 0 where the window leaves the image."""
    h, w = a.shape
    s = np.zeros((h + 1, w + 1), dtype=np.int64)
    s[1:, 1:] = a.cumsum(axis=0).cumsum(axis=1)
    k = 2 * r + 1
    out = np.zeros((h, w), dtype=np.int64)
    if h >= k and w >= k:
        out[r : h - r, r : w - r] = s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]
    return out


_BIG = np.iinfo(np.int64).max // 4


def _cost_volume(L: np.ndarray, R: np.ndarray, disps: np.ndarray, r: int) -> np.ndarray:
    """SAD of each left block against the right block ``d`` columns to its left.

    Entries whose block leaves either image hold ``_BIG``.
    """
    h, w = L.shape
    cost = np.full((disps.size, h, w), _BIG, dtype=np.int64)
    cols = np.arange(w)
    inner_rows = slice(r, h - r)
    for i, d in enumerate(disps):
        shifted = np.zeros_like(R)
        # right pixel matched to left column x is x - d
        lo, hi = max(0, d), min(w, w + d)
        shifted[:, lo:hi] = R[:, lo - d : hi - d]
        sad = _box_sums(np.abs(L - shifted), r)
        ok = (cols - d - r >= 0) & (cols - d + r <= w - 1) & (cols - r >= 0) & (cols + r <= w - 1)
        cost[i, inner_rows, :] = np.where(ok[None, :], sad[inner_rows, :], _BIG)
    return cost


def _match(L: np.ndarray, R: np.ndarray, max_abs_disp: int, block: int, ratio: float, min_texture_var: float) -> np.ndarray:
    r = block // 2
    disps = np.arange(-max_abs_disp, max_abs_disp + 1)
    cost = _cost_volume(L, R, disps, r)
    best = np.argmin(cost, axis=0)
    best_cost = np.take_along_axis(cost, best[None], axis=0)[0]
    idx = np.arange(disps.size)[:, None, None]
    near_best = np.abs(idx - best[None]) <= 1
    second = np.where(near_best, _BIG, cost).min(axis=0)

    n = block * block
    s1 = _box_sums(L, r)
    s2 = _box_sums(L * L, r)
    var_ok = (n * s2 - s1 * s1) > min_texture_var * n * n

    valid = (best_cost < _BIG) & (second < _BIG) & var_ok & (best_cost < ratio * second)
    return np.where(valid, disps[best].astype(np.float64), np.nan)


def block_match_disparity(
    left: np.ndarray,
    right: np.ndarray,
    max_abs_disp: int = 16,
    block: int = 9,
    ratio: float = RATIO,
    min_texture_var: float = MIN_TEXTURE_VAR,
    lr_check: bool = True,
) -> np.ndarray:
    """Integer disparity ``x_left - x_right`` per left pixel, NaN where unreliable.

    A pixel is kept when its block is textured, the best SAD beats the best
    non-adjacent alternative by the ratio test and, with ``lr_check``, the
    right-to-left match points back within one pixel.
    """
    if left.shape != right.shape:
        raise SizeMismatch(f"{left.shape} vs {right.shape}")
    if block < 1 or block % 2 == 0:
        raise ValueError("block size must be a positive odd number")
    h, w = left.shape[:2]
    if 2 * max_abs_disp >= w:
        raise RangeTooLarge(f"search range +-{max_abs_disp} too wide for width {w}")
    L, R = _luma_u8(left), _luma_u8(right)
    d_left = _match(L, R, max_abs_disp, block, ratio, min_texture_var)
    if not lr_check:
        return d_left
    # matching the mirrored pair gives right-view disparities with the same sign convention
    d_right = _match(R[:, ::-1], L[:, ::-1], max_abs_disp, block, ratio, min_texture_var)[:, ::-1]
    ys, xs = np.nonzero(np.isfinite(d_left))
    xr = xs - d_left[ys, xs].astype(np.int64)
    inside = (xr >= 0) & (xr < w)
    back = np.full(xs.shape, np.nan)
    back[inside] = d_right[ys[inside], xr[inside]]
    keep = np.zeros((h, w), dtype=bool)
    with np.errstate(invalid="ignore"):
        keep[ys, xs] = np.abs(back - d_left[ys, xs]) <= 1.0
    return np.where(keep, d_left, np.nan)


def disparity_sign_histogram(d: np.ndarray, zero_band: float = ZERO_BAND) -> dict:
    """Fractions of positive, negative, near-zero and invalid pixels; they sum to 1."""
    if zero_band < 0:
        raise ValueError("zero band must be non-negative")
    d = np.asarray(d, dtype=np.float64)
    total = d.size
    finite = np.isfinite(d)
    pos = int(np.count_nonzero(finite & (d > zero_band)))
    neg = int(np.count_nonzero(finite & (d < -zero_band)))
    invalid = int(total - np.count_nonzero(finite))
    zero = total - pos - neg - invalid
    return {"pos": pos / total, "neg": neg / total, "zero": zero / total, "invalid": invalid / total}


@dataclass
class FormatVerdict:
    label: Label
    pos_fraction: float
    neg_fraction: float
    disparity_variance_px2: float
    vertical_disparity_mean_px: float
    confidence: float
    frames_used: int

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "stats": {
                "pos_fraction": self.pos_fraction,
                "neg_fraction": self.neg_fraction,
                "disparity_variance_px2": self.disparity_variance_px2,
                "vertical_disparity_mean_px": self.vertical_disparity_mean_px,
                "confidence": self.confidence,
                "frames_used": self.frames_used,
            },
        }


def _vertical_offset(left: np.ndarray, right: np.ndarray, max_abs_disp: int, max_shift: int = 3, block: int = 9) -> int:
    """Global vertical disparity ``y_left - y_right`` that best explains the pair.

    For each candidate shift the per-pixel best horizontal match cost is
    averaged over the blocks valid for every shift; the cheapest shift wins.
    """
    L, R = _luma_u8(left), _luma_u8(right)
    h = L.shape[0]
    r = block // 2
    disps = np.arange(-max_abs_disp, max_abs_disp + 1)
    rows = slice(max_shift, h - max_shift)
    best, best_cost = 0, None
    for s in sorted(range(-max_shift, max_shift + 1), key=abs):
        shifted = np.zeros_like(R)
        shifted[max(0, -s) : h + min(0, -s)] = R[max(0, s) : h + min(0, s)]
        cmin = _cost_volume(L, shifted, disps, r).min(axis=0)[rows]
        ok = cmin < _BIG
        if not ok.any():
            continue
        cost = int(cmin[ok].sum()) / int(ok.sum())
        if best_cost is None or cost < best_cost:
            best, best_cost = s, cost
    # shifted[y] = R[y + s], so a left row y matches right row y + s
    return -best


def classify_format(
    left_frames,
    right_frames,
    max_abs_disp: int = 16,
    v_min: float = V_MIN,
    s_min: float = S_MIN,
    zero_band: float = ZERO_BAND,
) -> FormatVerdict:
    """Label a stereo pair as parallel, converged, pseudo-stereo or unknown.

    * converged: both signs each cover at least ``s_min`` of the pixels, i.e.
      a zero-disparity plane cuts through the scene;
    * pseudo-stereo: one sign, variance below ``v_min``; the views differ by a
      uniform horizontal shift;
    * parallel: one sign with variance of at least ``v_min``.

    Frames are sampled with stride ``max(1, N // 8)``.
    """
    left_frames = list(getattr(left_frames, "frames", left_frames))
    right_frames = list(getattr(right_frames, "frames", right_frames))
    if not left_frames or not right_frames:
        raise EmptyClip("need at least one frame per eye")
    if len(left_frames) != len(right_frames):
        raise SizeMismatch(f"{len(left_frames)} left vs {len(right_frames)} right frames")
    stride = max(1, len(left_frames) // 8)
    picks = range(0, len(left_frames), stride)

    maps = [block_match_disparity(left_frames[i], right_frames[i], max_abs_disp) for i in picks]
    vertical = [_vertical_offset(left_frames[i], right_frames[i], max_abs_disp) for i in picks]
    stack = np.stack(maps)
    hist = disparity_sign_histogram(stack, zero_band)
    vals = stack[np.isfinite(stack)].astype(np.int64)
    if vals.size < MIN_VALID_PIXELS:
        raise InsufficientValidPixels(f"only {vals.size} reliable disparities")
    # exact integer moments, so the variance does not depend on summation order
    n = vals.size
    variance = float(n * int((vals * vals).sum()) - int(vals.sum()) ** 2) / (n * n)
    pos, neg = hist["pos"], hist["neg"]

    minor, major = min(pos, neg), max(pos, neg)
    if minor >= s_min:
        label: Label = "converged"
        conf = 1.0 - s_min / minor
    elif major >= s_min and variance < v_min:
        label = "pseudo_stereo"
        conf = min(1.0 - variance / v_min, 1.0 - minor / s_min)
    elif major >= s_min and variance >= v_min:
        label = "parallel"
        conf = min(1.0 - v_min / variance, 1.0 - minor / s_min)
    else:
        label = "unknown"
        conf = 0.0
    return FormatVerdict(
        label=label,
        pos_fraction=pos,
        neg_fraction=neg,
        disparity_variance_px2=variance,
        vertical_disparity_mean_px=math.fsum(vertical) / len(vertical),
        confidence=float(min(1.0, max(0.0, conf))),
        frames_used=len(maps),
    )
