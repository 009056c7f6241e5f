"""Image quality metrics (PSNR, SSIM, MS-SSIM), disparity error, the
warp cycle residual and the reconstruction-plus-cycle objective.

Masks are boolean maps where True marks pixels that take part in a metric.
SSIM-family metrics only use windows lying entirely inside the mask, so
pixels outside it can never influence a reported value.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import EmptyMask, EmptyOverlap, LengthMismatch, NegativeTerm, SizeMismatch, TooSmall
from .frames import luma

K1, K2 = 0.01, 0.03
DATA_RANGE = 1.0
WINDOW = 11
SIGMA = 1.5
MS_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)
CYCLE_WEIGHT = 0.5

C1 = (K1 * DATA_RANGE) ** 2
C2 = (K2 * DATA_RANGE) ** 2


def _check_pair(a: np.ndarray, b: np.ndarray, mask) -> tuple[np.ndarray, np.ndarray, Optional[np.ndarray]]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise SizeMismatch(f"{a.shape} vs {b.shape}")
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != a.shape[:2]:
            raise SizeMismatch(f"mask {mask.shape} vs frame {a.shape[:2]}")
        if not mask.any():
            raise EmptyMask("mask selects no pixel")
    return a, b, mask


def psnr(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    """``10 log10(1 / MSE)`` over all channels of the selected pixels; ``inf`` if identical."""
    a, b, mask = _check_pair(a, b, mask)
    diff = (a - b) ** 2
    if mask is not None:
        diff = diff[mask]
    mse = math.fsum(diff.ravel()) / diff.size
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(DATA_RANGE**2 / mse)


def gaussian_window(size: int = WINDOW, sigma: float = SIGMA) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    return g / g.sum()


def _filter_valid(img: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable correlation keeping only fully-covered outputs."""
    n = g.size
    h, w = img.shape
    rows = sum(g[k] * img[:, k : w - n + 1 + k] for k in range(n))
    return sum(g[k] * rows[k : h - n + 1 + k, :] for k in range(n))


def _ssim_maps(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-window SSIM and contrast-structure maps of two luma images."""
    g = gaussian_window()
    mu_x, mu_y = _filter_valid(x, g), _filter_valid(y, g)
    sxx = _filter_valid(x * x, g) - mu_x * mu_x
    syy = _filter_valid(y * y, g) - mu_y * mu_y
    sxy = _filter_valid(x * y, g) - mu_x * mu_y
    cs = (2.0 * sxy + C2) / (sxx + syy + C2)
    lum = (2.0 * mu_x * mu_y + C1) / (mu_x * mu_x + mu_y * mu_y + C1)
    return lum * cs, cs


def _window_mask(mask: Optional[np.ndarray], shape: tuple[int, int]) -> Optional[np.ndarray]:
    if mask is None:
        return None
    full = sliding_window_view(mask, (WINDOW, WINDOW)).all(axis=(-1, -2))
    if not full.any():
        raise EmptyMask("no SSIM window lies fully inside the mask")
    return full


def _masked_mean(values: np.ndarray, wmask: Optional[np.ndarray]) -> float:
    sel = values if wmask is None else values[wmask]
    return math.fsum(sel.ravel()) / sel.size


def ssim(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    a, b, mask = _check_pair(a, b, mask)
    if min(a.shape[:2]) < WINDOW:
        raise TooSmall(f"SSIM needs both sides >= {WINDOW}, got {a.shape[:2]}")
    x, y = luma(a), luma(b)
    if np.array_equal(x, y):
        _window_mask(mask, x.shape)
        return 1.0
    smap, _ = _ssim_maps(x, y)
    return _masked_mean(smap, _window_mask(mask, x.shape))


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    img = img[:h, :w]
    return 0.25 * (img[0::2, 0::2] + img[1::2, 0::2] + img[0::2, 1::2] + img[1::2, 1::2])


def _downsample_mask(mask: np.ndarray) -> np.ndarray:
    h, w = mask.shape[0] // 2 * 2, mask.shape[1] // 2 * 2
    m = mask[:h, :w]
    return m[0::2, 0::2] & m[1::2, 0::2] & m[0::2, 1::2] & m[1::2, 1::2]


def _pow(v: float, w: float) -> float:
    # fractional powers of negative similarity are undefined; clamp those to 0
    if float(w).is_integer():
        return v**w
    return max(v, 0.0) ** w


def ms_ssim_min_size(levels: int = len(MS_WEIGHTS)) -> int:
    return WINDOW * 2 ** (levels - 1)


def ms_ssim(a: np.ndarray, b: np.ndarray, mask=None, weights: Sequence[float] = MS_WEIGHTS) -> float:
    a, b, mask = _check_pair(a, b, mask)
    levels = len(weights)
    if levels < 1:
        raise ValueError("need at least one scale weight")
    need = ms_ssim_min_size(levels)
    if min(a.shape[:2]) < need:
        raise TooSmall(f"{levels}-scale MS-SSIM needs both sides >= {need}, got {a.shape[:2]}")
    x, y = luma(a), luma(b)
    if np.array_equal(x, y):
        return 1.0
    result = 1.0
    for level, w in enumerate(weights):
        smap, cs = _ssim_maps(x, y)
        wmask = _window_mask(mask, x.shape)
        value = _masked_mean(smap if level == levels - 1 else cs, wmask)
        result *= _pow(value, w)
        if level < levels - 1:
            x, y = _downsample(x), _downsample(y)
            if mask is not None:
                mask = _downsample_mask(mask)
    return result


# ---------------------------------------------------------------- reports


def _json_float(v: Optional[float]):
    if v is None:
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


@dataclass
class MetricReport:
    psnr_db: float
    ssim: float
    ms_ssim: Optional[float]
    per_frame: list[dict] = field(default_factory=list)
    valid_fraction: float = 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["psnr_db"] = _json_float(self.psnr_db)
        d["per_frame"] = [{k: _json_float(v) for k, v in f.items()} for f in self.per_frame]
        return d


def _mean(values: list[float]) -> float:
    # fsum propagates +inf, which is the PSNR sentinel for identical frames
    return math.fsum(values) / len(values)


def frame_metrics(a: np.ndarray, b: np.ndarray, mask=None) -> dict:
    out = {"psnr_db": psnr(a, b, mask), "ssim": ssim(a, b, mask)}
    try:
        out["ms_ssim"] = ms_ssim(a, b, mask)
    except TooSmall:
        out["ms_ssim"] = None
    return out


def evaluate_frames(a_frames, b_frames, masks=None) -> MetricReport:
    """Video metrics as the mean of per-frame values.

    MS-SSIM is reported as ``None`` when frames are smaller than the five-scale
    minimum.
    """
    a_frames, b_frames = list(a_frames), list(b_frames)
    if len(a_frames) != len(b_frames):
        raise LengthMismatch(f"{len(a_frames)} vs {len(b_frames)} frames")
    if not a_frames:
        raise EmptyMask("no frames to evaluate")
    masks = [None] * len(a_frames) if masks is None else list(masks)
    if len(masks) != len(a_frames):
        raise LengthMismatch("mask count differs from frame count")
    per = [frame_metrics(a, b, m) for a, b, m in zip(a_frames, b_frames, masks)]
    fractions = [1.0 if m is None else float(np.mean(m)) for m in masks]
    ms = [p["ms_ssim"] for p in per]
    return MetricReport(
        psnr_db=_mean([p["psnr_db"] for p in per]),
        ssim=_mean([p["ssim"] for p in per]),
        ms_ssim=None if any(v is None for v in ms) else _mean(ms),
        per_frame=per,
        valid_fraction=math.fsum(fractions) / len(fractions),
    )


# ---------------------------------------------------------------- disparity & cycle


def disparity_mae(est: np.ndarray, gt: np.ndarray, mask=None) -> float:
    """Mean absolute error over pixels valid (finite) in both maps and in ``mask``."""
    est = np.asarray(est, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if est.shape != gt.shape:
        raise SizeMismatch(f"{est.shape} vs {gt.shape}")
    sel = np.isfinite(est) & np.isfinite(gt)
    if mask is not None:
        sel &= np.asarray(mask, dtype=bool)
    if not sel.any():
        raise EmptyOverlap("no jointly valid disparity")
    err = np.abs(est[sel] - gt[sel])
    return math.fsum(err) / err.size


# (frame, depth or None, valid) -> (frame, depth or None, valid)
WarpFn = Callable[[np.ndarray, Optional[np.ndarray], np.ndarray], tuple[np.ndarray, Optional[np.ndarray], np.ndarray]]


def identity_warp(frame, depth, valid):
    return frame, depth, valid


def cycle_residual(left: np.ndarray, lr: WarpFn, rl: WarpFn, depth: Optional[np.ndarray] = None) -> float:
    """Mean squared error between ``left`` and its round trip through two warps.

    Only pixels that stay valid through both warps count.
    """
    left = np.asarray(left, dtype=np.float64)
    valid0 = np.ones(left.shape[:2], dtype=bool) if depth is None else np.isfinite(depth) & (depth > 0)
    mid, mid_depth, mid_valid = lr(left, depth, valid0)
    back, _, valid = rl(mid, mid_depth, mid_valid)
    valid = np.asarray(valid, dtype=bool)
    if not valid.any():
        raise EmptyOverlap("no pixel survives the round trip")
    diff = (left - back) ** 2
    sel = diff[valid]
    return math.fsum(sel.ravel()) / sel.size


def combined_loss(recon_l2r: float, recon_r2l: float, cycle: float, lam: float = CYCLE_WEIGHT) -> float:
    """Two reconstruction terms plus ``lam`` times the cycle term."""
    for name, v in (("recon_l2r", recon_l2r), ("recon_r2l", recon_r2l), ("cycle", cycle), ("lambda", lam)):
        if v < 0:
            raise NegativeTerm(f"{name} must be non-negative, got {v}")
    return recon_l2r + recon_r2l + lam * cycle
