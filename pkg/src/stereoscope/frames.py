"""Frame helpers: luma and the PNG / PFM codecs used for clip storage."""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import UnreadableFrame

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def luma(frame: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an ``(H, W, 3)`` frame; 2-D input passes through."""
    frame = np.asarray(frame, dtype=np.float64)
    if frame.ndim == 2:
        return frame
    return frame[..., 0] * LUMA_WEIGHTS[0] + frame[..., 1] * LUMA_WEIGHTS[1] + frame[..., 2] * LUMA_WEIGHTS[2]


def to_uint8(frame: np.ndarray) -> np.ndarray:
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_png(path: str | Path, frame: np.ndarray) -> None:
    arr = np.asarray(frame)
    if arr.dtype == bool:
        Image.fromarray(arr.astype(np.uint8) * 255, mode="L").save(path, format="PNG")
    elif arr.ndim == 2:
        Image.fromarray(to_uint8(arr), mode="L").save(path, format="PNG")
    else:
        Image.fromarray(to_uint8(arr), mode="RGB").save(path, format="PNG")


def read_png(path: str | Path) -> np.ndarray:
    """Read an 8-bit PNG as float RGB in [0, 1]."""
    try:
        with Image.open(path) as im:
            im.load()
            arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    except (OSError, ValueError) as exc:
        raise UnreadableFrame(f"{path}: {exc}") from exc
    return arr / 255.0


def read_png16(path: str | Path) -> np.ndarray:
    """Raw integer values of a single-channel (8 or 16-bit) PNG."""
    try:
        with Image.open(path) as im:
            im.load()
            arr = np.asarray(im)
    except (OSError, ValueError) as exc:
        raise UnreadableFrame(f"{path}: {exc}") from exc
    if arr.ndim != 2:
        raise UnreadableFrame(f"{path}: expected a single-channel PNG")
    return arr.astype(np.float64)


def write_pfm(path: str | Path, data: np.ndarray) -> None:
    """Little-endian PFM (scale -1.0), rows stored bottom to top."""
    arr = np.asarray(data, dtype="<f4")
    if arr.ndim == 2:
        header = "Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        header = "PF"
    else:
        raise ValueError(f"cannot store array of shape {arr.shape} as PFM")
    h, w = arr.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"{header}\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(np.ascontiguousarray(arr[::-1]).tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            kind = fh.readline().strip()
            dims = fh.readline().split()
            scale = float(fh.readline().strip())
            payload = fh.read()
        w, h = int(dims[0]), int(dims[1])
    except (OSError, ValueError, IndexError) as exc:
        raise UnreadableFrame(f"{path}: {exc}") from exc
    if kind not in (b"PF", b"Pf"):
        raise UnreadableFrame(f"{path}: not a PFM file")
    channels = 3 if kind == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    if len(payload) < 4 * count:
        raise UnreadableFrame(f"{path}: truncated PFM payload")
    arr = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64)
    arr = arr.reshape((h, w, 3) if channels == 3 else (h, w))
    return arr[::-1].copy()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
