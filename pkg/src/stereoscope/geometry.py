"""Pinhole stereo geometry for parallel and toed-in (converged) rigs.

Conventions: z forward, x right, y down, pixel (0, 0) at the top-left corner
with pixel centres at half-integers.  A parallel rig puts the world origin at
the left optical centre; a converged rig puts it at the baseline midpoint.
Disparity is always ``x_left - x_right``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Union

import numpy as np

from .errors import (
    BehindCamera,
    InputError,
    NonPositiveDepth,
    NonPositiveDisparity,
    NotConverged,
)

Eye = Literal["left", "right"]

DEFAULT_BASELINE_M = 0.063
DEFAULT_WIDTH = 128
DEFAULT_HEIGHT = 72
DEFAULT_HFOV_DEG = 90.0


@dataclass(frozen=True)
class ParallelFormat:
    name = "parallel"


@dataclass(frozen=True)
class ConvergedFormat:
    convergence_m: float
    name = "converged"


RigFormat = Union[ParallelFormat, ConvergedFormat]


@dataclass(frozen=True)
class Point3:
    x: float
    y: float
    z: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in (self.x, self.y, self.z)):
            raise InputError(f"non-finite point {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)


@dataclass(frozen=True)
class StereoProjection:
    left: tuple[float, float]
    right: tuple[float, float]
    disparity_px: float


@dataclass(frozen=True)
class CameraRig:
    baseline_m: float
    focal_px: float
    width_px: int
    height_px: int
    principal_point: tuple[float, float] | None = None
    format: RigFormat = field(default_factory=ParallelFormat)

    def __post_init__(self) -> None:
        if not self.baseline_m > 0:
            raise InputError(f"baseline must be positive, got {self.baseline_m}")
        if not self.focal_px > 0:
            raise InputError(f"focal length must be positive, got {self.focal_px}")
        if self.width_px < 1 or self.height_px < 1:
            raise InputError("image size must be at least 1x1")
        if self.principal_point is None:
            object.__setattr__(self, "principal_point", (self.width_px / 2.0, self.height_px / 2.0))
        if isinstance(self.format, ConvergedFormat) and not self.format.convergence_m > 0:
            raise InputError("convergence distance must be positive")

    @property
    def cx(self) -> float:
        return self.principal_point[0]

    @property
    def cy(self) -> float:
        return self.principal_point[1]

    @property
    def is_converged(self) -> bool:
        return isinstance(self.format, ConvergedFormat)

    @property
    def convergence_angle(self) -> float:
        """Toe-in angle of each camera; zero for a parallel rig."""
        if not self.is_converged:
            return 0.0
        return math.atan((self.baseline_m / 2.0) / self.format.convergence_m)

    def camera_pose(self, eye: Eye) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(centre, R)`` with camera coordinates ``R @ (p - centre)``."""
        if eye not in ("left", "right"):
            raise InputError(f"unknown eye {eye!r}")
        half = self.baseline_m / 2.0
        if not self.is_converged:
            centre = np.array([0.0 if eye == "left" else self.baseline_m, 0.0, 0.0])
            return centre, np.eye(3)
        c = math.cos(self.convergence_angle)
        s = math.sin(self.convergence_angle)
        if eye == "left":
            centre = np.array([-half, 0.0, 0.0])
            rot = np.array([[c, 0.0, -s], [0.0, 1.0, 0.0], [s, 0.0, c]])
        else:
            centre = np.array([half, 0.0, 0.0])
            rot = np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])
        return centre, rot

    def to_dict(self) -> dict:
        out = {
            "baseline_m": self.baseline_m,
            "focal_px": self.focal_px,
            "width": self.width_px,
            "height": self.height_px,
            "cx": self.cx,
            "cy": self.cy,
            "format": self.format.name,
        }
        if self.is_converged:
            out["convergence_m"] = self.format.convergence_m
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "CameraRig":
        try:
            fmt_name = data.get("format", "parallel")
            if fmt_name == "parallel":
                fmt: RigFormat = ParallelFormat()
            elif fmt_name == "converged":
                fmt = ConvergedFormat(float(data["convergence_m"]))
            else:
                raise InputError(f"unknown rig format {fmt_name!r}")
            width = int(data["width"])
            height = int(data["height"])
            pp = None
            if "cx" in data or "cy" in data:
                pp = (float(data.get("cx", width / 2.0)), float(data.get("cy", height / 2.0)))
            return cls(
                baseline_m=float(data["baseline_m"]),
                focal_px=float(data["focal_px"]),
                width_px=width,
                height_px=height,
                principal_point=pp,
                format=fmt,
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"invalid rig description: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> "CameraRig":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}: {exc}") from exc
        return cls.from_dict(data)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")


def focal_from_hfov(width_px: int, hfov_deg: float) -> float:
    return (width_px / 2.0) / math.tan(math.radians(hfov_deg) / 2.0)


def default_rig(
    width_px: int = DEFAULT_WIDTH,
    height_px: int = DEFAULT_HEIGHT,
    convergence_m: float | None = None,
    baseline_m: float = DEFAULT_BASELINE_M,
) -> CameraRig:
    """Desk-scale rig: 6.3 cm baseline, 90 degree horizontal field of view."""
    fmt: RigFormat = ParallelFormat() if convergence_m is None else ConvergedFormat(convergence_m)
    return CameraRig(
        baseline_m=baseline_m,
        focal_px=focal_from_hfov(width_px, DEFAULT_HFOV_DEG),
        width_px=width_px,
        height_px=height_px,
        format=fmt,
    )


def _as_xyz(p) -> tuple[float, float, float]:
    if isinstance(p, Point3):
        return p.x, p.y, p.z
    x, y, z = p
    return float(x), float(y), float(z)


def project_parallel(p, rig: CameraRig) -> StereoProjection:
    if rig.is_converged:
        raise InputError("project_parallel needs a parallel rig")
    x, y, z = _as_xyz(p)
    if not z > 0:
        raise NonPositiveDepth(f"point depth {z} must be positive")
    f, b = rig.focal_px, rig.baseline_m
    xl = f * x / z + rig.cx
    xr = f * (x - b) / z + rig.cx
    yy = f * y / z + rig.cy
    return StereoProjection(left=(xl, yy), right=(xr, yy), disparity_px=xl - xr)


def project_converged(p, rig: CameraRig) -> StereoProjection:
    if not rig.is_converged:
        raise NotConverged("project_converged needs a converged rig")
    x, y, z = _as_xyz(p)
    f, half = rig.focal_px, rig.baseline_m / 2.0
    th = rig.convergence_angle
    c, s = math.cos(th), math.sin(th)

    xl_cam = (x + half) * c - z * s
    zl_cam = (x + half) * s + z * c
    xr_cam = (x - half) * c + z * s
    zr_cam = -(x - half) * s + z * c
    if not (zl_cam > 0 and zr_cam > 0):
        raise BehindCamera(f"point {(x, y, z)} is behind at least one camera")

    xl = f * xl_cam / zl_cam + rig.cx
    xr = f * xr_cam / zr_cam + rig.cx
    yl = f * y / zl_cam + rig.cy
    yr = f * y / zr_cam + rig.cy
    return StereoProjection(left=(xl, yl), right=(xr, yr), disparity_px=xl - xr)


def project(p, rig: CameraRig) -> StereoProjection:
    return project_converged(p, rig) if rig.is_converged else project_parallel(p, rig)


def project_points(points: np.ndarray, rig: CameraRig, eye: Eye) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorised projection of ``(..., 3)`` world points into one eye.

    Returns pixel ``x``, pixel ``y`` and camera-frame depth.  Points at or
    behind the camera get NaN pixel coordinates.
    """
    centre, rot = rig.camera_pose(eye)
    q = np.asarray(points, dtype=np.float64) - centre
    xc = rot[0, 0] * q[..., 0] + rot[0, 1] * q[..., 1] + rot[0, 2] * q[..., 2]
    yc = rot[1, 0] * q[..., 0] + rot[1, 1] * q[..., 1] + rot[1, 2] * q[..., 2]
    zc = rot[2, 0] * q[..., 0] + rot[2, 1] * q[..., 1] + rot[2, 2] * q[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        front = zc > 0
        px = np.where(front, rig.focal_px * xc / np.where(front, zc, 1.0) + rig.cx, np.nan)
        py = np.where(front, rig.focal_px * yc / np.where(front, zc, 1.0) + rig.cy, np.nan)
    return px, py, zc


def disparity_from_depth(z, rig: CameraRig):
    """``f * B / z`` for a parallel rig.  Accepts scalars or arrays."""
    if rig.is_converged:
        raise InputError("depth/disparity inversion only holds for parallel rigs")
    arr = np.asarray(z, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise NonPositiveDepth("depth must be positive")
    out = (rig.focal_px * rig.baseline_m) / arr
    return float(out) if out.ndim == 0 else out


def depth_from_disparity(d, rig: CameraRig):
    if rig.is_converged:
        raise InputError("depth/disparity inversion only holds for parallel rigs")
    arr = np.asarray(d, dtype=np.float64)
    if np.any(~(arr > 0)):
        raise NonPositiveDisparity("disparity must be positive; zero disparity means a point at infinity")
    out = (rig.focal_px * rig.baseline_m) / arr
    return float(out) if out.ndim == 0 else out


def zero_disparity_depth(rig: CameraRig) -> float:
    if not rig.is_converged:
        raise NotConverged("a parallel rig has no zero-disparity plane at finite depth")
    return rig.format.convergence_m


def midpoint_parallel_projection(p, rig: CameraRig) -> StereoProjection:
    """Parallel projection of ``p`` given in baseline-midpoint coordinates.

    This is what a converged rig degenerates to as the toe-in angle vanishes.
    """
    x, y, z = _as_xyz(p)
    par = CameraRig(rig.baseline_m, rig.focal_px, rig.width_px, rig.height_px, rig.principal_point)
    return project_parallel((x + rig.baseline_m / 2.0, y, z), par)
