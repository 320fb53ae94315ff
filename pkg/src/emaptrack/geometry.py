"""Pinhole-camera effects of ego-motion on image coordinates.

All projection functions take principal-point-centred pixel coordinates
(``u`` to the right, ``v`` downwards) and accept scalars or numpy arrays.

Sign convention: a positive yaw rate is the rotation that moves image
content towards ``+u`` (for a forward-looking camera this is a left turn
of the vehicle).  Forward speed is positive when the camera moves along its
optical axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateProjectionError

#: Minimum admissible projection denominator (in the formulas' own units).
EPS = 1e-6


@dataclass(frozen=True)
class CameraModel:
    """Rectified pinhole intrinsics. ``cx, cy`` are top-left-origin pixels."""

    f: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not self.f > 0:
            raise ValueError(f"focal length must be positive, got {self.f}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )


@dataclass(frozen=True)
class CenteredPoint:
    u: float
    v: float


@dataclass(frozen=True)
class EgoMotionSample:
    """Camera motion over the interval ending at the current frame.

    d_dot: forward speed in m/s; psi_dot: yaw rate in rad/s; dt: interval in s.
    """

    d_dot: float
    psi_dot: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


def _check_denominator(den, what):
    if np.any(np.asarray(den) <= EPS):
        raise DegenerateProjectionError(
            f"{what}: projection denominator <= {EPS:g} "
            "(point crosses the camera plane or wraps past the optical axis)"
        )


def exact_translation_shift(u, d, ego: EgoMotionSample, f):
    """Closed-form position after forward motion ``ego.d_dot * ego.dt``.

    ``d`` is the Euclidean camera-to-object distance in metres.  The same
    formula serves the vertical coordinate.
    """
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    ang = u / f
    den = d * np.cos(ang) - ego.dt * ego.d_dot
    _check_denominator(den, "translation")
    out = f * d * np.sin(ang) / den
    return float(out) if out.ndim == 0 else out


def exact_rotation_shift(u, ego: EgoMotionSample, f):
    """Closed-form horizontal position after yawing by ``ego.psi_dot * ego.dt``.

    Rotation leaves ``v`` untouched.
    """
    u = np.asarray(u, dtype=float)
    t = np.tan(ego.dt * ego.psi_dot)
    den = 1.0 - (u / f) * t
    _check_denominator(den, "rotation")
    out = f * (t + u / f) / den
    return float(out) if out.ndim == 0 else out


def linear_translation_coeff(u, f, d):
    """Pixels of shift per metre of forward displacement, to first order."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("distance must be positive")
    out = u * np.sqrt(u * u + f * f) / (f * d)
    return float(out) if out.ndim == 0 else out


def linear_rotation_coeff(u, f):
    """Pixels of horizontal shift per radian of yaw, to first order."""
    if not f > 0:
        raise ValueError("focal length must be positive")
    u = np.asarray(u, dtype=float)
    out = f * (1.0 + (u / f) ** 2)
    return float(out) if out.ndim == 0 else out


def to_centered(x, y, cam: CameraModel):
    """Top-left-origin pixel -> principal-point-centred (u, v)."""
    return x - cam.cx, y - cam.cy


def from_centered(u, v, cam: CameraModel):
    return u + cam.cx, v + cam.cy


def box_to_centered(box, cam: CameraModel) -> np.ndarray:
    """(left, top, right, bottom) in image pixels -> centred corner 4-vector."""
    b = np.asarray(box, dtype=float)
    return b - np.array([cam.cx, cam.cy, cam.cx, cam.cy])


def box_from_centered(corners, cam: CameraModel) -> np.ndarray:
    c = np.asarray(corners, dtype=float)
    return c + np.array([cam.cx, cam.cy, cam.cx, cam.cy])
