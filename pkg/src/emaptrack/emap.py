"""Ego-motion aware prediction: disturbance matrices and the mode switch."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kalman
from .errors import MissingDepthError
from .geometry import CameraModel, EgoMotionSample, box_to_centered, linear_rotation_coeff, linear_translation_coeff

#: Depth readings beyond this range (metres) are treated as invalid.
DEFAULT_MAX_RANGE = 100.0
MIN_VALID_DEPTH_PIXELS = 5


class EmapMode(enum.Enum):
    BASELINE = "baseline"
    TRANSLATION_ONLY = "trans"
    ROTATION_ONLY = "rot"
    FULL = "full"

    @property
    def uses_rotation(self) -> bool:
        return self in (EmapMode.ROTATION_ONLY, EmapMode.FULL)

    @property
    def uses_translation(self) -> bool:
        return self in (EmapMode.TRANSLATION_ONLY, EmapMode.FULL)

    @property
    def label(self) -> str:
        return _LABELS[self]

    @classmethod
    def parse(cls, text: str) -> "EmapMode":
        key = text.strip().lower().replace("-", "_")
        aliases = {
            "baseline": cls.BASELINE,
            "rot": cls.ROTATION_ONLY,
            "rotation": cls.ROTATION_ONLY,
            "rotation_only": cls.ROTATION_ONLY,
            "trans": cls.TRANSLATION_ONLY,
            "translation": cls.TRANSLATION_ONLY,
            "translation_only": cls.TRANSLATION_ONLY,
            "full": cls.FULL,
            "emap": cls.FULL,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown mode {text!r}") from None


_LABELS = {
    EmapMode.BASELINE: "Baseline",
    EmapMode.TRANSLATION_ONLY: "TranslationOnly",
    EmapMode.ROTATION_ONLY: "RotationOnly",
    EmapMode.FULL: "Full",
}


@dataclass
class DepthSource:
    """Per-frame depth: a metric depth image, a scalar for one target, or both.

    Image pixels equal to 0 or above ``max_range`` are invalid.
    """

    image: Optional[np.ndarray] = None
    scalar: Optional[float] = None
    max_range: float = DEFAULT_MAX_RANGE


def build_disturbance(corners, f: float, d: Optional[float], mode: EmapMode) -> np.ndarray:
    """8x2 matrix mapping [yaw rate, forward speed] to corner rates (px/s).

    ``corners`` are centred (u_l, v_t, u_r, v_b).  Column 0 holds the
    rotation coefficients on the horizontal corners, column 1 the forward
    translation coefficients on all four corners; velocity rows stay zero.
    """
    G = np.zeros((8, 2))
    if mode is EmapMode.BASELINE:
        return G
    ul, vt, ur, vb = (float(c) for c in corners)
    if mode.uses_rotation:
        G[0, 0] = linear_rotation_coeff(ul, f)
        G[2, 0] = linear_rotation_coeff(ur, f)
    if mode.uses_translation:
        if d is None or not d > 0:
            raise MissingDepthError("translation disturbance needs a positive target depth")
        # right edge uses u_r (the printed form repeats u_l)
        G[:4, 1] = linear_translation_coeff(np.array([ul, vt, ur, vb]), f, d)
    return G


def estimate_target_depth(box, src: DepthSource, cam: CameraModel) -> Optional[float]:
    """Median depth of the central half of ``box`` (image pixels).

    A scalar in ``src`` takes precedence.  Returns None when fewer than
    five valid pixels are found.
    """
    if src.scalar is not None:
        return float(src.scalar) if 0 < src.scalar <= src.max_range else None
    if src.image is None:
        return None
    img = src.image
    left, top, right, bottom = (float(b) for b in box)
    cxb, cyb = 0.5 * (left + right), 0.5 * (top + bottom)
    hw, hh = 0.25 * (right - left), 0.25 * (bottom - top)
    h_img, w_img = img.shape
    # pixel (r, c) covers [c, c+1) x [r, r+1); take pixels whose centre is inside
    c0 = max(int(np.ceil(cxb - hw - 0.5)), 0)
    c1 = min(int(np.floor(cxb + hw - 0.5)), w_img - 1)
    r0 = max(int(np.ceil(cyb - hh - 0.5)), 0)
    r1 = min(int(np.floor(cyb + hh - 0.5)), h_img - 1)
    if c1 < c0 or r1 < r0:
        return None
    patch = img[r0 : r1 + 1, c0 : c1 + 1].ravel()
    valid = patch[(patch > 0) & (patch <= src.max_range) & np.isfinite(patch)]
    if valid.size < MIN_VALID_DEPTH_PIXELS:
        return None
    return float(np.median(valid))


def effective_mode(mode: EmapMode, depth: Optional[float]) -> EmapMode:
    """Mode actually applied for one step: translation is skipped without depth."""
    if depth is not None and depth > 0:
        return mode
    if mode is EmapMode.FULL:
        return EmapMode.ROTATION_ONLY
    if mode is EmapMode.TRANSLATION_ONLY:
        return EmapMode.BASELINE
    return mode


def emap_predict(
    state: kalman.KfState,
    model: kalman.KfModel,
    ego: Optional[EgoMotionSample],
    depth: Optional[float],
    mode: EmapMode,
    cam: CameraModel,
) -> kalman.KfState:
    """One prediction step with the camera-motion disturbance for ``mode``.

    The disturbance is a displacement, so it is computed from centred
    corners but added to the image-frame state directly.
    """
    if ego is None or mode is EmapMode.BASELINE:
        return kalman.predict(state, model)
    mode = effective_mode(mode, depth)
    corners = box_to_centered(state.x[:4], cam)
    G = build_disturbance(corners, cam.f, depth, mode)
    w = np.array([ego.psi_dot, ego.d_dot])
    return kalman.predict(state, model, G, w, ego.dt)
