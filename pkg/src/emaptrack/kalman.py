"""Linear Kalman filter over the 8-D bounding-box corner state.

State layout: ``[u_l, v_t, u_r, v_b, du_l, dv_t, du_r, dv_b]`` with
positions in pixels and velocities in pixels per second.  The predict step
takes an additive disturbance ``G @ w * dt`` (camera motion); the update
step uses the Joseph form so the covariance stays symmetric PSD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteStateError, SingularInnovationError

DIM_X = 8
DIM_Z = 4

#: Observation matrix: the four corners are measured directly.
H = np.hstack([np.eye(DIM_Z), np.zeros((DIM_Z, DIM_Z))])


@dataclass
class KfState:
    x: np.ndarray  # (8,)
    P: np.ndarray  # (8, 8)

    def copy(self) -> "KfState":
        return KfState(self.x.copy(), self.P.copy())

    @property
    def box(self) -> np.ndarray:
        return self.x[:4].copy()


@dataclass
class KfModel:
    F: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    R: np.ndarray


@dataclass(frozen=True)
class NoiseConfig:
    """Noise scales as fractions of the initial box diagonal.

    ``std_vel`` is per frame; it is converted to px/s with the step's dt.
    ``init_vel_var`` is the initial velocity variance in px^2/s^2.
    """

    std_pos: float = 1.0 / 20
    std_vel: float = 1.0 / 160
    std_meas: float = 1.0 / 20
    init_vel_var: float = 1e4


def transition(dt: float) -> np.ndarray:
    F = np.eye(DIM_X)
    F[:4, 4:] = dt * np.eye(4)
    return F


def make_model(diag: float, dt: float, noise: NoiseConfig = NoiseConfig()) -> KfModel:
    """Constant-velocity model whose noise is scaled by a box diagonal ``diag``."""
    pos = (noise.std_pos * diag) ** 2
    vel = (noise.std_vel * diag / dt) ** 2
    Q = np.diag([pos] * 4 + [vel] * 4)
    R = np.eye(DIM_Z) * (noise.std_meas * diag) ** 2
    return KfModel(F=transition(dt), H=H.copy(), Q=Q, R=R)


def initiate(box, noise: NoiseConfig = NoiseConfig()) -> KfState:
    """Start a filter at ``box`` with zero velocity."""
    box = np.asarray(box, dtype=float)
    x = np.zeros(DIM_X)
    x[:4] = box
    diag = box_diagonal(box)
    P = np.diag([(noise.std_meas * diag) ** 2] * 4 + [noise.init_vel_var] * 4)
    return KfState(x, P)


def box_diagonal(box) -> float:
    w = box[2] - box[0]
    h = box[3] - box[1]
    # floor keeps the noise model non-degenerate for point-like boxes
    return max(float(np.hypot(w, h)), 1.0)


def _symmetrize(P):
    return 0.5 * (P + P.T)


def _check_finite(s: KfState, stage):
    if not (np.all(np.isfinite(s.x)) and np.all(np.isfinite(s.P))):
        raise NonFiniteStateError(f"non-finite state after {stage}")


def repair_corner_order(s: KfState) -> KfState:
    """Swap inverted corner pairs (and their velocities and covariance)."""
    perm = np.arange(DIM_X)
    for a, b in ((0, 2), (1, 3)):
        if s.x[a] > s.x[b]:
            perm[[a, b]] = perm[[b, a]]
            perm[[a + 4, b + 4]] = perm[[b + 4, a + 4]]
    if np.array_equal(perm, np.arange(DIM_X)):
        return s
    return KfState(s.x[perm], _symmetrize(s.P[np.ix_(perm, perm)]))


def predict(s: KfState, m: KfModel, g=None, w=None, dt: float = 0.0) -> KfState:
    """x' = F x + G w dt ;  P' = F P F^T + Q."""
    x = m.F @ s.x
    if g is not None and w is not None:
        x = x + (np.asarray(g) @ np.asarray(w, dtype=float)) * dt
    P = _symmetrize(m.F @ s.P @ m.F.T + m.Q)
    out = KfState(x, P)
    _check_finite(out, "predict")
    return repair_corner_order(out)


def innovation(s: KfState, z, m: KfModel):
    """Innovation vector and its covariance S."""
    y = np.asarray(z, dtype=float) - m.H @ s.x
    S = m.H @ s.P @ m.H.T + m.R
    return y, S


def update(s: KfState, z, m: KfModel) -> KfState:
    y, S = innovation(s, z, m)
    try:
        if np.linalg.cond(S) > 1e12:
            raise np.linalg.LinAlgError("ill-conditioned")
        # K = P H^T S^-1, solved rather than inverted
        K = np.linalg.solve(S, m.H @ s.P).T
    except np.linalg.LinAlgError as exc:
        raise SingularInnovationError(f"innovation covariance is singular: {exc}") from None
    x = s.x + K @ y
    I_KH = np.eye(DIM_X) - K @ m.H
    P = _symmetrize(I_KH @ s.P @ I_KH.T + K @ m.R @ K.T)
    out = KfState(x, P)
    _check_finite(out, "update")
    return repair_corner_order(out)


def nis(s: KfState, z, m: KfModel) -> float:
    """Normalised innovation squared of ``z`` against the prior ``s``."""
    y, S = innovation(s, z, m)
    return float(y @ np.linalg.solve(S, y))
