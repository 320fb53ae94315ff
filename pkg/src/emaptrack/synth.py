"""Deterministic synthetic driving scenes with exact ground truth.

The world frame coincides with the camera frame at frame 0: ``x`` right,
``y`` down, ``z`` forward.  The ego vehicle moves in the x-z plane; its
heading ``phi`` is positive to the left, so a positive yaw rate moves image
content towards ``+u`` as the projection formulas expect.  Boxes are the
projections of a fronto-parallel rectangle centred on each object, computed
by transforming world points into the camera frame (this path shares no
code with :mod:`emaptrack.geometry`'s closed forms).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Sequence, Tuple

import numpy as np

from .association import Detection
from .geometry import CameraModel, EgoMotionSample

#: Objects closer than this along the optical axis are not rendered.
Z_NEAR = 0.5
#: Rendering limits standing in for a detector's useful range.
MAX_DISTANCE = 40.0
MIN_BOX_HEIGHT = 20.0


@dataclass(frozen=True)
class WorldObject:
    id: int
    position: Tuple[float, float, float]
    velocity: Tuple[float, float, float] = (0.0, 0.0, 0.0)
    size: Tuple[float, float] = (1.8, 1.5)  # width, height in metres
    label: str = "Car"

    def __post_init__(self):
        if min(self.size) <= 0:
            raise ValueError("object size must be positive")


@dataclass
class EgoScript:
    """Per-frame (dt, forward speed, yaw rate).  Entry k drives frame k-1 -> k."""

    dt: np.ndarray
    d_dot: np.ndarray
    psi_dot: np.ndarray

    def __post_init__(self):
        self.dt = np.asarray(self.dt, dtype=float)
        self.d_dot = np.asarray(self.d_dot, dtype=float)
        self.psi_dot = np.asarray(self.psi_dot, dtype=float)
        if not (len(self.dt) == len(self.d_dot) == len(self.psi_dot)):
            raise ValueError("script arrays differ in length")
        if np.any(self.dt <= 0):
            raise ValueError("dt must be positive")

    def __len__(self):
        return len(self.dt)

    def sample(self, k: int) -> EgoMotionSample:
        return EgoMotionSample(float(self.d_dot[k]), float(self.psi_dot[k]), float(self.dt[k]))

    @classmethod
    def constant(cls, n: int, dt: float, d_dot: float = 0.0, psi_dot: float = 0.0) -> "EgoScript":
        return cls(np.full(n, dt), np.full(n, d_dot), np.full(n, psi_dot))


@dataclass(frozen=True)
class Pose:
    x: float
    z: float
    phi: float

    def forward(self, phi=None):
        p = self.phi if phi is None else phi
        return np.array([-math.sin(p), math.cos(p)])


@dataclass(frozen=True)
class GtBox:
    object_id: int
    label: str
    box: Tuple[float, float, float, float]
    depth: float
    camera_position: Tuple[float, float, float]


@dataclass
class SimFrame:
    index: int
    time: float
    ego: EgoMotionSample
    pose: Pose
    boxes: List[GtBox] = field(default_factory=list)


@dataclass
class DropoutSchedule:
    """Explicit (frame, object id) omissions and/or i.i.d. omission probability."""

    omit: FrozenSet[Tuple[int, int]] = frozenset()
    probability: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("dropout probability must lie in [0, 1]")
        self.omit = frozenset((int(f), int(o)) for f, o in self.omit)


# -- ego kinematics -------------------------------------------------------


def integrate_poses(script: EgoScript, start: Pose = Pose(0.0, 0.0, 0.0)) -> List[Pose]:
    """Pose at every frame; entry 0 of the script does not move the ego."""
    if len(script) == 0:
        return []
    poses = [start]
    for k in range(1, len(script)):
        p = poses[-1]
        dphi = script.psi_dot[k] * script.dt[k]
        step = script.d_dot[k] * script.dt[k] * p.forward(p.phi + 0.5 * dphi)
        poses.append(Pose(p.x + step[0], p.z + step[1], p.phi + dphi))
    return poses


def rederive_motion(poses: Sequence[Pose], dts: Sequence[float]) -> List[Tuple[float, float]]:
    """(forward speed, yaw rate) for k >= 1 recovered from consecutive poses."""
    out = []
    for k in range(1, len(poses)):
        a, b, dt = poses[k - 1], poses[k], dts[k]
        dphi = b.phi - a.phi
        fwd = a.forward(a.phi + 0.5 * dphi)
        disp = np.array([b.x - a.x, b.z - a.z])
        out.append((float(fwd @ disp) / dt, dphi / dt))
    return out


def to_camera(point, pose: Pose) -> np.ndarray:
    """World point -> camera frame (x right, y down, z forward)."""
    dx = point[0] - pose.x
    dz = point[2] - pose.z
    c, s = math.cos(pose.phi), math.sin(pose.phi)
    return np.array([c * dx + s * dz, float(point[1]), -s * dx + c * dz])


def project_box(pc, size, cam: CameraModel) -> Optional[Tuple[float, float, float, float]]:
    """Image box of a fronto-parallel rectangle centred at camera point ``pc``.

    None when the rectangle is behind the near plane or not fully inside the image.
    """
    X, Y, Z = pc
    if Z <= Z_NEAR:
        return None
    w, h = size
    left = cam.f * (X - 0.5 * w) / Z + cam.cx
    right = cam.f * (X + 0.5 * w) / Z + cam.cx
    top = cam.f * (Y - 0.5 * h) / Z + cam.cy
    bottom = cam.f * (Y + 0.5 * h) / Z + cam.cy
    if left < 0 or top < 0 or right > cam.width or bottom > cam.height:
        return None
    return (left, top, right, bottom)


def simulate(objects: Sequence[WorldObject], script: EgoScript, cam: CameraModel,
             max_distance: float = MAX_DISTANCE, min_height: float = MIN_BOX_HEIGHT) -> List[SimFrame]:
    """Render ground truth for every frame of ``script``.

    Objects behind the camera, not fully inside the image, farther than
    ``max_distance`` or projecting shorter than ``min_height`` px emit no box.
    """
    poses = integrate_poses(script)
    frames = []
    t = 0.0
    for k, pose in enumerate(poses):
        if k > 0:
            t += float(script.dt[k])
        boxes = []
        for obj in sorted(objects, key=lambda o: o.id):
            pw = np.asarray(obj.position, dtype=float) + t * np.asarray(obj.velocity, dtype=float)
            pc = to_camera(pw, pose)
            dist = float(np.linalg.norm(pc))
            box = project_box(pc, obj.size, cam)
            if box is None or dist > max_distance or box[3] - box[1] < min_height:
                continue
            boxes.append(GtBox(obj.id, obj.label, box, dist, tuple(float(v) for v in pc)))
        frames.append(SimFrame(k, t, script.sample(k), pose, boxes))
    return frames


def corrupt(
    frames: Sequence[SimFrame],
    schedule: DropoutSchedule = DropoutSchedule(),
    noise: float = 0.0,
    seed: int = 0,
) -> List[List[Detection]]:
    """Per-frame detections: scheduled/random omissions plus Gaussian corner noise.

    Uses numpy's PCG64 generator.  Every ground-truth box consumes one
    uniform and four normal draws, in (frame, object id) order, whether or
    not it survives, so the stream layout does not depend on the schedule.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for fr in frames:
        dets = []
        for gt in fr.boxes:
            drop_draw = rng.random()
            jitter = rng.standard_normal(4) * noise
            if (fr.index, gt.object_id) in schedule.omit:
                continue
            if schedule.probability > 0 and drop_draw < schedule.probability:
                continue
            box = np.asarray(gt.box) + jitter
            l, r = sorted((box[0], box[2]))
            t_, b = sorted((box[1], box[3]))
            dets.append(Detection(fr.index, (float(l), float(t_), float(r), float(b)), 1.0, gt.label, gt.depth))
        out.append(dets)
    return out


def depth_image(frame: SimFrame, objects: Sequence[WorldObject], cam: CameraModel) -> np.ndarray:
    """Metric depth raster: each box filled with its object's range, nearest wins, 0 elsewhere."""
    img = np.zeros((cam.height, cam.width))
    for gt in sorted(frame.boxes, key=lambda g: -g.depth):
        l, t, r, b = gt.box
        c0, c1 = int(math.floor(l)), int(math.ceil(r))
        r0, r1 = int(math.floor(t)), int(math.ceil(b))
        img[max(r0, 0) : min(r1, cam.height), max(c0, 0) : min(c1, cam.width)] = gt.depth
    return img


# -- built-in scenarios ----------------------------------------------------

DT = 0.05
CAMERA = CameraModel(f=500.0, cx=500.0, cy=200.0, width=1000, height=400)
CAR = (1.8, 1.5)
PEDESTRIAN = (0.6, 1.7)
CAR_Y = 0.85  # camera mounted 1.6 m above ground
PED_Y = 0.75


@dataclass
class Scenario:
    name: str
    description: str
    camera: CameraModel
    objects: List[WorldObject]
    script: EgoScript


def _ramp(t, t0, t1, v0, v1):
    """Cosine blend from v0 (t <= t0) to v1 (t >= t1)."""
    s = np.clip((t - t0) / (t1 - t0), 0.0, 1.0)
    return v0 + (v1 - v0) * 0.5 * (1 - np.cos(np.pi * s))


def _profile(n: int, segments) -> np.ndarray:
    """Piecewise profile from (t_start, t_end, v_start, v_end) ramps on the frame clock."""
    t = np.arange(n) * DT
    out = np.zeros(n)
    for t0, t1, v0, v1 in segments:
        mask = t >= t0
        out[mask] = _ramp(t[mask], t0, t1, v0, v1)
    return out


def _populate(script: EgoScript, seed: int, spacing_s: float, lateral=(2.5, 7.0),
              ahead=(14.0, 32.0), ped_fraction=0.3, movers=0.25) -> List[WorldObject]:
    """Place objects along the ego route so they are in view at staggered times."""
    rng = np.random.Generator(np.random.PCG64(seed))
    poses = integrate_poses(script)
    n = len(poses)
    step = max(int(round(spacing_s / DT)), 1)
    objects = []
    oid = 1
    for k in range(0, n, step):
        p = poses[k]
        fwd = p.forward()
        right = np.array([fwd[1], -fwd[0]])
        for side in (-1.0, 1.0):
            dist = rng.uniform(*ahead)
            lat = side * rng.uniform(*lateral)
            is_ped = rng.random() < ped_fraction
            pos2 = np.array([p.x, p.z]) + dist * fwd + lat * right
            vel2 = np.zeros(2)
            if rng.random() < movers:
                # slow traffic along or across the road
                speed = rng.uniform(0.8, 1.6) if is_ped else rng.uniform(2.0, 6.0)
                heading = right if is_ped else fwd * rng.choice([-1.0, 1.0])
                vel2 = speed * heading * (-side if is_ped else 1.0)
            objects.append(WorldObject(
                id=oid,
                position=(float(pos2[0]), PED_Y if is_ped else CAR_Y, float(pos2[1])),
                velocity=(float(vel2[0]), 0.0, float(vel2[1])),
                size=PEDESTRIAN if is_ped else CAR,
                label="Pedestrian" if is_ped else "Car",
            ))
            oid += 1
    return objects


def _scenario_1() -> Scenario:
    n = 240
    script = EgoScript(np.full(n, DT), np.full(n, 10.0), np.zeros(n))
    return Scenario("1", "straight road at constant speed", CAMERA,
                    _populate(script, 101, 1.5), script)


def _scenario_2() -> Scenario:
    n = 260
    speed = _profile(n, [(0.0, 2.5, 0.0, 9.0)])
    yaw = _profile(n, [(6.0, 6.6, 0.0, 0.25), (10.4, 11.0, 0.25, 0.0)])
    script = EgoScript(np.full(n, DT), speed, yaw)
    return Scenario("2", "start from rest, straight, curve, end after the curve", CAMERA,
                    _populate(script, 202, 1.2), script)


def _scenario_3() -> Scenario:
    n = 320
    speed = _profile(n, [(0.0, 2.0, 0.0, 7.0), (13.0, 15.5, 7.0, 0.0)])
    # left turn, then a gentler right-hand curve, then stop
    yaw = _profile(n, [(4.0, 4.3, 0.0, 0.3), (8.8, 9.3, 0.3, 0.0),
                       (10.0, 10.5, 0.0, -0.15), (12.5, 13.0, -0.15, 0.0)])
    script = EgoScript(np.full(n, DT), speed, yaw)
    return Scenario("3", "start from rest, straight, left turn, curve, stop", CAMERA,
                    _populate(script, 303, 1.0), script)


def _scenario_4() -> Scenario:
    n = 300
    t = np.arange(n) * DT
    speed = _profile(n, [(0.0, 1.0, 6.0, 9.0), (11.0, 12.0, 9.0, 6.0)])
    weave = 0.3 * np.sin(2 * np.pi * t / 3.0) * (t < 10.5)
    yaw = weave + _profile(n, [(11.0, 11.4, 0.0, -0.35)])
    script = EgoScript(np.full(n, DT), speed, yaw)
    return Scenario("4", "winding path ending with a right turn", CAMERA,
                    _populate(script, 404, 1.0), script)


def builtin_scenarios() -> Dict[str, Scenario]:
    """The four scenario layouts, keyed "1".."4"."""
    return {s.name: s for s in (_scenario_1(), _scenario_2(), _scenario_3(), _scenario_4())}
