"""Per-frame predict -> associate -> update -> lifecycle loop."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional

import numpy as np

from . import kalman
from .association import Detection, associate
from .emap import DEFAULT_MAX_RANGE, DepthSource, EmapMode, emap_predict, estimate_target_depth
from .errors import OutOfOrderFrameError
from .geometry import CameraModel, EgoMotionSample

log = logging.getLogger(__name__)


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    CONFIRMED = "confirmed"
    LOST = "lost"


@dataclass
class TrackerConfig:
    mode: EmapMode = EmapMode.BASELINE
    iou_min: float = 0.3
    max_age: int = 10
    min_hits: int = 2
    dt_default: float = 0.1
    report_extrapolated: bool = False
    freeze_gap_depth: bool = False
    max_range: float = DEFAULT_MAX_RANGE
    noise: kalman.NoiseConfig = field(default_factory=kalman.NoiseConfig)

    def __post_init__(self):
        if self.max_age < 1 or self.min_hits < 1:
            raise ValueError("max_age and min_hits must be >= 1")
        if not self.dt_default > 0:
            raise ValueError("dt_default must be positive")


@dataclass
class FrameBundle:
    """Everything the tracker consumes for one time step."""

    index: int
    detections: List[Detection] = field(default_factory=list)
    ego: Optional[EgoMotionSample] = None
    depth: Optional[np.ndarray] = None  # metric depth image, if any

    def __post_init__(self):
        for d in self.detections:
            if d.frame != self.index:
                raise ValueError(f"detection of frame {d.frame} bundled into frame {self.index}")


@dataclass
class Track:
    id: int
    kf: kalman.KfState
    label: str
    diag: float
    score: float
    hits: int = 1
    age: int = 0
    time_since_update: int = 0
    status: TrackStatus = TrackStatus.TENTATIVE
    depth: Optional[float] = None

    @property
    def box(self) -> np.ndarray:
        return self.kf.x[:4]


@dataclass(frozen=True)
class TrackRow:
    frame: int
    id: int
    label: str
    box: tuple
    score: float
    extrapolated: bool = False


class Tracker:
    """Stateful multi-object tracker for one sequence."""

    def __init__(self, cam: CameraModel, cfg: Optional[TrackerConfig] = None):
        self.cam = cam
        self.cfg = cfg or TrackerConfig()
        self.tracks: List[Track] = []
        self.last_frame: Optional[int] = None
        self._next_id = 1

    # -- helpers ---------------------------------------------------------

    def _depth_for(self, track: Track, frame: FrameBundle) -> Optional[float]:
        if not self.cfg.mode.uses_translation:
            return None
        in_gap = track.time_since_update > 0
        if frame.depth is not None and not (self.cfg.freeze_gap_depth and in_gap):
            src = DepthSource(image=frame.depth, max_range=self.cfg.max_range)
            return estimate_target_depth(track.box, src, self.cam)
        return track.depth

    def _detection_depth(self, det: Detection, frame: FrameBundle) -> Optional[float]:
        src = DepthSource(image=frame.depth, scalar=det.depth, max_range=self.cfg.max_range)
        return estimate_target_depth(det.box, src, self.cam)

    def _spawn(self, det: Detection, frame: FrameBundle) -> Track:
        t = Track(
            id=self._next_id,
            kf=kalman.initiate(det.box, self.cfg.noise),
            label=det.label,
            diag=kalman.box_diagonal(det.box),
            score=det.score,
            depth=self._detection_depth(det, frame),
        )
        if self.cfg.min_hits <= 1:
            t.status = TrackStatus.CONFIRMED
        self._next_id += 1
        return t

    # -- main loop -------------------------------------------------------

    def step(self, frame: FrameBundle) -> List[TrackRow]:
        if self.last_frame is not None and frame.index <= self.last_frame:
            raise OutOfOrderFrameError(f"frame {frame.index} after frame {self.last_frame}")
        self.last_frame = frame.index
        cfg = self.cfg
        dt = frame.ego.dt if frame.ego is not None else cfg.dt_default

        for t in self.tracks:
            model = kalman.make_model(t.diag, dt, cfg.noise)
            depth = self._depth_for(t, frame)
            t.kf = emap_predict(t.kf, model, frame.ego, depth, cfg.mode, self.cam)
            t.age += 1
            t.time_since_update += 1

        result = associate(
            [t.id for t in self.tracks],
            [t.box for t in self.tracks],
            [t.label for t in self.tracks],
            frame.detections,
            cfg.iou_min,
        )

        by_id: Dict[int, Track] = {t.id: t for t in self.tracks}
        for tid, di in result.matches:
            t, det = by_id[tid], frame.detections[di]
            model = kalman.make_model(t.diag, dt, cfg.noise)
            t.kf = kalman.update(t.kf, det.box, model)
            t.hits += 1
            t.time_since_update = 0
            t.score = det.score
            d = self._detection_depth(det, frame)
            if d is not None:
                t.depth = d
            if t.status is TrackStatus.LOST or t.hits >= cfg.min_hits:
                t.status = TrackStatus.CONFIRMED

        dead = set()
        for tid in result.unmatched_tracks:
            t = by_id[tid]
            t.hits = 0
            if t.time_since_update > cfg.max_age:
                dead.add(tid)
            elif t.status is TrackStatus.CONFIRMED:
                t.status = TrackStatus.LOST
        if dead:
            log.debug("frame %d: terminating tracks %s", frame.index, sorted(dead))
        self.tracks = [t for t in self.tracks if t.id not in dead]

        for di in result.unmatched_detections:
            self.tracks.append(self._spawn(frame.detections[di], frame))

        rows = []
        for t in sorted(self.tracks, key=lambda t: t.id):
            if t.status is TrackStatus.CONFIRMED and t.time_since_update == 0:
                rows.append(self._row(frame.index, t, False))
            elif t.status is TrackStatus.LOST and cfg.report_extrapolated:
                rows.append(self._row(frame.index, t, True))
        return rows

    @staticmethod
    def _row(frame: int, t: Track, extrapolated: bool) -> TrackRow:
        return TrackRow(frame, t.id, t.label, tuple(float(v) for v in t.box), t.score, extrapolated)


def run_sequence(
    frames: Iterable[FrameBundle], cam: CameraModel, cfg: Optional[TrackerConfig] = None
) -> List[TrackRow]:
    """Track a whole sequence; rows come out ordered by (frame, id)."""
    tracker = Tracker(cam, cfg)
    table: List[TrackRow] = []
    for frame in frames:
        table.extend(tracker.step(frame))
    return table
