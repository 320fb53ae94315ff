"""Ego-motion aware Kalman prediction for detection-based multi-object tracking."""

from .association import AssociationResult, Detection, associate, iou
from .emap import DepthSource, EmapMode, build_disturbance, emap_predict, estimate_target_depth
from .geometry import CameraModel, CenteredPoint, EgoMotionSample
from .kalman import KfModel, KfState
from .tracker import FrameBundle, Tracker, TrackerConfig, TrackRow, run_sequence

__version__ = "0.1.0"

__all__ = [
    "AssociationResult", "CameraModel", "CenteredPoint", "DepthSource", "Detection", "EgoMotionSample",
    "EmapMode", "FrameBundle", "KfModel", "KfState", "Tracker", "TrackerConfig", "TrackRow",
    "associate", "build_disturbance", "emap_predict", "estimate_target_depth", "iou", "run_sequence",
]
