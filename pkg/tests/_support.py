"""Shared builders for tests: synthetic sequences wired into tracker inputs."""

from __future__ import annotations

from emaptrack import metrics, synth
from emaptrack.tracker import FrameBundle, TrackRow

CAM = synth.CAMERA


def gt_rows(frames):
    return [TrackRow(f.index, b.object_id, b.label, b.box, 1.0) for f in frames for b in f.boxes]


def bundles(frames, dets):
    return [FrameBundle(f.index, d, f.ego) for f, d in zip(frames, dets)]


def sequence(scn, dropout=0.0, seed=0, noise=0.0, omit=()):
    """(SequenceInput, simulated frames) for one scenario."""
    frames = synth.simulate(scn.objects, scn.script, scn.camera)
    dets = synth.corrupt(frames, synth.DropoutSchedule(frozenset(omit), dropout), noise, seed)
    seq = metrics.SequenceInput(scn.name, bundles(frames, dets), scn.camera, gt_rows(frames))
    return seq, frames


def row(frame, tid, box, label="Car"):
    return TrackRow(frame, tid, label, tuple(float(v) for v in box), 1.0)
