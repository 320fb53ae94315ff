import numpy as np
import pytest

import _support as S
from emaptrack import synth
from emaptrack.association import Detection
from emaptrack.emap import EmapMode
from emaptrack.errors import OutOfOrderFrameError
from emaptrack.geometry import EgoMotionSample
from emaptrack.tracker import FrameBundle, Tracker, TrackerConfig, TrackStatus, run_sequence

CAM = synth.CAMERA
BOX = (400.0, 150.0, 460.0, 190.0)


def _frame(k, boxes, ego=None):
    return FrameBundle(k, [Detection(k, b, 0.9) for b in boxes], ego)


def test_first_frame_spawns_tentative_and_reports_nothing():
    trk = Tracker(CAM)
    assert trk.step(_frame(0, [BOX])) == []
    assert [t.status for t in trk.tracks] == [TrackStatus.TENTATIVE]
    assert trk.tracks[0].id == 1


def test_confirmed_after_min_hits():
    trk = Tracker(CAM, TrackerConfig(min_hits=2))
    trk.step(_frame(0, [BOX]))
    rows = trk.step(_frame(1, [BOX]))
    assert [(r.frame, r.id) for r in rows] == [(1, 1)]
    assert not rows[0].extrapolated


def test_min_hits_one_reports_immediately():
    rows = Tracker(CAM, TrackerConfig(min_hits=1)).step(_frame(0, [BOX]))
    assert len(rows) == 1


def test_static_scene_keeps_ids():
    boxes = [BOX, (100.0, 100.0, 140.0, 160.0)]
    table = run_sequence([_frame(k, boxes) for k in range(30)], CAM)
    assert {r.id for r in table} == {1, 2}
    assert len(table) == 2 * 29
    for r in table:
        np.testing.assert_allclose(r.box, boxes[r.id - 1], atol=1e-6)


def test_lost_and_terminated_after_max_age():
    cfg = TrackerConfig(max_age=3, report_extrapolated=True)
    trk = Tracker(CAM, cfg)
    trk.step(_frame(0, [BOX]))
    trk.step(_frame(1, [BOX]))
    for k in range(2, 5):
        rows = trk.step(_frame(k, []))
        assert [r.extrapolated for r in rows] == [True]
        assert trk.tracks[0].status is TrackStatus.LOST
    assert trk.step(_frame(5, [])) == [] and trk.tracks == []


def test_lost_track_recovers_same_id():
    trk = Tracker(CAM)
    for k in range(3):
        trk.step(_frame(k, [BOX]))
    trk.step(_frame(3, []))
    rows = trk.step(_frame(4, [BOX]))
    assert [r.id for r in rows] == [1]
    assert trk.tracks[0].status is TrackStatus.CONFIRMED


def test_extrapolated_rows_hidden_by_default():
    trk = Tracker(CAM)
    trk.step(_frame(0, [BOX]))
    trk.step(_frame(1, [BOX]))
    assert trk.step(_frame(2, [])) == []


def test_out_of_order_frame_rejected():
    trk = Tracker(CAM)
    trk.step(_frame(5, [BOX]))
    with pytest.raises(OutOfOrderFrameError):
        trk.step(_frame(5, [BOX]))


def test_frame_bundle_checks_detection_frames():
    with pytest.raises(ValueError):
        FrameBundle(3, [Detection(2, BOX)])


@pytest.mark.parametrize("kw", [dict(max_age=0), dict(min_hits=0), dict(dt_default=0.0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        TrackerConfig(**kw)


def test_ids_are_increasing_and_never_reused():
    scn = synth.builtin_scenarios()["2"]
    seq, _ = S.sequence(scn, 0.1, 4, 1.0)
    trk = Tracker(CAM, TrackerConfig(mode=EmapMode.FULL, dt_default=synth.DT))
    seen = set()
    for b in seq.frames:
        before = max(seen, default=0)
        trk.step(b)
        new = {t.id for t in trk.tracks} - seen
        assert all(i > before for i in new)
        seen |= new
    assert min(seen) == 1


@pytest.mark.parametrize("mode", list(EmapMode))
def test_deterministic(mode):
    scn = synth.builtin_scenarios()["4"]
    seq, _ = S.sequence(scn, 0.1, 1, 1.0)
    cfg = TrackerConfig(mode=mode, dt_default=synth.DT)
    assert run_sequence(seq.frames, CAM, cfg) == run_sequence(seq.frames, CAM, cfg)


def test_zero_ego_modes_identical():
    scn = synth.builtin_scenarios()["1"]
    seq, _ = S.sequence(scn, 0.05, 2, 0.5)
    still = [FrameBundle(b.index, b.detections, EgoMotionSample(0.0, 0.0, b.ego.dt)) for b in seq.frames]
    tables = [run_sequence(still, CAM, TrackerConfig(mode=m, dt_default=synth.DT)) for m in EmapMode]
    assert all(t == tables[0] for t in tables)


def test_depth_image_used_when_no_scalar():
    img = np.zeros((CAM.height, CAM.width))
    img[150:190, 400:460] = 12.0
    frames = [FrameBundle(k, [Detection(k, BOX)], EgoMotionSample(5.0, 0.0, 0.1), img) for k in range(3)]
    trk = Tracker(CAM, TrackerConfig(mode=EmapMode.FULL))
    for f in frames:
        trk.step(f)
    assert trk.tracks[0].depth == 12.0


def test_full_mode_keeps_track_through_turn_gap():
    # a pure left turn moves a static object sideways; only the compensated filter follows it
    obj = [synth.WorldObject(1, (0.0, 0.85, 20.0))]
    yaw = np.where(np.arange(40) >= 10, 0.4, 0.0)  # the turn begins with the gap
    script = synth.EgoScript(np.full(40, 0.05), np.zeros(40), yaw)
    frames = synth.simulate(obj, script, CAM)
    omit = {(k, 1) for k in range(10, 16)}
    dets = synth.corrupt(frames, synth.DropoutSchedule(frozenset(omit)))
    bundles = S.bundles(frames, dets)
    ids = {}
    for mode in (EmapMode.BASELINE, EmapMode.FULL):
        table = run_sequence(bundles, CAM, TrackerConfig(mode=mode, dt_default=0.05))
        ids[mode] = {r.id for r in table}
    assert ids[EmapMode.FULL] == {1}
    assert len(ids[EmapMode.BASELINE]) > 1
