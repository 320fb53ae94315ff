import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emaptrack.association import Detection, associate, iou, iou_matrix, max_weight_matching


def test_iou_half_overlap_is_one_third():
    # two 10x10 squares sharing half their area: 50 / 150
    assert iou((0, 0, 10, 10), (5, 0, 15, 10)) == pytest.approx(1 / 3)


def test_iou_identity_and_disjoint():
    assert iou((0, 0, 4, 4), (0, 0, 4, 4)) == 1.0
    assert iou((0, 0, 4, 4), (4, 0, 8, 4)) == 0.0
    assert iou((0, 0, 0, 0), (0, 0, 0, 0)) == 0.0


def test_iou_matrix_shape_and_values():
    m = iou_matrix([(0, 0, 10, 10), (20, 0, 30, 10)], [(5, 0, 15, 10), (0, 0, 10, 10), (100, 0, 110, 10)])
    assert m.shape == (2, 3)
    np.testing.assert_allclose(m[0], [1 / 3, 1.0, 0.0])
    assert iou_matrix([], [(0, 0, 1, 1)]).shape == (0, 1)


@settings(max_examples=300, deadline=None)
@given(st.lists(st.floats(0, 100), min_size=8, max_size=8))
def test_iou_symmetric_and_bounded(v):
    a = (min(v[0], v[2]), min(v[1], v[3]), max(v[0], v[2]), max(v[1], v[3]))
    b = (min(v[4], v[6]), min(v[5], v[7]), max(v[4], v[6]), max(v[5], v[7]))
    assert 0.0 <= iou(a, b) <= 1.0
    assert iou(a, b) == pytest.approx(iou(b, a))


def test_greedy_trap_is_avoided():
    # greedy takes the 0.9 pair and leaves 0.1; the optimum is 0.8 + 0.8
    w = np.array([[0.9, 0.8], [0.8, 0.1]])
    assert sorted(max_weight_matching(w)) == [(0, 1), (1, 0)]


def test_zero_weights_never_matched():
    assert max_weight_matching(np.zeros((2, 2))) == []


def _dets(boxes, label="Car"):
    return [Detection(0, b, 1.0, label) for b in boxes]


def test_gating_and_leftovers():
    tracks = [(0, 0, 10, 10), (50, 50, 60, 60)]
    dets = _dets([(1, 0, 11, 10), (80, 80, 90, 90)])
    res = associate([7, 3], tracks, ["Car", "Car"], dets, iou_min=0.3)
    assert res.matches == [(7, 0)]
    assert res.unmatched_tracks == [3]
    assert res.unmatched_detections == [1]


def test_iou_below_gate_rejected():
    res = associate([1], [(0, 0, 10, 10)], ["Car"], _dets([(6, 0, 16, 10)]), iou_min=0.3)
    assert res.matches == []


def test_class_gating():
    res = associate([1], [(0, 0, 10, 10)], ["Car"], _dets([(0, 0, 10, 10)], "Pedestrian"))
    assert res.matches == [] and res.unmatched_detections == [0]


def test_tie_broken_by_track_id():
    # two identical tracks compete for one detection: the lower id wins
    res = associate([9, 4], [(0, 0, 10, 10), (0, 0, 10, 10)], ["Car"] * 2, _dets([(0, 0, 10, 10)]))
    assert res.matches == [(4, 0)]


def test_empty_inputs():
    res = associate([], [], [], _dets([(0, 0, 1, 1)]))
    assert res.unmatched_detections == [0]
    res = associate([2], [(0, 0, 1, 1)], ["Car"], [])
    assert res.unmatched_tracks == [2]


@pytest.mark.parametrize("bad", [(5, 0, 1, 4), (0, 0, float("nan"), 1)])
def test_detection_validation(bad):
    with pytest.raises(ValueError):
        Detection(0, bad)


def _brute(w):
    n, m = w.shape
    if n > m:
        return _brute(w.T)
    return max(sum(w[i, c] for i, c in enumerate(cols)) for cols in itertools.permutations(range(m), n))


@pytest.mark.parametrize("seed", range(5))
def test_random_instances_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(60):
        n, m = rng.integers(1, 6, size=2)
        w = rng.random((n, m)) * (rng.random((n, m)) > 0.3)
        got = sum(w[r, c] for r, c in max_weight_matching(w))
        assert got == pytest.approx(_brute(w), abs=1e-12)
