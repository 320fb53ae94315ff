import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from emaptrack.errors import DegenerateProjectionError
from emaptrack.geometry import (
    CameraModel,
    EgoMotionSample,
    box_from_centered,
    box_to_centered,
    exact_rotation_shift,
    exact_translation_shift,
    from_centered,
    linear_rotation_coeff,
    linear_translation_coeff,
    to_centered,
)

F = 500.0
CAM = CameraModel(f=F, cx=500.0, cy=200.0, width=1000, height=400)


def test_translation_worked_example():
    # u=100, d=20, 1 m of forward motion: 500*20*sin(0.2)/(20*cos(0.2)-1)
    got = exact_translation_shift(100.0, 20.0, EgoMotionSample(1.0, 0.0, 1.0), F)
    assert got == pytest.approx(106.8038, abs=1e-4)


def test_rotation_worked_example():
    got = exact_rotation_shift(100.0, EgoMotionSample(0.0, 0.2, 0.1), F)
    assert got == pytest.approx(110.443, abs=1e-3)


def test_rotation_at_principal_point_is_f_tan():
    got = exact_rotation_shift(0.0, EgoMotionSample(0.0, 0.02, 1.0), F)
    assert got == pytest.approx(500 * math.tan(0.02), abs=1e-9)
    assert got == pytest.approx(10.00133, abs=1e-5)


def test_linear_coefficients():
    assert linear_rotation_coeff(0.0, F) == pytest.approx(500.0)
    assert linear_rotation_coeff(50.0, F) == pytest.approx(505.0)
    # 100 * sqrt(100^2 + 500^2) / (500 * 20)
    assert linear_translation_coeff(100.0, F, 20.0) == pytest.approx(5.0990, abs=1e-4)
    assert linear_translation_coeff(0.0, F, 20.0) == 0.0


def test_rotation_is_tangent_addition():
    u = np.linspace(-400, 400, 17)
    a = 0.03
    got = exact_rotation_shift(u, EgoMotionSample(0.0, a, 1.0), F)
    np.testing.assert_allclose(got, F * np.tan(np.arctan(u / F) + a), atol=1e-9)


def test_zero_motion_translation_maps_angle_to_tangent():
    # the closed form treats u/f as a bearing, so zero motion gives f*tan(u/f)
    got = exact_translation_shift(100.0, 20.0, EgoMotionSample(0.0, 0.0, 1.0), F)
    assert got == pytest.approx(F * math.tan(0.2), abs=1e-9)


def test_translation_symmetric_in_u():
    ego = EgoMotionSample(8.0, 0.0, 0.1)
    u = np.array([30.0, 120.0, 250.0])
    np.testing.assert_allclose(exact_translation_shift(-u, 15.0, ego, F), -exact_translation_shift(u, 15.0, ego, F))


def test_vectorized_and_scalar_agree():
    ego = EgoMotionSample(3.0, 0.1, 0.1)
    u = np.array([-200.0, 0.0, 150.0])
    vec = exact_translation_shift(u, 12.0, ego, F)
    assert isinstance(exact_translation_shift(150.0, 12.0, ego, F), float)
    assert vec[2] == exact_translation_shift(150.0, 12.0, ego, F)


def test_degenerate_translation_raises():
    with pytest.raises(DegenerateProjectionError):
        exact_translation_shift(0.0, 1.0, EgoMotionSample(20.0, 0.0, 0.1), F)


def test_degenerate_rotation_raises():
    # 1 - (u/f) tan(a) <= 0 once the point wraps past 90 degrees
    with pytest.raises(DegenerateProjectionError):
        exact_rotation_shift(400.0, EgoMotionSample(0.0, 10.0, 0.1), F)


@pytest.mark.parametrize("bad", [0.0, -3.0])
def test_nonpositive_distance_rejected(bad):
    with pytest.raises(ValueError):
        exact_translation_shift(10.0, bad, EgoMotionSample(1.0, 0.0, 0.1), F)
    with pytest.raises(ValueError):
        linear_translation_coeff(10.0, F, bad)


def test_ego_sample_requires_positive_dt():
    with pytest.raises(ValueError):
        EgoMotionSample(1.0, 0.0, 0.0)


@pytest.mark.parametrize("kw", [dict(f=0), dict(width=0), dict(height=-1)])
def test_camera_validation(kw):
    args = dict(f=F, cx=500.0, cy=200.0, width=1000, height=400)
    args.update(kw)
    with pytest.raises(ValueError):
        CameraModel(**args)


def test_centering_dyadic_roundtrip_is_exact():
    x, y = 612.25, 37.5
    assert from_centered(*to_centered(x, y, CAM), CAM) == (x, y)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e4, 1e4, allow_nan=False), min_size=4, max_size=4))
def test_box_centering_roundtrip(box):
    back = box_from_centered(box_to_centered(box, CAM), CAM)
    np.testing.assert_allclose(back, box, rtol=0, atol=1e-9)


@settings(max_examples=200, deadline=None)
@given(st.floats(-279, 279), st.floats(-0.02, 0.02))
def test_rotation_linearization_small_angle(u, a):
    # inside |u| < 280 px the first-order error stays under 0.15 px
    exact = exact_rotation_shift(u, EgoMotionSample(0.0, a, 1.0), F) - u
    assert abs(linear_rotation_coeff(u, F) * a - exact) <= 0.15


@settings(max_examples=200, deadline=None)
@given(st.floats(-100, 100), st.floats(5, 80), st.floats(-0.01, 0.01))
def test_translation_linearization_matches_derivative(u, d, delta):
    # the coefficient is the derivative of the pinhole forward-motion map
    Z = d * F / math.hypot(u, F)
    X = u * Z / F
    true = F * X / (Z - delta) - u
    assert linear_translation_coeff(u, F, d) * delta == pytest.approx(true, abs=1e-3)
