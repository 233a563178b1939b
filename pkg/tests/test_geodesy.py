import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rovernav.errors import GimbalLock, RangeExceeded
from rovernav.geodesy import (
    MARS,
    NON_ROTATING_EARTH,
    WGS84,
    EllipsoidModel,
    GeodeticPosition,
    dcm_to_euler,
    earth_rate_ned,
    euler_to_dcm,
    gravity_ned,
    ned_delta,
    orthonormalize,
    radii_of_curvature,
    skew,
    spherical,
    transport_rate,
    wrap_longitude,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
vec3 = st.tuples(finite, finite, finite)
lats = st.floats(-math.pi / 2, math.pi / 2)


def test_skew_known_matrix():
    np.testing.assert_array_equal(skew([1, 2, 3]), [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])
    np.testing.assert_array_equal(skew([0, 0, 0]), np.zeros((3, 3)))
    v = np.array([0.3, -0.1, 0.7])
    np.testing.assert_allclose(skew(v) @ v, 0.0, atol=1e-16)


@given(vec3, vec3)
def test_skew_matches_cross(a, b):
    S = skew(a)
    assert np.array_equal(S, -S.T)
    # cancellation error scales with |a||b|, not with |a x b|
    scale = np.linalg.norm(a) * np.linalg.norm(b)
    np.testing.assert_allclose(S @ np.array(b), np.cross(a, b), rtol=0, atol=1e-14 * scale + 1e-300)


def test_radii_equator_wgs84():
    r_n, r_e = radii_of_curvature(0.0)
    # a (1 - e^2), evaluated in extended precision
    assert r_n == pytest.approx(6335439.32729283, abs=1e-6)
    assert r_e == pytest.approx(6378137.0, abs=1e-9)


def test_radii_pole_equal():
    r_n, r_e = radii_of_curvature(math.pi / 2)
    assert r_n == pytest.approx(r_e, rel=1e-14)
    assert r_n == pytest.approx(6399593.62575849, abs=1e-6)


@pytest.mark.parametrize("lat", [-1.2, 0.0, 0.4, 1.5])
def test_radii_sphere(lat):
    m = spherical(1000.0, 1.0)
    assert radii_of_curvature(lat, m) == pytest.approx((1000.0, 1000.0))


@given(st.floats(0.0, math.pi / 2 - 1e-3))
def test_radii_ordering_and_monotone(lat):
    r_n, r_e = radii_of_curvature(lat)
    assert r_n <= r_e
    r_n2, r_e2 = radii_of_curvature(lat + 1e-3)
    assert r_n2 > r_n and r_e2 > r_e
    assert radii_of_curvature(-lat) == pytest.approx((r_n, r_e), rel=1e-15)


def test_gravity_45_deg():
    # closed-form Somigliana with polar gravity 9.8321849378 and b = a (1 - f)
    g = gravity_ned(GeodeticPosition(math.radians(45.0), 0.0, 0.0))
    np.testing.assert_allclose(g, [0.0, 0.0, 9.80619776934], atol=1e-9)


def test_gravity_decreases_with_height():
    lat = math.radians(39.65)
    assert gravity_ned((lat, 0, 1000.0))[2] < gravity_ned((lat, 0, 0.0))[2]


@pytest.mark.parametrize("h", [0.0, 500.0, 2.0e4])
def test_gravity_spherical_inverse_square(h):
    m = spherical(6.0e6, 9.5)
    np.testing.assert_allclose(gravity_ned((0.3, 0.0, h), m), [0, 0, 9.5 * (6.0e6 / (6.0e6 + h)) ** 2], rtol=1e-15)


@given(lats)
def test_gravity_earth_band(lat):
    assert 9.77 <= gravity_ned((lat, 0.0, 0.0))[2] <= 9.84


def test_mars_gravity_is_weaker():
    assert gravity_ned((0.2, 0.0, 0.0), MARS)[2] < 4.0


def test_earth_rate_cases():
    np.testing.assert_allclose(earth_rate_ned(math.pi / 2), [0, 0, -7.292115e-5], atol=1e-20)
    np.testing.assert_allclose(earth_rate_ned(0.0), [7.292115e-5, 0, 0])
    np.testing.assert_array_equal(np.abs(earth_rate_ned(0.7, NON_ROTATING_EARTH)), 0.0)


@given(lats)
def test_earth_rate_magnitude(lat):
    assert np.linalg.norm(earth_rate_ned(lat)) == pytest.approx(WGS84.rotation_rate, rel=1e-15)


def test_transport_rate_cases():
    np.testing.assert_array_equal(transport_rate((0.5, 0, 10), [0, 0, 0]), 0.0)
    r_n, _ = radii_of_curvature(0.0)
    np.testing.assert_allclose(transport_rate((0, 0, 0), [10, 0, 0]), [0, -10 / r_n, 0], rtol=1e-15)
    north = transport_rate((0.4, 0, 0), [3, 1, 0])
    south = transport_rate((0.4, 0, 0), [-3, 1, 0])
    assert north[1] == -south[1]


def test_euler_identity_and_quarter_turn():
    np.testing.assert_allclose(euler_to_dcm(0, 0, 0), np.eye(3))
    r, p, y = dcm_to_euler(euler_to_dcm(0, 0, math.pi / 2))
    assert (r, p) == pytest.approx((0, 0), abs=1e-12)
    assert y == pytest.approx(math.pi / 2, abs=1e-12)


@given(st.floats(-3.1, 3.1), st.floats(-1.4, 1.4), st.floats(-3.1, 3.1))
def test_euler_round_trip(r, p, y):
    C = euler_to_dcm(r, p, y)
    np.testing.assert_allclose(C.T @ C, np.eye(3), atol=1e-14)
    assert np.linalg.det(C) == pytest.approx(1.0)
    np.testing.assert_allclose(dcm_to_euler(C), (r, p, y), atol=1e-10)


def test_gimbal_lock():
    with pytest.raises(GimbalLock):
        dcm_to_euler(euler_to_dcm(0.1, math.pi / 2, 0.2))


def test_orthonormalize_reduces_error(rng):
    C = euler_to_dcm(0.1, 0.2, 0.3) + 1e-6 * rng.normal(size=(3, 3))
    before = np.linalg.norm(C.T @ C - np.eye(3))
    C1 = orthonormalize(C)
    after = np.linalg.norm(C1.T @ C1 - np.eye(3))
    assert after < 1e-9 and after < before


def test_ned_delta_examples():
    p = GeodeticPosition(math.radians(39.65), math.radians(-79.95), 300.0)
    np.testing.assert_array_equal(ned_delta(p, p), 0.0)
    up = GeodeticPosition(p.latitude, p.longitude, 305.0)
    np.testing.assert_allclose(ned_delta(p, up), [0, 0, 5])
    north = GeodeticPosition(p.latitude + 1e-6, p.longitude, 300.0)
    assert ned_delta(p, north)[0] == pytest.approx(6.36173089645, abs=1e-9)


def test_ned_delta_range():
    with pytest.raises(RangeExceeded):
        ned_delta((0.0, 0.0, 0.0), (math.radians(1.5), 0.0, 0.0))


def test_ned_delta_across_dateline():
    d = ned_delta((0.0, math.pi - 1e-7, 0.0), (0.0, -math.pi + 1e-7, 0.0))
    assert d[1] == pytest.approx(2e-7 * 6378137.0, rel=1e-6)


@pytest.mark.parametrize("lon,expect", [(math.pi, math.pi), (-math.pi, math.pi), (3 * math.pi / 2, -math.pi / 2), (0.1, 0.1)])
def test_wrap_longitude(lon, expect):
    assert wrap_longitude(lon) == pytest.approx(expect)


def test_model_and_position_validation():
    with pytest.raises(ValueError):
        EllipsoidModel(-1.0, 0.0, 0.0, 9.8)
    with pytest.raises(ValueError):
        EllipsoidModel(1.0, 1.0, 0.0, 9.8)
    with pytest.raises(ValueError):
        GeodeticPosition(2.0, 0.0, 0.0)
