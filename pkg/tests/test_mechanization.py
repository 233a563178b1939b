import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rovernav import sim
from rovernav.errors import InvalidDt, PolarSingularity
from rovernav.geodesy import (
    NON_ROTATING_EARTH,
    WGS84,
    earth_rate_ned,
    euler_to_dcm,
    gravity_ned,
    ned_delta,
    radii_of_curvature,
    skew,
    transport_rate,
)
from rovernav.mechanization import (
    ImuSample,
    NavState,
    attitude_update,
    mechanize,
    mechanize_reference,
    position_update,
    velocity_update,
)

LAT45 = math.radians(45.0)


def _state(C=None, v=(0, 0, 0), lat=LAT45, h=0.0):
    return NavState(np.eye(3) if C is None else C, np.array(v, float), (lat, 0.1, h), 0.0)


def _imu(w=(0, 0, 0), f=(0, 0, 0), t=0.01):
    return ImuSample(t, np.array(w, float), np.array(f, float))


# attitude ----------------------------------------------------------------------


def test_attitude_no_rotation():
    C = euler_to_dcm(0.1, -0.2, 1.0)
    C1 = attitude_update(_state(C), _imu(), 0.01, NON_ROTATING_EARTH)
    np.testing.assert_allclose(C1, C, atol=1e-15)


def test_attitude_yaw_step():
    C1 = attitude_update(_state(), _imu(w=(0, 0, 0.1)), 0.01, NON_ROTATING_EARTH)
    # first-order step then one orthonormalization pass; differs from I + skew by O(dt^2)
    np.testing.assert_allclose(C1, np.eye(3) + skew([0, 0, 0.001]), atol=1e-6)


def test_attitude_earth_rate_compensated():
    w = earth_rate_ned(LAT45)
    C1 = attitude_update(_state(), _imu(w=w), 0.01, WGS84)
    np.testing.assert_allclose(C1, np.eye(3), atol=1e-12)


@pytest.mark.parametrize("dt", [0.0, -0.01, 0.2])
def test_attitude_rejects_dt(dt):
    with pytest.raises(InvalidDt):
        attitude_update(_state(), _imu(), dt)


# velocity ----------------------------------------------------------------------


def test_velocity_static_equilibrium():
    s = _state()
    v1 = velocity_update(s, -gravity_ned(s.position, NON_ROTATING_EARTH), 0.01, NON_ROTATING_EARTH)
    np.testing.assert_array_equal(v1, 0.0)


def test_velocity_free_fall():
    s = _state()
    g = gravity_ned(s.position, NON_ROTATING_EARTH)[2]
    np.testing.assert_allclose(velocity_update(s, [0, 0, 0], 0.01, NON_ROTATING_EARTH), [0, 0, g * 0.01])


def test_velocity_coriolis_east():
    s = _state(v=(100, 0, 0))
    w_ie = earth_rate_ned(LAT45)
    term = 2.0 * np.cross(w_ie, s.velocity_ned)
    assert term[1] == pytest.approx(-2 * WGS84.rotation_rate * math.sin(LAT45) * 100)
    # the term is subtracted, so a northbound body drifts east (to its right)
    v1 = velocity_update(s, -gravity_ned(s.position), 0.01)
    assert v1[1] == pytest.approx(-term[1] * 0.01, rel=1e-12)
    # transport rate only couples into the vertical for pure north motion
    assert np.cross(transport_rate(s.position, s.velocity_ned), s.velocity_ned)[1] == 0.0


# position ----------------------------------------------------------------------


def test_position_at_rest():
    s = _state(lat=0.3, h=12.0)
    p = position_update(s, np.zeros(3), 0.01)
    assert p == s.position


def test_position_climb():
    s = _state(v=(0, 0, -1), h=5.0)
    assert position_update(s, np.array([0, 0, -1.0]), 1.0).height == pytest.approx(6.0)


def test_position_north_step():
    s = _state(v=(1, 0, 0), lat=0.0)
    p = position_update(s, np.array([1.0, 0, 0]), 1.0)
    r_n, _ = radii_of_curvature(0.0)
    assert p.latitude == pytest.approx(1.0 / r_n, rel=1e-12)


def test_position_polar_guard():
    with pytest.raises(PolarSingularity):
        position_update(_state(lat=math.radians(89.95)), np.zeros(3), 0.01)


# mechanize ---------------------------------------------------------------------


def test_reference_and_kernel_agree(rng):
    from conftest import random_dcm

    for _ in range(20):
        s = NavState(random_dcm(rng), rng.normal(size=3), (rng.uniform(-1.2, 1.2), rng.uniform(-3, 3), rng.uniform(-100, 3000)))
        imu = _imu(w=rng.normal(scale=0.3, size=3), f=rng.normal(scale=3, size=3) + [0, 0, -9.8])
        a = mechanize(s, imu, 0.01)
        b = mechanize_reference(s, imu, 0.01)
        np.testing.assert_allclose(a.attitude, b.attitude, atol=1e-15)
        np.testing.assert_allclose(a.velocity_ned, b.velocity_ned, atol=1e-13)
        np.testing.assert_allclose(a.llh, b.llh, rtol=1e-14, atol=1e-15)


def test_mechanize_default_dt_from_time():
    s = _state()
    out = mechanize(s, _imu(t=0.02))
    assert out.time == pytest.approx(0.02)
    with pytest.raises(InvalidDt):
        mechanize(s, _imu(t=0.0))


def test_static_earth_rate_compensated_sixty_seconds():
    s = _state()
    C = s.attitude
    w = C.T @ earth_rate_ned(LAT45)
    f = -C.T @ gravity_ned(s.position)
    for k in range(1, 6001):
        s = mechanize(s, _imu(w=w, f=f, t=k * 0.01))
    assert np.linalg.norm(s.velocity_ned) < 1e-6


def test_constant_north_acceleration():
    s = _state(lat=0.2)
    g = gravity_ned(s.position, NON_ROTATING_EARTH)
    p0 = s.position
    for k in range(1, 1001):
        f = np.array([1.0, 0.0, 0.0]) - gravity_ned(s.position, NON_ROTATING_EARTH)
        s = mechanize(s, _imu(f=f, t=k * 0.01), model=NON_ROTATING_EARTH)
    assert s.velocity_ned[0] == pytest.approx(10.0, abs=1e-3)
    assert ned_delta(p0, s.position, NON_ROTATING_EARTH)[0] == pytest.approx(50.0, abs=0.1)
    assert g[2] > 9.7


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(-30, 30))
def test_step_stays_orthonormal(wx, wy, wz, fx):
    s = _state(euler_to_dcm(0.2, 0.1, -2.0))
    out = mechanize(s, _imu(w=(wx, wy, wz), f=(fx, 0, -9.8)), 0.01)
    assert np.linalg.norm(out.attitude.T @ out.attitude - np.eye(3)) < 1e-9


def test_deterministic(rng):
    w = rng.normal(scale=0.1, size=(200, 3))
    f = rng.normal(size=(200, 3)) + [0, 0, -9.8]

    def run():
        s = _state()
        for k in range(200):
            s = mechanize(s, _imu(w[k], f[k], (k + 1) * 0.01))
        return s

    a, b = run(), run()
    assert a.attitude.tobytes() == b.attitude.tobytes()
    assert a.llh.tobytes() == b.llh.tobytes()


def test_static_oracle_from_simulator():
    scn = sim.Scenario(name="static", initial_static=60.0, origin=(math.radians(39.65), 0.3, 250.0))
    tr = sim.generate_truth(scn)
    imu = sim.synthesize_imu(tr, noise=False)
    s = NavState(tr.C[0], tr.v[0], tr.llh[0], tr.t[0])
    for k in range(len(imu.t)):
        s = mechanize(s, ImuSample(imu.t[k], imu.gyro[k], imu.accel[k]))
    assert np.linalg.norm(s.velocity_ned) < 1e-6
    assert np.linalg.norm(ned_delta(tr.llh[0], s.position)[:2]) < 1e-3


def _circle_error(dt, T=60.0):
    """Terminal error on an analytic 10 m circle driven with continuous-time rates."""
    model = NON_ROTATING_EARTH
    lat0, R, u = 0.3, 10.0, 1.0
    w = u / R
    r_n, r_e = radii_of_curvature(lat0, model)

    def truth(t):
        xn, xe = R * math.sin(w * t), R * (1 - math.cos(w * t))
        v = np.array([u * math.cos(w * t), u * math.sin(w * t), 0.0])
        a = np.array([-u * w * math.sin(w * t), u * w * math.cos(w * t), 0.0])
        return (lat0 + xn / r_n, xe / (r_e * math.cos(lat0)), 0.0), v, a, euler_to_dcm(0, 0, w * t)

    pos, v, _, C = truth(0.0)
    s = NavState(C, v, pos, 0.0)
    n = int(round(T / dt))
    for k in range(n):
        pos, v, a, C = truth(k * dt)
        w_en = transport_rate(pos, v, model)
        gyro = C.T @ w_en + [0, 0, w]
        f = C.T @ (a - gravity_ned(pos, model) + np.cross(w_en, v))
        s = mechanize(s, _imu(gyro, f, (k + 1) * dt), dt, model)
    return np.linalg.norm(ned_delta(truth(T)[0], s.position, model)[:2])


def test_first_order_convergence():
    assert _circle_error(0.02) / _circle_error(0.01) >= 1.8
