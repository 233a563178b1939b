"""The compiled kernels must reproduce the numpy fallback to round-off."""

import numpy as np
import pytest

from rovernav import _kernels, _pykernels
from rovernav.geodesy import MARS, NON_ROTATING_EARTH, WGS84, euler_to_dcm

ck = pytest.importorskip("rovernav._ckernels")

MODELS = [WGS84, NON_ROTATING_EARTH, MARS]


def _spd(rng, n=15):
    A = rng.normal(size=(n, n))
    return A @ A.T + np.eye(n)


def test_backend_reported():
    assert _kernels.BACKEND in ("cython", "python")


@pytest.mark.parametrize("model", MODELS, ids=["wgs84", "nonrotating", "mars"])
@pytest.mark.parametrize("seed", range(5))
def test_mechanize_step_parity(model, seed):
    rng = np.random.default_rng(seed)
    C = euler_to_dcm(*rng.uniform(-1, 1, 3))
    v = rng.normal(size=3)
    pos = np.array([rng.uniform(-1.3, 1.3), rng.uniform(-3, 3), rng.uniform(-50, 500)])
    w = rng.normal(scale=0.5, size=3)
    f = rng.normal(size=3) + [0, 0, -9.8]
    a = _pykernels.mechanize_step(C, v, pos, w, f, 0.01, model.as_array())
    b = ck.mechanize_step(C, v, pos, w, f, 0.01, model.as_array())
    for x, y in zip(a, b):
        np.testing.assert_allclose(x, y, rtol=1e-13, atol=1e-14)


@pytest.mark.parametrize("taus", [(np.inf, np.inf), (300.0, 3600.0)])
def test_time_update_parity(rng, taus):
    C = euler_to_dcm(0.05, -0.1, 2.0)
    v, pos = np.array([1.0, -0.3, 0.02]), np.array([0.69, 0.1, 120.0])
    w, f = np.array([0.01, -0.02, 0.3]), np.array([0.2, 0.1, -9.81])
    P = _spd(rng) * 1e-4
    q = rng.uniform(1e-10, 1e-6, 15)
    args = (C, v, pos, w, f, 0.01, WGS84.as_array(), *taus, P, q)
    for x, y in zip(_pykernels.time_update(*args), ck.time_update(*args)):
        np.testing.assert_allclose(x, y, rtol=1e-12, atol=1e-18)


def test_window_add_parity(rng):
    a1 = np.zeros(_pykernels.WINDOW_SIZE)
    a2 = np.zeros(_pykernels.WINDOW_SIZE)
    L = np.array([-0.25, 0.0, 0.3])
    for _ in range(10):
        C = euler_to_dcm(*rng.uniform(-0.5, 0.5, 2), rng.uniform(-3, 3))
        v, w = rng.normal(size=3), rng.normal(size=3)
        y1 = _pykernels.window_add(C, v, w, L, 0.01, a1)
        y2 = ck.window_add(C, v, w, L, 0.01, a2)
        assert y1 == pytest.approx(y2, abs=1e-15)
    np.testing.assert_allclose(a1, a2, rtol=1e-13, atol=1e-15)


@pytest.mark.parametrize("m", [1, 2, 3, 4, 6])
def test_kalman_update_parity(rng, m):
    P = _spd(rng)
    H = rng.normal(size=(m, 15))
    R = np.diag(rng.uniform(0.1, 1.0, m))
    z = rng.normal(size=m)
    a = _pykernels.kalman_update(P, H, R, z)
    b = ck.kalman_update(P, H, R, z)
    np.testing.assert_allclose(a[0], b[0], rtol=1e-10, atol=1e-12)
    np.testing.assert_allclose(a[1], b[1], rtol=1e-10, atol=1e-12)
    assert a[2] == pytest.approx(b[2], rel=1e-10)


@pytest.mark.parametrize("impl", [_pykernels, ck], ids=["python", "cython"])
def test_kalman_update_flags_indefinite(impl):
    dx, P1, chi = impl.kalman_update(np.eye(15), np.zeros((2, 15)), -np.eye(2), np.ones(2))
    assert chi == -1.0 and dx is None and P1 is None


def test_rts_backward_parity(rng):
    N = 40
    P = np.array([_spd(rng) for _ in range(N)])
    Pp = np.array([_spd(rng) for _ in range(N)])
    phi = np.eye(15) + 0.01 * rng.normal(size=(N, 15, 15))
    u = rng.normal(size=(N, 15))
    a = _pykernels.rts_backward(P, phi, Pp, u)
    b = ck.rts_backward(P, phi, Pp, u)
    assert a[2] == b[2] == -1
    np.testing.assert_allclose(a[0], b[0], rtol=1e-9, atol=1e-12 * np.abs(a[0]).max())
    np.testing.assert_allclose(a[1], b[1], rtol=1e-9, atol=1e-12 * np.abs(a[1]).max())


@pytest.mark.parametrize("impl", [_pykernels, ck], ids=["python", "cython"])
def test_rts_backward_reports_bad_epoch(rng, impl):
    N = 6
    P = np.array([np.eye(15)] * N)
    Pp = np.array([np.eye(15)] * N)
    Pp[3, 4, 4] = 0.0
    _, _, bad = impl.rts_backward(P, np.array([np.eye(15)] * N), Pp, np.zeros((N, 15)))
    assert bad == 3
