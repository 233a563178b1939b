"""
Strapdown INS propagation in the local NED frame.

The three constituent updates are exposed individually for inspection and
testing; :func:`mechanize` runs the fused kernel used by the filter loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import InvalidDt, PolarSingularity
from .geodesy import (
    WGS84,
    EllipsoidModel,
    GeodeticPosition,
    earth_rate_ned,
    gravity_ned,
    orthonormalize,
    radii_of_curvature,
    skew,
    transport_rate,
    wrap_longitude,
)

MAX_DT = 0.1
MAX_LATITUDE = math.radians(89.9)


@dataclass
class NavState:
    """Total navigation state: body-to-NED DCM, NED velocity, geodetic position."""

    attitude: NDArray[np.float64]
    velocity_ned: NDArray[np.float64]
    position: GeodeticPosition
    time: float = 0.0

    def __post_init__(self):
        self.attitude = np.asarray(self.attitude, dtype=float)
        self.velocity_ned = np.asarray(self.velocity_ned, dtype=float)
        if not isinstance(self.position, GeodeticPosition):
            self.position = GeodeticPosition.from_array(self.position)

    @property
    def llh(self) -> NDArray[np.float64]:
        return self.position.as_array()

    def copy(self) -> NavState:
        return NavState(
            self.attitude.copy(), self.velocity_ned.copy(), self.position, self.time
        )


@dataclass(frozen=True)
class ImuSample:
    time: float
    angular_rate: NDArray[np.float64] = field(repr=False)
    specific_force: NDArray[np.float64] = field(repr=False)


def _check_dt(dt: float, upper: float | None = MAX_DT) -> None:
    if not dt > 0.0 or (upper is not None and dt > upper):
        raise InvalidDt(f"dt={dt!r} outside (0, {upper}]")


def _check_latitude(lat: float) -> None:
    if abs(lat) > MAX_LATITUDE:
        raise PolarSingularity(f"latitude {math.degrees(lat):.4f} deg too close to pole")


def attitude_update(
    state: NavState, imu: ImuSample, dt: float, model: EllipsoidModel = WGS84
) -> NDArray[np.float64]:
    _check_dt(dt)
    C = state.attitude
    pos = state.position
    w_in = earth_rate_ned(pos.latitude, model) + transport_rate(
        pos, state.velocity_ned, model
    )
    c1 = C @ (np.eye(3) + skew(imu.angular_rate) * dt) - skew(w_in) @ C * dt
    return orthonormalize(c1)


def velocity_update(
    state: NavState, f_ned, dt: float, model: EllipsoidModel = WGS84
) -> NDArray[np.float64]:
    """``f_ned`` must already be resolved with the mid-interval attitude."""
    _check_dt(dt, upper=None)
    pos = state.position
    v = state.velocity_ned
    coriolis = transport_rate(pos, v, model) + 2.0 * earth_rate_ned(pos.latitude, model)
    return v + (np.asarray(f_ned) + gravity_ned(pos, model) - np.cross(coriolis, v)) * dt


def position_update(
    state: NavState, v_new, dt: float, model: EllipsoidModel = WGS84
) -> GeodeticPosition:
    """Trapezoidal position update; both latitude terms use R_N at the old latitude."""
    _check_dt(dt, upper=None)
    lat, lon, h = state.llh
    _check_latitude(lat)
    v0 = state.velocity_ned
    r_n, r_e = radii_of_curvature(lat, model)
    h1 = h - 0.5 * dt * (v0[2] + v_new[2])
    lat1 = lat + 0.5 * dt * (v0[0] / (r_n + h) + v_new[0] / (r_n + h1))
    _check_latitude(lat1)
    lon1 = lon + 0.5 * dt * (
        v0[1] / ((r_e + h) * math.cos(lat)) + v_new[1] / ((r_e + h1) * math.cos(lat1))
    )
    return GeodeticPosition(lat1, wrap_longitude(lon1), h1)


def mechanize(
    state: NavState,
    imu: ImuSample,
    dt: float | None = None,
    model: EllipsoidModel = WGS84,
) -> NavState:
    """
    Propagate ``state`` over one IMU interval.

    ``dt`` defaults to the gap between ``state.time`` and ``imu.time``.
    Returns a new state; the input is not modified.
    """
    if dt is None:
        dt = imu.time - state.time
    _check_dt(dt)
    _check_latitude(state.position.latitude)
    c1, v1, p1, _ = _kernels.mechanize_step(
        state.attitude,
        state.velocity_ned,
        state.llh,
        np.asarray(imu.angular_rate, dtype=float),
        np.asarray(imu.specific_force, dtype=float),
        dt,
        model.as_array(),
    )
    _check_latitude(p1[0])
    return NavState(c1, v1, GeodeticPosition(*p1), state.time + dt)


def mechanize_reference(
    state: NavState, imu: ImuSample, dt: float, model: EllipsoidModel = WGS84
) -> NavState:
    """Composition of the three readable updates; same result as :func:`mechanize`."""
    c1 = attitude_update(state, imu, dt, model)
    f_ned = 0.5 * (state.attitude + c1) @ np.asarray(imu.specific_force)
    v1 = velocity_update(state, f_ned, dt, model)
    p1 = position_update(state, v1, dt, model)
    return replace(state, attitude=c1, velocity_ned=v1, position=p1, time=state.time + dt)
