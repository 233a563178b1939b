"""
15-state error-state extended Kalman filter.

Error-state ordering (one 15-vector)::

    [0:3]   attitude error, rad (NED)
    [3:6]   velocity error, m/s (NED)
    [6:9]   position error: latitude rad, longitude rad, height m
    [9:12]  accelerometer bias correction, m/s^2
    [12:15] gyro bias correction, rad/s

Navigation errors are "estimate minus truth" and are subtracted on
correction; bias entries are corrections added to the running bias
estimates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import (
    LargeAttitudeError,
    NonPositiveDefinite,
    SingularInnovationCovariance,
)
from .geodesy import (
    WGS84,
    EllipsoidModel,
    GeodeticPosition,
    orthonormalize,
    radii_of_curvature,
    skew,
    wrap_longitude,
)
from .mechanization import NavState, _check_dt, _check_latitude

N_STATES = 15
ATT = slice(0, 3)
VEL = slice(3, 6)
POS = slice(6, 9)
BA = slice(9, 12)
BG = slice(12, 15)

DEG = math.pi / 180.0
HOUR = 3600.0
G0 = 9.80665


@dataclass
class ErrorState:
    """View over the 15-element error vector."""

    vector: NDArray[np.float64] = field(default_factory=lambda: np.zeros(N_STATES))

    def __post_init__(self):
        self.vector = np.asarray(self.vector, dtype=float).reshape(N_STATES)

    @property
    def attitude_err(self):
        return self.vector[ATT]

    @property
    def velocity_err(self):
        return self.vector[VEL]

    @property
    def position_err(self):
        return self.vector[POS]

    @property
    def accel_bias(self):
        return self.vector[BA]

    @property
    def gyro_bias(self):
        return self.vector[BG]

    def reset(self) -> None:
        self.vector[:] = 0.0


@dataclass(frozen=True)
class ImuNoiseSpec:
    """
    IMU error model in SI units.

    ``gyro_arw`` rad/sqrt(s), ``gyro_bias_instability`` rad/s,
    ``accel_vrw`` m/s/sqrt(s), ``accel_bias_instability`` m/s^2,
    ``bias_correlation_time`` s (first-order Gauss-Markov).
    """

    gyro_arw: float
    gyro_bias_instability: float
    accel_vrw: float
    accel_bias_instability: float
    bias_correlation_time: float = 3600.0

    def __post_init__(self):
        for name in ("gyro_arw", "gyro_bias_instability", "accel_vrw", "accel_bias_instability"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not self.bias_correlation_time > 0:
            raise ValueError("bias_correlation_time must be positive")

    @classmethod
    def from_datasheet(
        cls,
        arw_deg_rthr: float,
        gyro_bias_deg_hr: float,
        vrw_mps_rthr: float,
        accel_bias_ug: float,
        bias_correlation_time: float = 3600.0,
    ) -> ImuNoiseSpec:
        """Build from datasheet units: deg/sqrt(hr), deg/hr, m/s/sqrt(hr), micro-g."""
        return cls(
            gyro_arw=arw_deg_rthr * DEG / math.sqrt(HOUR),
            gyro_bias_instability=gyro_bias_deg_hr * DEG / HOUR,
            accel_vrw=vrw_mps_rthr / math.sqrt(HOUR),
            accel_bias_instability=accel_bias_ug * 1e-6 * G0,
            bias_correlation_time=bias_correlation_time,
        )


# ADIS 16495-2 in-run values
ADIS16495 = ImuNoiseSpec.from_datasheet(0.1, 1.6, 0.008, 3.2)


@dataclass
class FilterEpoch:
    """
    Stored filter output for smoothing.

    ``transition`` and ``predicted_covariance`` describe the propagation
    *into* this epoch from the previous one; ``correction`` is the total
    error-state correction applied at this epoch after propagation.
    """

    time: float
    nav: NavState
    biases: NDArray[np.float64]
    covariance: NDArray[np.float64]
    transition: NDArray[np.float64] | None = None
    predicted_covariance: NDArray[np.float64] | None = None
    correction: NDArray[np.float64] | None = None


def system_matrix(
    state: NavState,
    f_ned,
    model: EllipsoidModel = WGS84,
    bias_correlation_time: float = 3600.0,
) -> NDArray[np.float64]:
    """Continuous-time error dynamics F such that d(dx)/dt = F dx."""
    return _kernels.system_matrix(
        state.attitude,
        state.velocity_ned,
        state.llh,
        np.asarray(f_ned, dtype=float),
        model.as_array(),
        bias_correlation_time,
        bias_correlation_time,
    )


def state_transition(F: NDArray[np.float64], dt: float) -> NDArray[np.float64]:
    _check_dt(dt, upper=None)
    return np.eye(F.shape[0]) + F * dt


def process_noise_diag(spec: ImuNoiseSpec, dt: float) -> NDArray[np.float64]:
    tau = spec.bias_correlation_time
    q = np.empty(N_STATES)
    q[ATT] = spec.gyro_arw**2 * dt
    q[VEL] = spec.accel_vrw**2 * dt
    q[POS] = 0.0
    q[BA] = 2.0 * spec.accel_bias_instability**2 / tau * dt
    q[BG] = 2.0 * spec.gyro_bias_instability**2 / tau * dt
    return q


def process_noise(spec: ImuNoiseSpec, dt: float) -> NDArray[np.float64]:
    """Block-diagonal discrete process noise Q."""
    _check_dt(dt, upper=None)
    return np.diag(process_noise_diag(spec, dt))


def propagate(P, phi, Q) -> NDArray[np.float64]:
    """``Phi P Phi^T + Q``, resymmetrized."""
    p1 = phi @ P @ phi.T + Q
    p1 = 0.5 * (p1 + p1.T)
    if np.any(np.diag(p1) <= 0.0):
        raise NonPositiveDefinite("non-positive covariance diagonal after propagation")
    return p1


def measurement_update(P, H, R, innovation):
    """
    Joseph-form Kalman update.

    Returns
    -------
    dx : ErrorState
        Error-state estimate ``K @ innovation``.
    P_post : ndarray
        Updated covariance.
    mahalanobis : float
        ``sqrt(r^T S^-1 r)`` of the post-fit residual ``r = z - H dx``
        with S the predicted innovation covariance.
    """
    H = np.atleast_2d(np.asarray(H, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    z = np.atleast_1d(np.asarray(innovation, dtype=float))
    dx, P1, chi = _kernels.kalman_update(np.asarray(P, dtype=float), H, R, z)
    if chi < 0:
        raise SingularInnovationCovariance("innovation covariance is not positive-definite")
    return ErrorState(dx), P1, float(chi)


def correct_nav_state(state: NavState, err: ErrorState | NDArray[np.float64]) -> NavState:
    """Feed the navigation part of an error estimate back into the total state."""
    dx = err.vector if isinstance(err, ErrorState) else np.asarray(err, dtype=float)
    dpsi = dx[ATT]
    if np.linalg.norm(dpsi) >= 0.5:
        raise LargeAttitudeError(f"|attitude error| = {np.linalg.norm(dpsi):.3f} rad")
    C = orthonormalize((np.eye(3) - skew(dpsi)) @ state.attitude)
    v = state.velocity_ned - dx[VEL]
    lat, lon, h = state.llh - dx[POS]
    _check_latitude(lat)
    return NavState(C, v, GeodeticPosition(lat, wrap_longitude(lon), h), state.time)


def correct_biases(biases, err: ErrorState | NDArray[np.float64]) -> NDArray[np.float64]:
    """Accumulate bias corrections: ``[accel_bias, gyro_bias]`` (6,) + dx[9:15]."""
    dx = err.vector if isinstance(err, ErrorState) else np.asarray(err, dtype=float)
    return np.asarray(biases, dtype=float) + dx[9:15]


def initial_covariance(
    lat: float,
    h: float,
    spec: ImuNoiseSpec,
    tilt_std: float = 0.5 * DEG,
    heading_std: float = 1.0 * DEG,
    velocity_std: float = 0.05,
    position_std: float = 0.1,
    model: EllipsoidModel = WGS84,
) -> NDArray[np.float64]:
    """Diagonal initial covariance; horizontal position std converted to radians."""
    r_n, r_e = radii_of_curvature(lat, model)
    d = np.empty(N_STATES)
    d[0:2] = tilt_std**2
    d[2] = heading_std**2
    d[VEL] = velocity_std**2
    d[6] = (position_std / (r_n + h)) ** 2
    d[7] = (position_std / ((r_e + h) * math.cos(lat))) ** 2
    d[8] = position_std**2
    d[BA] = max(spec.accel_bias_instability, 1e-9) ** 2
    d[BG] = max(spec.gyro_bias_instability, 1e-12) ** 2
    return np.diag(d)


def position_sigma_m(P, lat: float, h: float, model: EllipsoidModel = WGS84) -> NDArray[np.float64]:
    """1-sigma North/East/Down position uncertainty in meters."""
    r_n, r_e = radii_of_curvature(lat, model)
    return np.array(
        [
            math.sqrt(P[6, 6]) * (r_n + h),
            math.sqrt(P[7, 7]) * (r_e + h) * math.cos(lat),
            math.sqrt(P[8, 8]),
        ]
    )


class ErrorStateEKF:
    """
    Closed-loop error-state filter owning the navigation solution.

    Single-threaded: one owner feeds samples in time order.
    """

    def __init__(
        self,
        nav: NavState,
        P0,
        spec: ImuNoiseSpec,
        model: EllipsoidModel = WGS84,
        biases=None,
    ):
        self.C = np.array(nav.attitude, dtype=float)
        self.v = np.array(nav.velocity_ned, dtype=float)
        self.llh = nav.llh.copy()
        self.time = float(nav.time)
        self.P = np.array(P0, dtype=float)
        self.biases = np.zeros(6) if biases is None else np.array(biases, dtype=float)
        self.spec = spec
        self.model = model
        self._params = model.as_array()
        self._tau = spec.bias_correlation_time
        self._q_cache: dict[float, NDArray[np.float64]] = {}
        self.last_f_ned = np.zeros(3)
        self.last_transition: NDArray[np.float64] | None = None
        self.last_predicted: NDArray[np.float64] | None = None

    @property
    def nav(self) -> NavState:
        return NavState(self.C.copy(), self.v.copy(), GeodeticPosition(*self.llh), self.time)

    @property
    def accel_bias(self):
        return self.biases[0:3]

    @property
    def gyro_bias(self):
        return self.biases[3:6]

    def _qdiag(self, dt: float):
        key = round(dt, 9)
        q = self._q_cache.get(key)
        if q is None:
            q = process_noise_diag(self.spec, dt)
            self._q_cache[key] = q
        return q

    def predict(self, angular_rate, specific_force, dt: float) -> None:
        """Mechanize one bias-corrected IMU sample and propagate P."""
        w = np.asarray(angular_rate, dtype=float) - self.biases[3:6]
        f = np.asarray(specific_force, dtype=float) - self.biases[0:3]
        c1, v1, p1, f_ned, phi, pp = _kernels.time_update(
            self.C, self.v, self.llh, w, f, dt, self._params, self._tau, self._tau,
            self.P, self._qdiag(dt),
        )
        if abs(p1[0]) > 1.5706:
            _check_latitude(p1[0])
        self.C, self.v, self.llh = c1, v1, p1
        self.P = pp
        self.time += dt
        self.last_f_ned = f_ned
        self.last_transition = phi
        self.last_predicted = pp

    def update(self, H, R, innovation, apply: bool = True):
        """Measurement update; returns ``(dx, mahalanobis)``."""
        dx, P1, chi = measurement_update(self.P, H, R, innovation)
        if apply:
            self.P = P1
            self.correct(dx.vector)
        return dx, chi

    def correct(self, dx) -> None:
        dpsi = dx[ATT]
        if dpsi @ dpsi >= 0.25:
            raise LargeAttitudeError(f"|attitude error| = {np.linalg.norm(dpsi):.3f} rad")
        C = (np.eye(3) - skew(dpsi)) @ self.C
        self.C = 0.5 * C @ (3.0 * np.eye(3) - C.T @ C)
        self.v = self.v - dx[VEL]
        self.llh = self.llh - dx[POS]
        self.llh[1] = wrap_longitude(self.llh[1])
        self.biases = self.biases + dx[9:15]
