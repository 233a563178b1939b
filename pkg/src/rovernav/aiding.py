"""
Pseudo-measurements and detectors: non-holonomic constraints, zero-velocity /
zero-angular-rate updates, wheel odometry, and slip detection.

Every constructor returns ``(innovation, H)`` with ``innovation = z - h(x_hat)``
so that ``innovation ~= H @ dx`` for the error convention in :mod:`rovernav.ekf`.
Body axes are x forward (longitudinal), y right (lateral), z down (vertical).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from . import _kernels
from .errors import (
    IncompleteWindow,
    InsufficientWindow,
    SingularCovariance,
    WheelStopped,
)
from .geodesy import WGS84, EllipsoidModel, earth_rate_ned, skew
from .mechanization import ImuSample, NavState

_NHC_ROWS = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True)
class OdomSample:
    time: float
    left_speed: float
    right_speed: float

    def __post_init__(self):
        if not (math.isfinite(self.left_speed) and math.isfinite(self.right_speed)):
            raise ValueError("wheel speeds must be finite")


@dataclass(frozen=True)
class RoverGeometry:
    """Wheel radius, track width and the body-to-rear-axle lever arm (body frame)."""

    wheel_radius: float = 0.165
    track_width: float = 0.555
    lever_arm_body_to_rear: tuple[float, float, float] = (-0.25, 0.0, 0.3)

    def __post_init__(self):
        if not self.wheel_radius > 0:
            raise ValueError("wheel_radius must be positive")
        if not self.track_width > 0:
            raise ValueError("track_width must be positive")
        if len(self.lever_arm_body_to_rear) != 3:
            raise ValueError("lever arm must be a 3-vector")

    @property
    def lever_arm(self) -> NDArray[np.float64]:
        return np.asarray(self.lever_arm_body_to_rear, dtype=float)


@dataclass(frozen=True)
class AidingThresholds:
    heading_rate_gate: float = 0.1
    stationary_speed: float = 0.005
    imu_std_window: float = 0.5
    imu_std_gate: float = 0.02
    mahalanobis_gate: float = 3.0
    slip_ratio_gate: float = 0.3

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class MeasurementNoise:
    """Measurement standard deviations for each pseudo-measurement."""

    nhc_velocity: float = 0.05
    zupt_velocity: float = 0.01
    zaru_rate: float = 1e-4
    odom_velocity: float = 0.03
    odom_heading_rate: float = 0.01
    slip_inflation: float = 100.0

    def nhc(self, rows: int = 2) -> NDArray[np.float64]:
        return np.eye(rows) * self.nhc_velocity**2

    def zero_type(self) -> NDArray[np.float64]:
        return np.diag([self.zupt_velocity**2] * 3 + [self.zaru_rate**2] * 3)

    def odometry(self) -> NDArray[np.float64]:
        return np.diag([self.odom_velocity**2] * 3 + [self.odom_heading_rate**2])


class SlipFlag(enum.Enum):
    NO_SLIP = 0
    SIGNIFICANT = 1


def odom_kinematics(s: OdomSample, geom: RoverGeometry) -> tuple[float, float]:
    """
    Skid-steer kinematics.

    Returns forward speed and the differential yaw rate
    ``(right - left) / track``, positive counter-clockwise seen from above.
    """
    v_lon = 0.5 * (s.left_speed + s.right_speed)
    return v_lon, (s.right_speed - s.left_speed) / geom.track_width


def rear_velocity(C, v, omega, lever_arm) -> NDArray[np.float64]:
    """Body-frame velocity of the rear axle: ``C^T v + omega x L``."""
    return C.T @ v + np.cross(omega, lever_arm)


def nonholonomic_update(
    state: NavState,
    imu: ImuSample,
    geom: RoverGeometry,
    thr: AidingThresholds,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Zero lateral and vertical rear-axle velocity.

    ``imu.angular_rate`` should already be bias-corrected. When the body
    yaw rate exceeds ``thr.heading_rate_gate`` the lateral row is dropped.
    """
    C = state.attitude
    vb = rear_velocity(C, state.velocity_ned, np.asarray(imu.angular_rate), geom.lever_arm)
    rows = _NHC_ROWS
    if abs(imu.angular_rate[2]) > thr.heading_rate_gate:
        rows = _NHC_ROWS[1:]
    innovation = -(rows @ vb)
    H = np.zeros((rows.shape[0], 15))
    RC = rows @ C.T
    H[:, 0:3] = -(RC @ skew(state.velocity_ned))
    H[:, 3:6] = -RC
    H[:, 12:15] = rows @ skew(geom.lever_arm)
    return innovation, H


class StationaryDetector:
    """Rolling specific-force variance over a fixed number of IMU samples."""

    def __init__(self, window_samples: int):
        if window_samples < 10:
            raise InsufficientWindow("stationarity window needs at least 10 samples")
        self.n = int(window_samples)
        self._buf = np.zeros((self.n, 3))
        self._i = 0
        self._count = 0

    def push(self, f) -> None:
        self._buf[self._i] = f
        self._i = (self._i + 1) % self.n
        self._count = min(self._count + 1, self.n)

    @property
    def full(self) -> bool:
        return self._count == self.n

    def std(self) -> NDArray[np.float64]:
        return self._buf[: self._count].std(axis=0)

    def is_quiet(self, gate: float) -> bool:
        return self.full and bool(np.all(self.std() < gate))


def detect_stationary(imu_window, odom: OdomSample, thr: AidingThresholds) -> bool:
    """
    Stationary iff both wheels are below ``stationary_speed`` and the
    per-axis specific-force std over the window is below ``imu_std_gate``.

    ``imu_window`` is a sequence of :class:`ImuSample` or an ``(n, 3)``
    array of specific forces.
    """
    if len(imu_window) and isinstance(imu_window[0], ImuSample):
        f = np.array([s.specific_force for s in imu_window], dtype=float)
    else:
        f = np.asarray(imu_window, dtype=float)
    if f.ndim != 2 or f.shape[0] < 10:
        raise InsufficientWindow("stationarity check needs at least 10 IMU samples")
    if max(abs(odom.left_speed), abs(odom.right_speed)) >= thr.stationary_speed:
        return False
    return bool(np.all(f.std(axis=0) < thr.imu_std_gate))


def zero_type_update(
    state: NavState,
    gyro_meas,
    gyro_bias=None,
    model: EllipsoidModel = WGS84,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """ZUPT + ZARU with the expected earth rate removed from the gyro reading."""
    b = np.zeros(3) if gyro_bias is None else np.asarray(gyro_bias, dtype=float)
    w_ie_b = state.attitude.T @ earth_rate_ned(state.position.latitude, model)
    innovation = np.concatenate(
        [-state.velocity_ned, -(np.asarray(gyro_meas, dtype=float) - b - w_ie_b)]
    )
    H = np.zeros((6, 15))
    H[0:3, 3:6] = -np.eye(3)
    H[3:6, 12:15] = -np.eye(3)
    return innovation, H


@dataclass
class OdomWindow:
    """
    Running integrals of the INS-predicted rear-axle quantities over one
    odometry interval.
    """

    tau0: float
    lever_arm: NDArray[np.float64] = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        if not self.tau0 > 0:
            raise ValueError("tau0 must be positive")
        self.lever_arm = np.asarray(self.lever_arm, dtype=float)
        self._lx = skew(self.lever_arm)
        self.reset(0.0)

    def reset(self, yaw: float) -> None:
        self.elapsed = 0.0
        self.yaw_start = yaw
        self.yaw_end = yaw
        self._acc = np.zeros(_kernels.WINDOW_SIZE)

    @property
    def v_body(self) -> NDArray[np.float64]:
        return self._acc[0:3]

    @property
    def c_nb(self) -> NDArray[np.float64]:
        return self._acc[3:12].reshape(3, 3)

    @property
    def c_nb_vx(self) -> NDArray[np.float64]:
        return self._acc[12:21].reshape(3, 3)

    @property
    def pitch_row(self) -> NDArray[np.float64]:
        return self._acc[21:24]

    @property
    def bias_row(self) -> NDArray[np.float64]:
        return self._acc[24:27]

    @property
    def cos_pitch(self) -> float:
        return float(self._acc[27])

    def add(self, C, v, omega, dt: float) -> None:
        """Accumulate one IMU interval at the post-step state (right Riemann sum)."""
        self.yaw_end = _kernels.window_add(C, v, omega, self.lever_arm, dt, self._acc)
        self.elapsed += dt

    def is_complete(self, tol: float = 1e-6) -> bool:
        return self.elapsed >= self.tau0 - tol

    @property
    def heading_rate(self) -> float:
        d = math.remainder(self.yaw_end - self.yaw_start, 2.0 * math.pi)
        return d / self.elapsed


def odometry_update(
    window: OdomWindow,
    odom_avg: tuple[float, float],
    state: NavState | None = None,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """
    Four-row wheel-odometry update: forward speed, zero lateral and
    vertical rear-axle speed, and heading rate.

    ``odom_avg`` is the output of :func:`odom_kinematics`; its yaw rate is
    counter-clockwise positive and is flipped to the NED (clockwise) sense.
    ``state`` is unused; the window already holds the INS history.
    """
    if not window.is_complete() or window.elapsed <= 0.0:
        raise IncompleteWindow(f"window covers {window.elapsed:.4f} s of {window.tau0} s")
    T = window.elapsed
    vb = window.v_body / T
    cos_bar = window.cos_pitch / T
    psi_dot = window.heading_rate
    v_lon_o, yaw_rate_o = odom_avg

    innovation = np.array(
        [v_lon_o - vb[0], -vb[1], -vb[2], -yaw_rate_o - psi_dot * cos_bar]
    )
    H = np.zeros((4, 15))
    H[0:3, 0:3] = -window.c_nb_vx / T
    H[0:3, 3:6] = -window.c_nb / T
    H[0:3, 12:15] = window._lx
    H[3, 0:3] = -psi_dot * window.pitch_row / T
    H[3, 12:15] = -window.bias_row / T
    return innovation, H


def mahalanobis_distance(residual, S) -> float:
    r = np.atleast_1d(np.asarray(residual, dtype=float))
    S = np.atleast_2d(np.asarray(S, dtype=float))
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise SingularCovariance("innovation covariance is not positive-definite") from None
    w = np.linalg.solve(L, r)
    return float(math.sqrt(w @ w))


def slip_ratio(v_x: float, geom: RoverGeometry, wheel_omega: float) -> float:
    """``1 - v_x / (r omega)`` clamped to [-1, 1]."""
    rw = geom.wheel_radius * wheel_omega
    if abs(rw) <= 1e-3:
        raise WheelStopped("slip ratio undefined for a stopped wheel")
    return min(1.0, max(-1.0, 1.0 - v_x / rw))


def side_slip_ratios(
    v_lon_ins: float, yaw_rate_body: float, odom: OdomSample, geom: RoverGeometry
) -> list[float]:
    """Left/right slip ratios; stopped wheels are skipped."""
    half = 0.5 * geom.track_width
    # body z is down, so a positive rate moves the left side faster
    sides = (
        (v_lon_ins + yaw_rate_body * half, odom.left_speed),
        (v_lon_ins - yaw_rate_body * half, odom.right_speed),
    )
    out = []
    for v_side, speed in sides:
        try:
            out.append(slip_ratio(v_side, geom, speed / geom.wheel_radius))
        except WheelStopped:
            pass
    return out


def classify_slip(chi: float, ratios, thr: AidingThresholds) -> SlipFlag:
    if chi > thr.mahalanobis_gate and any(abs(i) > thr.slip_ratio_gate for i in ratios):
        return SlipFlag.SIGNIFICANT
    return SlipFlag.NO_SLIP
