"""
Synthetic rover trajectories and sensor streams.

The truth generator lays a path of straight lines and circular arcs over a
sum-of-sinusoids terrain, drives it with raised-cosine speed ramps and
scheduled stops, and integrates the IMU position with the same discrete
update the navigator uses. IMU synthesis then inverts one mechanization
step per interval, so replaying the noise-free stream reproduces the truth
to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray

from .aiding import RoverGeometry
from .ekf import ADIS16495, ImuNoiseSpec
from .errors import InfeasiblePath, ValidationError
from .geodesy import WGS84, EllipsoidModel, wrap_longitude

DEG = math.pi / 180.0
ENCODER_RESOLUTION = 78_000.0  # pulses per meter


@dataclass(frozen=True)
class Line:
    length: float


@dataclass(frozen=True)
class Arc:
    """Circular arc; positive ``angle`` turns clockwise seen from above (to the right)."""

    radius: float
    angle: float

    @property
    def length(self) -> float:
        return abs(self.angle) * self.radius


@dataclass(frozen=True)
class SlipEvent:
    start: float
    duration: float
    left_ratio: float
    right_ratio: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValidationError("slip duration must be positive")
        for r in (self.left_ratio, self.right_ratio):
            if not -1.0 <= r < 1.0:
                raise ValidationError("slip ratio must lie in [-1, 1)")

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Terrain:
    """Height field ``z = sum A sin(kn x + ke y + phase)``; x north, y east, z up."""

    amplitudes: tuple[float, ...] = ()
    wavenumbers: tuple[tuple[float, float], ...] = ()
    phases: tuple[float, ...] = ()

    def gradient(self, x, y):
        gx = np.zeros_like(x)
        gy = np.zeros_like(y)
        for a, (kn, ke), ph in zip(self.amplitudes, self.wavenumbers, self.phases):
            c = a * np.cos(kn * x + ke * y + ph)
            gx += kn * c
            gy += ke * c
        return gx, gy

    @classmethod
    def rough(cls, slope: float, seed: int = 7, n: int = 4) -> Terrain:
        """Random field whose component slopes sum to about ``slope``."""
        rng = np.random.default_rng(seed)
        wavelengths = rng.uniform(4.0, 25.0, n)
        angles = rng.uniform(0.0, 2.0 * math.pi, n)
        k = 2.0 * math.pi / wavelengths
        amps = slope / n / k
        return cls(
            tuple(float(a) for a in amps),
            tuple((float(kk * math.cos(t)), float(kk * math.sin(t))) for kk, t in zip(k, angles)),
            tuple(float(p) for p in rng.uniform(0.0, 2.0 * math.pi, n)),
        )


@dataclass(frozen=True)
class Scenario:
    """
    Drive description.

    The path is split into ``n_stops`` equal-length legs, each ending in a
    stop of ``stop_duration`` seconds. ``roughness`` is the white vibration
    std (m/s^2) on the accelerometers while moving; a tenth of it remains
    while stopped.
    """

    name: str
    path: tuple = ()
    commanded_speed: float = 0.4
    n_stops: int = 1
    stop_duration: float = 5.0
    initial_static: float = 10.0
    ramp_time: float = 0.8
    roughness: float = 0.05
    terrain: Terrain = field(default_factory=Terrain)
    slip_events: tuple[SlipEvent, ...] = ()
    turn_skid: float = 1.0
    sideslip_gain: float = 0.0
    odom_scale_error: float = 0.0
    geometry: RoverGeometry = field(default_factory=RoverGeometry)
    imu: ImuNoiseSpec = ADIS16495
    imu_rate: float = 100.0
    odom_rate: float = 10.0
    origin: tuple[float, float, float] = (39.65 * DEG, -79.95 * DEG, 300.0)
    initial_heading: float = 0.0
    heading_std: float = 1.0 * DEG
    model: EllipsoidModel = WGS84

    def __post_init__(self):
        if self.commanded_speed < 0:
            raise ValidationError("commanded_speed must be non-negative")
        if not self.stop_duration > 0:
            raise ValidationError("stop durations must be positive")
        if self.n_stops < 1:
            raise ValidationError("n_stops must be at least 1")
        if not 50.0 <= self.imu_rate <= 500.0:
            raise ValidationError("imu_rate must lie in [50, 500] Hz")
        ratio = self.imu_rate / self.odom_rate
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValidationError("imu_rate must be an integer multiple of odom_rate")
        for seg in self.path:
            if isinstance(seg, Arc) and seg.radius < 0.5 * self.geometry.track_width:
                raise InfeasiblePath(
                    f"arc radius {seg.radius} m is below half the track width"
                )

    @property
    def path_length(self) -> float:
        return float(sum(seg.length for seg in self.path))

    def phases(self) -> list[tuple[str, float, float, float, float]]:
        """
        Timeline as ``(kind, t_start, t_end, s_start, s_end)`` with kind
        ``"stop"`` or ``"drive"``.
        """
        out = [("stop", 0.0, self.initial_static, 0.0, 0.0)]
        t = self.initial_static
        total = self.path_length
        if total <= 0.0 or self.commanded_speed <= 0.0:
            return out
        leg = total / self.n_stops
        for j in range(self.n_stops):
            v, T = _leg_profile(leg, self.commanded_speed, self.ramp_time)
            out.append(("drive", t, t + T, j * leg, (j + 1) * leg))
            t += T
            out.append(("stop", t, t + self.stop_duration, (j + 1) * leg, (j + 1) * leg))
            t += self.stop_duration
        return out

    @property
    def duration(self) -> float:
        return self.phases()[-1][2]

    def drive_time(self) -> float:
        return sum(p[2] - p[1] for p in self.phases() if p[0] == "drive")

    def stops(self) -> list[tuple[float, float]]:
        return [(p[1], p[2]) for p in self.phases() if p[0] == "stop"]


def _leg_profile(distance: float, speed: float, ramp: float) -> tuple[float, float]:
    """Cruise speed and duration of one leg with raised-cosine ramps."""
    if distance <= speed * ramp:
        speed = distance / ramp
    return speed, distance / speed + ramp


def _leg_motion(tau, distance, speed, ramp):
    """Arc length and speed ``tau`` seconds into a leg."""
    if distance <= speed * ramp:
        speed = distance / ramp
    T = distance / speed + ramp
    tau = np.clip(tau, 0.0, T)
    s = np.empty_like(tau)
    u = np.empty_like(tau)
    w = math.pi / ramp
    up = tau < ramp
    down = tau > T - ramp
    mid = ~(up | down)
    s[up] = 0.5 * speed * (tau[up] - np.sin(w * tau[up]) / w)
    u[up] = 0.5 * speed * (1.0 - np.cos(w * tau[up]))
    s[mid] = 0.5 * speed * ramp + speed * (tau[mid] - ramp)
    u[mid] = speed
    r = T - tau[down]
    s[down] = distance - 0.5 * speed * (r - np.sin(w * r) / w)
    u[down] = 0.5 * speed * (1.0 - np.cos(w * r))
    return s, u


def _path_eval(path, s, heading0: float):
    """North/east position, heading and curvature at arc lengths ``s``."""
    x = np.zeros_like(s)
    y = np.zeros_like(s)
    psi = np.full_like(s, heading0)
    kappa = np.zeros_like(s)
    x0, y0, h0, s0 = 0.0, 0.0, heading0, 0.0
    for k, seg in enumerate(path):
        L = seg.length
        last = k == len(path) - 1
        m = (s >= s0) & ((s < s0 + L) | last)
        ds = np.minimum(s[m] - s0, L)
        if isinstance(seg, Line):
            x[m] = x0 + ds * math.cos(h0)
            y[m] = y0 + ds * math.sin(h0)
            psi[m] = h0
            x1, y1, h1 = x0 + L * math.cos(h0), y0 + L * math.sin(h0), h0
        else:
            sgn = math.copysign(1.0, seg.angle)
            R = seg.radius
            kap = sgn / R
            ang = h0 + kap * ds
            # center sits to the right for clockwise turns
            cx = x0 - sgn * R * math.sin(h0)
            cy = y0 + sgn * R * math.cos(h0)
            x[m] = cx + sgn * R * np.sin(ang)
            y[m] = cy - sgn * R * np.cos(ang)
            psi[m] = ang
            kappa[m] = kap
            h1 = h0 + seg.angle
            x1 = cx + sgn * R * math.sin(h1)
            y1 = cy - sgn * R * math.cos(h1)
        x0, y0, h0, s0 = x1, y1, h1, s0 + L
    if s.size and not path:
        psi[:] = heading0
    return x, y, psi, kappa


def _euler_to_dcm_batch(roll, pitch, yaw):
    cr, sr = np.cos(roll), np.sin(roll)
    cp, sp = np.cos(pitch), np.sin(pitch)
    cy, sy = np.cos(yaw), np.sin(yaw)
    C = np.empty(roll.shape + (3, 3))
    C[..., 0, 0] = cp * cy
    C[..., 0, 1] = -cr * sy + sr * sp * cy
    C[..., 0, 2] = sr * sy + cr * sp * cy
    C[..., 1, 0] = cp * sy
    C[..., 1, 1] = cr * cy + sr * sp * sy
    C[..., 1, 2] = -sr * cy + cr * sp * sy
    C[..., 2, 0] = -sp
    C[..., 2, 1] = sr * cp
    C[..., 2, 2] = cr * cp
    return C


def _radii(lat, model):
    s2 = np.sin(lat) ** 2
    d = 1.0 - model.eccentricity_sq * s2
    return (
        model.semi_major_axis * (1.0 - model.eccentricity_sq) / d**1.5,
        model.semi_major_axis / np.sqrt(d),
    )


def _gravity_down(lat, h, model):
    s2 = np.sin(lat) ** 2
    g0 = model.gravity_equator * (1.0 + model.gravity_k * s2) / np.sqrt(1.0 - model.eccentricity_sq * s2)
    a = model.semi_major_axis
    if model.height_model == 0:
        return g0 * (1.0 - 2.0 * h / a)
    return g0 * (a / (a + h)) ** 2


def _rates(llh, v, model):
    """Earth rate and transport rate in NED, batched."""
    lat, h = llh[:, 0], llh[:, 2]
    r_n, r_e = _radii(lat, model)
    we = model.rotation_rate
    w_ie = np.stack([we * np.cos(lat), np.zeros_like(lat), -we * np.sin(lat)], axis=1)
    w_en = np.stack(
        [v[:, 1] / (r_e + h), -v[:, 0] / (r_n + h), -v[:, 1] * np.tan(lat) / (r_e + h)], axis=1
    )
    return w_ie, w_en


def _skew_batch(w):
    S = np.zeros(w.shape[:-1] + (3, 3))
    S[..., 0, 1], S[..., 0, 2] = -w[..., 2], w[..., 1]
    S[..., 1, 0], S[..., 1, 2] = w[..., 2], -w[..., 0]
    S[..., 2, 0], S[..., 2, 1] = -w[..., 1], w[..., 0]
    return S


@dataclass
class TruthEpoch:
    time: float
    nav: object
    angular_rate: NDArray[np.float64]
    specific_force: NDArray[np.float64]
    wheel_omega: NDArray[np.float64]


@dataclass
class TruthTrajectory:
    """
    Ground truth at the IMU rate.

    ``gyro[k]``/``accel[k]`` are the noise-free IMU outputs over the interval
    ending at ``t[k]``; row 0 is a copy of row 1.
    """

    t: NDArray[np.float64]
    C: NDArray[np.float64]
    euler: NDArray[np.float64]
    v: NDArray[np.float64]
    llh: NDArray[np.float64]
    gyro: NDArray[np.float64]
    accel: NDArray[np.float64]
    body_speed: NDArray[np.float64]  # rear-axle forward speed, m/s
    body_rate: NDArray[np.float64]  # body rate relative to NED, rad/s
    slip: NDArray[np.float64]  # (N, 2) injected slip ratio per side
    moving: NDArray[np.bool_]
    scenario: Scenario

    def __len__(self) -> int:
        return len(self.t)

    def wheel_speeds(self, geom: RoverGeometry | None = None) -> NDArray[np.float64]:
        """Slip-free left/right wheel rim speeds (m/s) including turn skid and scale error."""
        scn = self.scenario
        geom = scn.geometry if geom is None else geom
        half = 0.5 * geom.track_width * scn.turn_skid
        yaw = self.body_rate[:, 2]
        w = np.stack([self.body_speed + yaw * half, self.body_speed - yaw * half], axis=1)
        w *= 1.0 + scn.odom_scale_error
        w[~self.moving] = 0.0
        return w

    @property
    def wheel_speed(self) -> NDArray[np.float64]:
        return self.wheel_speeds()

    def __getitem__(self, k: int) -> TruthEpoch:
        from .geodesy import GeodeticPosition
        from .mechanization import NavState

        nav = NavState(self.C[k].copy(), self.v[k].copy(), GeodeticPosition(*self.llh[k]), float(self.t[k]))
        r = self.scenario.geometry.wheel_radius
        return TruthEpoch(float(self.t[k]), nav, self.gyro[k].copy(), self.accel[k].copy(), self.wheel_speed[k] / r)


def generate_truth(scn: Scenario, rate: float | None = None) -> TruthTrajectory:
    """Sample the scenario at ``rate`` Hz (defaults to the scenario IMU rate)."""
    rate = scn.imu_rate if rate is None else float(rate)
    if not 50.0 <= rate <= 500.0:
        raise ValidationError("rate must lie in [50, 500] Hz")
    model = scn.model
    phases = scn.phases()
    n = int(round(phases[-1][2] * rate)) + 1
    t = np.arange(n) / rate

    s = np.zeros(n)
    u = np.zeros(n)
    moving = np.zeros(n, dtype=bool)
    for kind, t0, t1, s0, s1 in phases:
        m = (t >= t0) & (t < t1)
        if kind == "drive":
            sm, um = _leg_motion(t[m] - t0, s1 - s0, scn.commanded_speed, scn.ramp_time)
            s[m] = s0 + sm
            u[m] = um
            moving[m] = um > 0.0
        else:
            s[m] = s0
    s[-1] = phases[-1][4]

    x, y, psi, kappa = _path_eval(scn.path, s, scn.initial_heading)

    def attitude_at(xx, yy, pp):
        gx, gy = scn.terrain.gradient(xx, yy)
        along = gx * np.cos(pp) + gy * np.sin(pp)
        lateral = -gx * np.sin(pp) + gy * np.cos(pp)
        pitch = np.arctan(along)
        roll = -np.arctan(lateral * np.cos(pitch))
        return roll, pitch

    roll, pitch = attitude_at(x, y, psi)
    # attitude rates along the path by central differences in arc length
    h = 1e-4
    xp, yp, pp, _ = _path_eval(scn.path, s + h, scn.initial_heading)
    xm, ym, pm, _ = _path_eval(scn.path, np.maximum(s - h, 0.0), scn.initial_heading)
    rp, tp = attitude_at(xp, yp, pp)
    rm, tm = attitude_at(xm, ym, pm)
    span = (s + h) - np.maximum(s - h, 0.0)
    roll_dot = (rp - rm) / span * u
    pitch_dot = (tp - tm) / span * u
    yaw_dot = kappa * u

    C = _euler_to_dcm_batch(roll, pitch, psi)
    w_nb = np.stack(
        [
            roll_dot - np.sin(pitch) * yaw_dot,
            np.cos(roll) * pitch_dot + np.sin(roll) * np.cos(pitch) * yaw_dot,
            -np.sin(roll) * pitch_dot + np.cos(roll) * np.cos(pitch) * yaw_dot,
        ],
        axis=1,
    )

    u_body = u / np.cos(pitch)
    v_rear_b = np.stack([u_body, scn.sideslip_gain * w_nb[:, 2] * u_body, np.zeros(n)], axis=1)
    L = scn.geometry.lever_arm
    v_imu_b = v_rear_b - np.cross(w_nb, L)
    v = np.einsum("kij,kj->ki", C, v_imu_b)

    llh = _integrate_position(np.array(scn.origin, dtype=float), v, 1.0 / rate, model)

    gyro, accel = invert_mechanization(C, v, llh, 1.0 / rate, model)

    slip = np.zeros((n, 2))
    for ev in scn.slip_events:
        m = (t >= ev.start) & (t < ev.end) & moving
        slip[m] = (ev.left_ratio, ev.right_ratio)

    return TruthTrajectory(
        t=t,
        C=C,
        euler=np.stack([roll, pitch, np.remainder(psi + math.pi, 2.0 * math.pi) - math.pi], axis=1),
        v=v,
        llh=llh,
        gyro=gyro,
        accel=accel,
        body_speed=u_body,
        body_rate=w_nb,
        slip=slip,
        moving=moving,
        scenario=scn,
    )


def _integrate_position(p0, v, dt, model):
    """Trapezoidal position recursion matching the navigator's update."""
    n = len(v)
    llh = np.empty((n, 3))
    lat, lon, h = p0
    llh[0] = p0
    a, e2 = model.semi_major_axis, model.eccentricity_sq
    for k in range(n - 1):
        s = math.sin(lat)
        d = 1.0 - e2 * s * s
        r_n = a * (1.0 - e2) / d**1.5
        r_e = a / math.sqrt(d)
        v0, v1 = v[k], v[k + 1]
        h1 = h - 0.5 * dt * (v0[2] + v1[2])
        lat1 = lat + 0.5 * dt * (v0[0] / (r_n + h) + v1[0] / (r_n + h1))
        lon1 = lon + 0.5 * dt * (v0[1] / ((r_e + h) * math.cos(lat)) + v1[1] / ((r_e + h1) * math.cos(lat1)))
        lat, lon, h = lat1, wrap_longitude(lon1), h1
        llh[k + 1] = (lat, lon, h)
    return llh


def invert_mechanization(C, v, llh, dt, model: EllipsoidModel = WGS84, iterations: int = 6):
    """
    IMU outputs that carry ``(C, v)`` from each epoch to the next through
    one first-order mechanization step.

    Returns ``gyro, accel`` of shape ``(N, 3)``; row ``k`` covers the
    interval ending at epoch ``k`` and row 0 duplicates row 1.
    """
    C0, C1 = C[:-1], C[1:]
    v0, v1 = v[:-1], v[1:]
    w_ie, w_en = _rates(llh[:-1], v0, model)
    Om = _skew_batch(w_ie + w_en)
    Ct0 = np.transpose(C0, (0, 2, 1))
    I3 = np.eye(3)

    def step(w):
        X = C0 + C0 @ _skew_batch(w) * dt - Om @ C0 * dt
        return 0.5 * X @ (3.0 * I3 - np.transpose(X, (0, 2, 1)) @ X)

    def vee_asym(M):
        return 0.5 * np.stack(
            [M[:, 2, 1] - M[:, 1, 2], M[:, 0, 2] - M[:, 2, 0], M[:, 1, 0] - M[:, 0, 1]], axis=1
        )

    w = vee_asym(Ct0 @ (C1 + Om @ C0 * dt)) / dt
    for _ in range(iterations):
        c1 = step(w)
        r = vee_asym(c1 @ np.transpose(C1, (0, 2, 1)))
        w = w - np.einsum("kij,kj->ki", Ct0, r) / dt
    c1 = step(w)

    g = np.zeros_like(v0)
    g[:, 2] = _gravity_down(llh[:-1, 0], llh[:-1, 2], model)
    f_ned = (v1 - v0) / dt - g + np.cross(w_en + 2.0 * w_ie, v0)
    f_b = np.linalg.solve(0.5 * (C0 + c1), f_ned[..., None])[..., 0]
    gyro = np.vstack([w[:1], w])
    accel = np.vstack([f_b[:1], f_b])
    return gyro, accel


@dataclass
class ImuStream:
    t: NDArray[np.float64]
    gyro: NDArray[np.float64]
    accel: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.t)

    def samples(self):
        from .mechanization import ImuSample

        return [ImuSample(float(t), w, f) for t, w, f in zip(self.t, self.gyro, self.accel)]


@dataclass
class OdomStream:
    t: NDArray[np.float64]
    left: NDArray[np.float64]
    right: NDArray[np.float64]
    left_counts: NDArray[np.int64] | None = None
    right_counts: NDArray[np.int64] | None = None

    def __len__(self) -> int:
        return len(self.t)

    def samples(self):
        from .aiding import OdomSample

        return [OdomSample(float(t), float(a), float(b)) for t, a, b in zip(self.t, self.left, self.right)]


def _gauss_markov(rng, n, sigma, tau, dt):
    phi = math.exp(-dt / tau)
    q = sigma * math.sqrt(1.0 - phi * phi)
    out = np.empty((n, 3))
    b = rng.normal(0.0, sigma, 3)
    e = rng.normal(0.0, 1.0, (n, 3)) * q
    for k in range(n):
        out[k] = b
        b = phi * b + e[k]
    return out


def synthesize_imu(
    truth: TruthTrajectory,
    spec: ImuNoiseSpec | None = None,
    seed: int | np.random.SeedSequence = 0,
    noise: bool = True,
) -> ImuStream:
    """
    IMU stream over ``truth.t[1:]``.

    With ``noise=False`` the stream is the exact inverse of mechanization.
    Otherwise white ARW/VRW, Gauss-Markov biases (initial draw at the
    instability level) and accelerometer vibration are added.
    """
    scn = truth.scenario
    spec = scn.imu if spec is None else spec
    gyro = truth.gyro[1:].copy()
    accel = truth.accel[1:].copy()
    n = len(gyro)
    if noise:
        dt = float(truth.t[1] - truth.t[0])
        rng = np.random.default_rng(seed)
        tau = spec.bias_correlation_time
        gyro += _gauss_markov(rng, n, spec.gyro_bias_instability, tau, dt)
        accel += _gauss_markov(rng, n, spec.accel_bias_instability, tau, dt)
        gyro += rng.normal(0.0, spec.gyro_arw / math.sqrt(dt), (n, 3))
        accel += rng.normal(0.0, spec.accel_vrw / math.sqrt(dt), (n, 3))
        vib = np.where(truth.moving[1:], scn.roughness, 0.1 * scn.roughness)
        accel += rng.normal(0.0, 1.0, (n, 3)) * vib[:, None]
    return ImuStream(truth.t[1:].copy(), gyro, accel)


def synthesize_odometry(
    truth: TruthTrajectory,
    geom: RoverGeometry | None = None,
    encoder_resolution: float = ENCODER_RESOLUTION,
    slip_events=None,
    seed: int = 0,
    rate: float | None = None,
) -> OdomStream:
    """
    Quantized wheel speeds at the odometry rate.

    Cumulative wheel travel is integrated at the truth rate, floored to whole
    encoder pulses, and differenced per odometry interval. ``slip_events``
    defaults to the scenario's; pass ``()`` to disable. ``seed`` only sets
    the initial sub-pulse encoder phase.
    """
    scn = truth.scenario
    geom = scn.geometry if geom is None else geom
    rate = scn.odom_rate if rate is None else rate
    wheels = truth.wheel_speeds(geom)
    slip = truth.slip
    if slip_events is not None:
        slip = np.zeros_like(truth.slip)
        for ev in slip_events:
            m = (truth.t >= ev.start) & (truth.t < ev.end) & truth.moving
            slip[m] = (ev.left_ratio, ev.right_ratio)
    wheels = wheels / (1.0 - slip)
    dt = np.diff(truth.t)
    travel = np.zeros_like(wheels)
    travel[1:] = np.cumsum(0.5 * (wheels[1:] + wheels[:-1]) * dt[:, None], axis=0)
    phase = np.random.default_rng(seed).uniform(0.0, 1.0, 2)
    counts = np.floor(travel * encoder_resolution + phase).astype(np.int64)
    step = int(round(scn.imu_rate / rate)) if rate else 1
    idx = np.arange(step, len(truth.t), step)
    c = counts[idx]
    prev = counts[idx - step]
    T = truth.t[idx] - truth.t[idx - step]
    dl = c[:, 0] - prev[:, 0]
    dr = c[:, 1] - prev[:, 1]
    return OdomStream(
        truth.t[idx].copy(),
        dl / (encoder_resolution * T),
        dr / (encoder_resolution * T),
        dl,
        dr,
    )


# scenario presets ------------------------------------------------------------


def _rectangle(perimeter: float, aspect: float, radius: float = 1.0) -> tuple:
    straight = perimeter - 2.0 * math.pi * radius
    a = straight / (2.0 * (1.0 + aspect))
    b = a * aspect
    quarter = Arc(radius, math.pi / 2.0)
    return (Line(a), quarter, Line(b), quarter, Line(a), quarter, Line(b), quarter)


def concrete_turn(**overrides) -> Scenario:
    """34 m L-shaped flat path, 0.4 m/s, 7 stops."""
    quarter = Arc(1.0, math.pi / 2.0)
    leg = 0.5 * (34.0 - quarter.length)
    kw = dict(
        name="concrete_turn",
        path=(Line(leg), quarter, Line(leg)),
        commanded_speed=0.4,
        n_stops=7,
        roughness=0.03,
        turn_skid=1.15,
    )
    kw.update(overrides)
    return Scenario(**kw)


def rough_terrain(**overrides) -> Scenario:
    """151 m loop over uneven ground, 0.4 m/s, 42 stops, five slip events."""
    r = 2.0
    path = (
        Line(30.0), Arc(r, math.pi / 2), Line(20.0), Arc(r, -math.pi / 3),
        Line(25.0), Arc(r, math.pi / 2), Line(20.0), Arc(r, math.pi / 3),
    )
    used = sum(seg.length for seg in path)
    path = path + (Line(151.0 - used),)
    base = dict(
        name="rough_terrain",
        path=path,
        commanded_speed=0.4,
        n_stops=42,
        roughness=0.12,
        terrain=Terrain.rough(0.08),
        turn_skid=1.3,
        sideslip_gain=0.02,
        odom_scale_error=0.01,
    )
    base.update(overrides)
    scn = Scenario(**base)
    if "slip_events" not in overrides:
        scn = _with_default_slips(scn)
    return scn


def _with_default_slips(scn: Scenario, legs=(4, 12, 20, 29, 37), duration=2.0) -> Scenario:
    ratios = ((0.5, 0.5), (0.4, 0.6), (0.8, 0.7), (0.6, 0.4), (0.45, 0.75))
    drives = [p for p in scn.phases() if p[0] == "drive"]
    events = []
    for leg, (li, ri) in zip(legs, ratios):
        if leg >= len(drives):
            break
        _, t0, t1, _, _ = drives[leg]
        mid = 0.5 * (t0 + t1)
        events.append(SlipEvent(round(mid - 0.5 * duration, 2), duration, li, ri))
    from dataclasses import replace

    return replace(scn, slip_events=tuple(events))


def fast_rectangle(**overrides) -> Scenario:
    """87 m rectangle, 0.8 m/s, 8 stops."""
    kw = dict(
        name="fast_rectangle",
        path=_rectangle(87.0, 0.6),
        commanded_speed=0.8,
        n_stops=8,
        roughness=0.06,
        turn_skid=1.15,
    )
    kw.update(overrides)
    return Scenario(**kw)


def slow_rectangle(**overrides) -> Scenario:
    """85 m rectangle, 0.2 m/s, 21 stops."""
    kw = dict(
        name="slow_rectangle",
        path=_rectangle(85.0, 0.6),
        commanded_speed=0.2,
        n_stops=21,
        roughness=0.04,
        turn_skid=1.15,
    )
    kw.update(overrides)
    return Scenario(**kw)


SCENARIOS = {
    "concrete_turn": concrete_turn,
    "rough_terrain": rough_terrain,
    "fast_rectangle": fast_rectangle,
    "slow_rectangle": slow_rectangle,
}


def get_scenario(name: str, **overrides) -> Scenario:
    try:
        factory = SCENARIOS[name]
    except KeyError:
        raise ValidationError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return factory(**overrides)
