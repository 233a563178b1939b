"""
Filter orchestration, configuration and evaluation.

:func:`run_filter` replays one dataset through the error-state filter with a
chosen set of aiding updates; :func:`evaluate` scores a trace against truth
and :func:`report` lays the scores out as a table.
"""

from __future__ import annotations

import io
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from . import aiding, sim
from .aiding import (
    AidingThresholds,
    MeasurementNoise,
    OdomSample,
    OdomWindow,
    RoverGeometry,
    SlipFlag,
    StationaryDetector,
)
from .dataset import Dataset, TruthTable, read_csv, write_csv
from .ekf import (
    ADIS16495,
    ErrorStateEKF,
    ImuNoiseSpec,
    initial_covariance,
    measurement_update,
)
from .errors import (
    BufferOverflow,
    ConfigMismatch,
    NoOverlap,
    TimestampRegression,
    ValidationError,
)
from .geodesy import PLANETS, GeodeticPosition, earth_rate_ned, euler_to_dcm
from .mechanization import ImuSample, NavState
from .smoother import DEFAULT_MAX_EPOCHS, SegmentRecorder

log = logging.getLogger(__name__)

DEG = math.pi / 180.0

COMBO_ORDER = (
    "I", "I+O", "I+O+N", "I+O+N+B",
    "I+Z", "I+Z+B", "I+Z+N", "I+Z+N+B",
    "I+Z+O", "I+Z+B+O", "I+Z+N+O", "I+Z+N+B+O",
)


@dataclass(frozen=True)
class UpdateCombo:
    """Aiding switches on top of the always-on INS."""

    odometry: bool = False
    zero_type: bool = False
    nonholonomic: bool = False
    backward: bool = False

    @classmethod
    def parse(cls, text: str) -> UpdateCombo:
        """Accept any subset of ``IZNOB``, with or without ``+`` separators."""
        letters = text.replace("+", "").replace(" ", "").upper()
        bad = set(letters) - set("IZNOB")
        if bad:
            raise ValidationError(f"unknown update letters {''.join(sorted(bad))!r} in {text!r}")
        return cls(
            odometry="O" in letters,
            zero_type="Z" in letters,
            nonholonomic="N" in letters,
            backward="B" in letters,
        )

    @property
    def label(self) -> str:
        parts = ["I"]
        if self.zero_type:
            parts.append("Z")
            if self.nonholonomic:
                parts.append("N")
            if self.backward:
                parts.append("B")
            if self.odometry:
                parts.append("O")
        else:
            if self.odometry:
                parts.append("O")
            if self.nonholonomic:
                parts.append("N")
            if self.backward:
                parts.append("B")
        return "+".join(parts)

    def __str__(self) -> str:
        return self.label


ALL_COMBOS = tuple(UpdateCombo.parse(c) for c in COMBO_ORDER)


def combo_rank(label: str) -> int:
    try:
        return COMBO_ORDER.index(label)
    except ValueError:
        return len(COMBO_ORDER)


@dataclass(frozen=True)
class InitialSigma:
    tilt: float = 0.5 * DEG
    heading: float = 1.0 * DEG
    velocity: float = 0.05
    position: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    geometry: RoverGeometry = field(default_factory=RoverGeometry)
    imu: ImuNoiseSpec = ADIS16495
    thresholds: AidingThresholds = field(default_factory=AidingThresholds)
    noise: MeasurementNoise = field(default_factory=MeasurementNoise)
    initial_sigma: InitialSigma = field(default_factory=InitialSigma)
    imu_rate: float = 100.0
    odom_rate: float = 10.0
    encoder_resolution: float = sim.ENCODER_RESOLUTION
    seed: int = 0
    planet: str = "earth"
    level_window: float = 5.0
    max_segment_epochs: int = DEFAULT_MAX_EPOCHS

    def __post_init__(self):
        if self.planet not in PLANETS:
            raise ValidationError(f"unknown planet {self.planet!r}")
        for name in ("imu_rate", "odom_rate", "encoder_resolution", "level_window"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")

    @property
    def model(self):
        return PLANETS[self.planet]


_SECTIONS = {
    "geometry": "geometry",
    "imu": "imu",
    "thresholds": "thresholds",
    "noise": "noise",
    "init_sigma": "initial_sigma",
}
_SCALARS = {
    "rates.imu": ("imu_rate", float),
    "rates.odom": ("odom_rate", float),
    "odom.encoder_resolution": ("encoder_resolution", float),
    "seed": ("seed", int),
    "planet": ("planet", str),
    "filter.level_window": ("level_window", float),
    "filter.max_segment_epochs": ("max_segment_epochs", int),
}


def _parse_value(key: str, text: str, current):
    try:
        if isinstance(current, tuple):
            vals = tuple(float(x) for x in text.split(","))
            if len(vals) != len(current):
                raise ValueError
            return vals
        return type(current)(text)
    except ValueError:
        raise ValidationError(f"bad value for {key!r}: {text!r}") from None


def config_from_manifest(m: dict[str, str], base: RunConfig | None = None) -> RunConfig:
    """Overlay ``section.field = value`` entries onto ``base``; other keys are ignored."""
    cfg = base or RunConfig()
    updates: dict[str, object] = {}
    grouped: dict[str, dict[str, str]] = {}
    for key, value in m.items():
        if key in _SCALARS:
            attr, typ = _SCALARS[key]
            try:
                updates[attr] = typ(value)
            except ValueError:
                raise ValidationError(f"bad value for {key!r}: {value!r}") from None
            continue
        section, _, name = key.partition(".")
        if section in _SECTIONS:
            grouped.setdefault(section, {})[name] = value
    for section, entries in grouped.items():
        attr = _SECTIONS[section]
        obj = getattr(cfg, attr)
        known = {f.name: getattr(obj, f.name) for f in fields(obj)}
        kw = {}
        for name, value in entries.items():
            if name not in known:
                raise ValidationError(f"unknown config key '{section}.{name}'")
            kw[name] = _parse_value(f"{section}.{name}", value, known[name])
        try:
            updates[attr] = replace(obj, **kw)
        except ValueError as exc:
            raise ValidationError(f"{section}: {exc}") from None
    return replace(cfg, **updates)


def config_to_manifest(cfg: RunConfig) -> dict[str, str]:
    out: dict[str, str] = {}
    for section, attr in _SECTIONS.items():
        obj = getattr(cfg, attr)
        for f in fields(obj):
            v = getattr(obj, f.name)
            out[f"{section}.{f.name}"] = ", ".join(repr(float(x)) for x in v) if isinstance(v, tuple) else repr(v)
    for key, (attr, _) in _SCALARS.items():
        v = getattr(cfg, attr)
        out[key] = v if isinstance(v, str) else repr(v)
    return out


# simulation front end ----------------------------------------------------------


def filter_imu_spec(scn: sim.Scenario) -> ImuNoiseSpec:
    """Sensor spec with the velocity random walk widened to cover vibration."""
    s = scn.imu
    vib = scn.roughness / math.sqrt(scn.imu_rate)
    return replace(s, accel_vrw=math.sqrt(s.accel_vrw**2 + vib**2))


def simulate_dataset(scn: sim.Scenario, seed: int = 0, truth: sim.TruthTrajectory | None = None) -> Dataset:
    """Truth, noisy IMU, quantized odometry and a manifest for one seeded run."""
    tr = sim.generate_truth(scn) if truth is None else truth
    ss_imu, ss_odom, ss_head = np.random.SeedSequence(seed).spawn(3)
    imu = sim.synthesize_imu(tr, seed=ss_imu)
    odom = sim.synthesize_odometry(tr, seed=int(ss_odom.generate_state(1)[0]))
    heading = float(tr.euler[0, 2] + np.random.default_rng(ss_head).normal(0.0, scn.heading_std))
    cfg = RunConfig(
        geometry=scn.geometry,
        imu=filter_imu_spec(scn),
        initial_sigma=InitialSigma(heading=scn.heading_std),
        imu_rate=scn.imu_rate,
        odom_rate=scn.odom_rate,
        seed=seed,
    )
    m = {"scenario": scn.name}
    m.update(config_to_manifest(cfg))
    m.update(
        {
            "init.time": repr(float(tr.t[0])),
            "init.lat": repr(float(tr.llh[0, 0])),
            "init.lon": repr(float(tr.llh[0, 1])),
            "init.h": repr(float(tr.llh[0, 2])),
            "init.yaw": repr(heading),
            "schedule.stops": ", ".join(f"{a!r}:{b!r}" for a, b in scn.stops()),
            "schedule.slips": ", ".join(
                f"{e.start!r}:{e.end!r}:{e.left_ratio!r}:{e.right_ratio!r}" for e in scn.slip_events
            ),
        }
    )
    return Dataset(imu, odom, TruthTable.from_trajectory(tr), m)


def _intervals(text: str, width: int) -> list[tuple[float, ...]]:
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        parts = item.split(":")
        if len(parts) != width:
            raise ValidationError(f"bad interval {item!r}")
        try:
            out.append(tuple(float(p) for p in parts))
        except ValueError:
            raise ValidationError(f"bad interval {item!r}") from None
    return out


def stop_schedule(m: dict[str, str]) -> list[tuple[float, float]] | None:
    text = m.get("schedule.stops")
    return None if text is None else [tuple(x) for x in _intervals(text, 2)]


def slip_schedule(m: dict[str, str]) -> list[tuple[float, float, float, float]]:
    return [tuple(x) for x in _intervals(m.get("schedule.slips", ""), 4)]


# filter run ---------------------------------------------------------------------


@dataclass
class Trace:
    label: str
    stream: str  # "forward" or "smoothed"
    t: NDArray[np.float64]
    llh: NDArray[np.float64]
    v: NDArray[np.float64]
    C: NDArray[np.float64]
    sigma: NDArray[np.float64]  # 1-sigma north/east/down in meters

    def __len__(self) -> int:
        return len(self.t)


@dataclass(frozen=True)
class SlipRecord:
    time: float
    chi: float
    ratios: tuple[float, ...]
    flag: SlipFlag


@dataclass
class RunResult:
    combo: UpdateCombo
    forward: Trace
    smoothed: Trace | None
    slips: list[SlipRecord]
    stops: list[tuple[float, float]]
    biases: NDArray[np.float64]


def initial_state(ds: Dataset, cfg: RunConfig) -> NavState:
    """Position and heading from the manifest; roll and pitch by accelerometer leveling."""
    m = ds.manifest
    try:
        lat, lon, h = (float(m[k]) for k in ("init.lat", "init.lon", "init.h"))
    except KeyError as exc:
        raise ValidationError(f"manifest lacks {exc.args[0]!r}") from None
    yaw = float(m.get("init.yaw", 0.0))
    t0 = float(m.get("init.time", ds.imu.t[0] - 1.0 / cfg.imu_rate))
    sel = ds.imu.t <= t0 + cfg.level_window
    if not np.any(sel):
        raise ValidationError("no IMU data inside the leveling window")
    f = ds.imu.accel[sel].mean(axis=0)
    roll = math.atan2(-f[1], -f[2])
    pitch = math.atan2(f[0], math.hypot(f[1], f[2]))
    v0 = np.array([float(m.get(f"init.v{c}", 0.0)) for c in "NED"])
    return NavState(euler_to_dcm(roll, pitch, yaw), v0, GeodeticPosition(lat, lon, h), t0)


def _match_odometry(imu_t, odom_t, odom_rate) -> NDArray[np.int64]:
    """IMU index for each odometry sample, or -1 when none lies within half a period."""
    idx = np.clip(np.searchsorted(imu_t, odom_t), 1, len(imu_t) - 1)
    left = imu_t[idx - 1]
    right = imu_t[idx]
    idx = np.where(np.abs(odom_t - left) <= np.abs(right - odom_t), idx - 1, idx)
    ok = np.abs(imu_t[idx] - odom_t) <= 0.5 / odom_rate + 1e-9
    return np.where(ok, idx, -1)


def _euler_batch(C):
    roll = np.arctan2(C[:, 2, 1], C[:, 2, 2])
    pitch = -np.arcsin(np.clip(C[:, 2, 0], -1.0, 1.0))
    yaw = np.arctan2(C[:, 1, 0], C[:, 0, 0])
    return np.stack([roll, pitch, yaw], axis=1)


def _sigma_m(P_diag, llh, model):
    lat, h = llh[:, 0], llh[:, 2]
    r_n, r_e = sim._radii(lat, model)
    return np.stack(
        [
            np.sqrt(P_diag[:, 0]) * (r_n + h),
            np.sqrt(P_diag[:, 1]) * (r_e + h) * np.cos(lat),
            np.sqrt(P_diag[:, 2]),
        ],
        axis=1,
    )


def run_filter(ds: Dataset, cfg: RunConfig, combo: UpdateCombo) -> RunResult:
    """
    Replay ``ds`` through the filter.

    Propagates on every IMU sample. At odometry epochs the stop detector is
    refreshed and, per ``combo``, the odometry and non-holonomic updates
    run. While stopped, zero-type updates run at the IMU rate. When a stop
    ends the segment since the previous stop is smoothed if requested.
    """
    imu, odom = ds.imu, ds.odom
    n = len(imu.t)
    if n < 2:
        raise ValidationError("need at least two IMU samples")
    dts = np.diff(imu.t)
    if np.any(dts <= 0):
        k = int(np.nonzero(dts <= 0)[0][0]) + 1
        raise TimestampRegression(f"IMU sample {k} at t={imu.t[k]!r} does not advance time")
    if len(odom.t) > 1 and np.any(np.diff(odom.t) <= 0):
        raise TimestampRegression("odometry timestamps do not advance")
    rate = 1.0 / float(np.median(dts))
    if abs(rate - cfg.imu_rate) > 0.02 * cfg.imu_rate:
        raise ConfigMismatch(f"IMU data at {rate:.2f} Hz, config says {cfg.imu_rate} Hz")
    if len(odom.t) > 1:
        orate = 1.0 / float(np.median(np.diff(odom.t)))
        if abs(orate - cfg.odom_rate) > 0.02 * cfg.odom_rate:
            raise ConfigMismatch(f"odometry at {orate:.2f} Hz, config says {cfg.odom_rate} Hz")

    model = cfg.model
    geom = cfg.geometry
    thr = cfg.thresholds
    noise = cfg.noise
    nav0 = initial_state(ds, cfg)
    if imu.t[0] <= nav0.time:
        raise TimestampRegression("first IMU sample does not follow the initial epoch")
    sig = cfg.initial_sigma
    P0 = initial_covariance(
        nav0.position.latitude, nav0.position.height, cfg.imu,
        sig.tilt, sig.heading, sig.velocity, sig.position, model,
    )
    ekf = ErrorStateEKF(nav0, P0, cfg.imu, model)

    odom_at = np.full(n, -1, dtype=np.int64)
    if len(odom.t):
        idx = _match_odometry(imu.t, odom.t, cfg.odom_rate)
        valid = idx >= 0
        if np.count_nonzero(~valid):
            log.warning("%d odometry samples have no IMU epoch within half a period", np.count_nonzero(~valid))
        odom_at[idx[valid]] = np.nonzero(valid)[0]

    schedule = stop_schedule(ds.manifest)
    sched_i = 0

    window = OdomWindow(1.0 / cfg.odom_rate, geom.lever_arm)
    window.reset(math.atan2(ekf.C[1, 0], ekf.C[0, 0]))
    detector = StationaryDetector(max(10, int(round(thr.imu_std_window * cfg.imu_rate))))
    R_nhc = {2: noise.nhc(2), 1: noise.nhc(1)}
    R_zero = noise.zero_type()
    R_odom = noise.odometry()
    H_zero = np.zeros((6, 15))
    H_zero[0:3, 3:6] = -np.eye(3)
    H_zero[3:6, 12:15] = -np.eye(3)

    f_t = np.empty(n + 1)
    f_llh = np.empty((n + 1, 3))
    f_v = np.empty((n + 1, 3))
    f_C = np.empty((n + 1, 3, 3))
    f_P = np.empty((n + 1, 3))
    f_t[0], f_llh[0], f_v[0], f_C[0] = nav0.time, ekf.llh, ekf.v, ekf.C
    f_P[0] = np.diag(ekf.P)[6:9]

    recorder = SegmentRecorder(cfg.max_segment_epochs) if combo.backward else None
    smoothed = []
    if recorder is not None:
        recorder.append(nav0.time, ekf.C, ekf.v, ekf.llh, ekf.biases, ekf.P)

    def flush():
        out = recorder.flush()
        if out is not None:
            smoothed.append(out)

    slips: list[SlipRecord] = []
    stops: list[tuple[float, float]] = []
    stationary = False
    stop_start = 0.0
    t_prev = nav0.time

    for k in range(n):
        tk = float(imu.t[k])
        dt = tk - t_prev
        t_prev = tk
        w_raw = imu.gyro[k]
        f_raw = imu.accel[k]
        ekf.predict(w_raw, f_raw, dt)
        phi = ekf.last_transition
        P_pred = ekf.last_predicted
        u = np.zeros(15)
        w_corr = w_raw - ekf.biases[3:6]
        window.add(ekf.C, ekf.v, w_corr, dt)
        detector.push(f_raw)

        j = odom_at[k]
        if j >= 0:
            left, right = float(odom.left[j]), float(odom.right[j])
            if schedule is None:
                in_schedule = True
            else:
                while sched_i < len(schedule) and schedule[sched_i][1] < tk:
                    sched_i += 1
                in_schedule = sched_i < len(schedule) and schedule[sched_i][0] <= tk
            now_stationary = (
                in_schedule
                and max(abs(left), abs(right)) < thr.stationary_speed
                and detector.is_quiet(thr.imu_std_gate)
            )
            if now_stationary and not stationary:
                stop_start = tk
            elif stationary and not now_stationary:
                stops.append((stop_start, tk))
                if recorder is not None:
                    flush()
            stationary = now_stationary

            if combo.odometry and window.is_complete():
                sample = OdomSample(float(odom.t[j]), left, right)
                v_lon, yaw_rate = aiding.odom_kinematics(sample, geom)
                z, H = aiding.odometry_update(window, (v_lon, yaw_rate))
                dx, P1, chi = measurement_update(ekf.P, H, R_odom, z)
                T = window.elapsed
                ratios = aiding.side_slip_ratios(
                    window.v_body[0] / T, window.heading_rate * window.cos_pitch / T, sample, geom
                )
                flag = aiding.classify_slip(chi, ratios, thr)
                if flag is SlipFlag.SIGNIFICANT:
                    dx, P1, _ = measurement_update(ekf.P, H, R_odom * noise.slip_inflation, z)
                slips.append(SlipRecord(tk, chi, tuple(ratios), flag))
                ekf.P = P1
                ekf.correct(dx.vector)
                u += dx.vector
            if combo.nonholonomic:
                nav = NavState(ekf.C, ekf.v, GeodeticPosition(*ekf.llh), tk)
                z, H = aiding.nonholonomic_update(nav, ImuSample(tk, w_raw - ekf.biases[3:6], f_raw), geom, thr)
                dx, _ = ekf.update(H, R_nhc[len(z)], z)
                u += dx.vector
            window.reset(math.atan2(ekf.C[1, 0], ekf.C[0, 0]))

        if stationary and combo.zero_type:
            w_ie_b = ekf.C.T @ earth_rate_ned(ekf.llh[0], model)
            z = np.concatenate([-ekf.v, -(w_raw - ekf.biases[3:6] - w_ie_b)])
            dx, _ = ekf.update(H_zero, R_zero, z)
            u += dx.vector

        f_t[k + 1] = tk
        f_llh[k + 1] = ekf.llh
        f_v[k + 1] = ekf.v
        f_C[k + 1] = ekf.C
        f_P[k + 1] = ekf.P[6, 6], ekf.P[7, 7], ekf.P[8, 8]

        if recorder is not None:
            try:
                recorder.append(tk, ekf.C, ekf.v, ekf.llh, ekf.biases, ekf.P, phi, P_pred, u)
            except BufferOverflow:
                log.warning("segment buffer full at t=%.2f s; smoothing early", tk)
                flush()
                recorder.append(tk, ekf.C, ekf.v, ekf.llh, ekf.biases, ekf.P, phi, P_pred, u)

    if stationary:
        stops.append((stop_start, float(imu.t[-1])))

    label = combo.label
    forward = Trace(label, "forward", f_t, f_llh, f_v, f_C, _sigma_m(f_P, f_llh, model))
    smooth_trace = None
    if recorder is not None:
        flush()
        t_s = np.concatenate([[f_t[0]]] + [s[0] for s in smoothed])
        C_s = np.concatenate([f_C[:1]] + [s[1] for s in smoothed])
        v_s = np.concatenate([f_v[:1]] + [s[2] for s in smoothed])
        llh_s = np.concatenate([f_llh[:1]] + [s[3] for s in smoothed])
        P_s = np.concatenate([f_P[:1]] + [s[5][:, 6:9, 6:9].diagonal(axis1=1, axis2=2) for s in smoothed])
        smooth_trace = Trace(label, "smoothed", t_s, llh_s, v_s, C_s, _sigma_m(P_s, llh_s, model))
    return RunResult(combo, forward, smooth_trace, slips, stops, ekf.biases.copy())


# evaluation ---------------------------------------------------------------------


@dataclass
class ErrorReport:
    label: str
    stream: str
    median: float
    std: float
    max: float
    rms_east: float
    rms_north: float
    rms_up: float
    t: NDArray[np.float64] = field(repr=False)
    error_ned: NDArray[np.float64] = field(repr=False)
    sigma3_ned: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def horizontal(self) -> NDArray[np.float64]:
        return np.hypot(self.error_ned[:, 0], self.error_ned[:, 1])


def _as_trace(obj) -> tuple[NDArray, NDArray, NDArray | None, str, str]:
    if isinstance(obj, Trace):
        return obj.t, obj.llh, obj.sigma, obj.label, obj.stream
    t, llh = obj
    return np.asarray(t, float), np.asarray(llh, float), None, "estimate", "forward"


def evaluate(estimate, truth, model=None) -> ErrorReport:
    """
    Compare an estimate trace with truth interpolated to the estimate times.

    ``estimate`` is a :class:`Trace` or a ``(t, llh)`` pair; ``truth`` is a
    :class:`TruthTable` or ``(t, llh)`` pair.
    """
    model = PLANETS["earth"] if model is None else model
    t, llh, sigma, label, stream = _as_trace(estimate)
    if isinstance(truth, TruthTable):
        tt, tl = truth.t, truth.llh
    else:
        tt, tl = (np.asarray(a, float) for a in truth)
    sel = (t >= tt[0] - 1e-9) & (t <= tt[-1] + 1e-9)
    if not np.any(sel):
        raise NoOverlap("estimate and truth do not overlap in time")
    t, llh = t[sel], llh[sel]
    lat_t = np.interp(t, tt, tl[:, 0])
    lon_t = np.interp(t, tt, np.unwrap(tl[:, 1]))
    h_t = np.interp(t, tt, tl[:, 2])
    r_n, r_e = sim._radii(lat_t, model)
    dlon = np.remainder(llh[:, 1] - lon_t + math.pi, 2.0 * math.pi) - math.pi
    err = np.stack(
        [(llh[:, 0] - lat_t) * (r_n + h_t), dlon * (r_e + h_t) * np.cos(lat_t), -(llh[:, 2] - h_t)],
        axis=1,
    )
    hz = np.hypot(err[:, 0], err[:, 1])
    rms = np.sqrt(np.mean(err**2, axis=0))
    return ErrorReport(
        label=label,
        stream=stream,
        median=float(np.median(hz)),
        std=float(np.std(hz)),
        max=float(np.max(hz)),
        rms_east=float(rms[1]),
        rms_north=float(rms[0]),
        rms_up=float(rms[2]),
        t=t,
        error_ned=err,
        sigma3_ned=None if sigma is None else 3.0 * sigma[sel],
    )


def evaluate_run(result: RunResult, truth: TruthTable, model=None) -> list[ErrorReport]:
    out = [evaluate(result.forward, truth, model)]
    if result.smoothed is not None:
        out.append(evaluate(result.smoothed, truth, model))
    return out


def headline(reports: list[ErrorReport]) -> ErrorReport:
    """Smoothed stream when present, else forward."""
    for r in reports:
        if r.stream == "smoothed":
            return r
    return reports[0]


_COLUMNS = ("combo", "stream", "median", "std", "max", "rms_east", "rms_north", "rms_up")


def report(reports: list[ErrorReport], sink=None) -> str:
    """
    Fixed-width table ordered like the combination menu; with ``sink`` (a
    directory) also writes ``summary.csv`` and one per-epoch trace CSV per row.
    """
    if not reports:
        raise ValidationError("nothing to report")
    rows = sorted(reports, key=lambda r: (combo_rank(r.label), r.label, r.stream != "forward"))
    w = max(12, max(len(r.label) for r in rows))
    buf = io.StringIO()
    buf.write(f"{'combo':<{w}} {'stream':<9} {'median':>9} {'std':>9} {'max':>9} {'east':>9} {'north':>9} {'up':>9}\n")
    for r in rows:
        buf.write(
            f"{r.label:<{w}} {r.stream:<9} {r.median:9.3f} {r.std:9.3f} {r.max:9.3f} "
            f"{r.rms_east:9.3f} {r.rms_north:9.3f} {r.rms_up:9.3f}\n"
        )
    text = buf.getvalue()
    if sink is not None:
        d = Path(sink)
        d.mkdir(parents=True, exist_ok=True)
        lines = [",".join(_COLUMNS)]
        for r in rows:
            lines.append(
                f"{r.label},{r.stream},{r.median:.6f},{r.std:.6f},{r.max:.6f},"
                f"{r.rms_east:.6f},{r.rms_north:.6f},{r.rms_up:.6f}"
            )
        (d / "summary.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        for r in rows:
            write_error_trace(d / f"trace_{r.label.replace('+', '')}_{r.stream}.csv", r)
    return text


def write_error_trace(path, r: ErrorReport) -> None:
    s3 = r.sigma3_ned if r.sigma3_ned is not None else np.full_like(r.error_ned, np.nan)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,err_n,err_e,err_d,sigma3_n,sigma3_e,sigma3_d\n")
        for t, e, s in zip(r.t, r.error_ned, s3):
            fh.write(f"{t:.4f},{e[0]:.6f},{e[1]:.6f},{-e[2]:.6f},{s[0]:.6f},{s[1]:.6f},{s[2]:.6f}\n")


def read_error_trace(path, label: str = "trace", stream: str = "forward") -> ErrorReport:
    a = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    err = a[:, 1:4].copy()
    err[:, 2] = -err[:, 2]
    hz = np.hypot(err[:, 0], err[:, 1])
    rms = np.sqrt(np.mean(err**2, axis=0))
    return ErrorReport(
        label, stream, float(np.median(hz)), float(np.std(hz)), float(hz.max()),
        float(rms[1]), float(rms[0]), float(rms[2]), a[:, 0], err, a[:, 4:7],
    )


TRACE_HEADER = (
    "t", "lat_rad", "lon_rad", "h_m", "roll", "pitch", "yaw",
    "vN", "vE", "vD", "sigma_n", "sigma_e", "sigma_d",
)


def write_trace(path, tr: Trace) -> None:
    """Navigation solution CSV; attitude as roll/pitch/yaw in radians."""
    eu = _euler_batch(tr.C)
    write_csv(Path(path), TRACE_HEADER, [tr.t, *tr.llh.T, *eu.T, *tr.v.T, *tr.sigma.T])


def read_trace(path, label: str = "estimate", stream: str = "forward") -> Trace:
    _, a = read_csv(Path(path), (TRACE_HEADER,))
    if not len(a):
        raise ValidationError(f"{path}: no samples")
    C = np.array([euler_to_dcm(*e) for e in a[:, 4:7]])
    return Trace(label, stream, a[:, 0].copy(), a[:, 1:4].copy(), a[:, 7:10].copy(), C, a[:, 10:13].copy())


def write_events(directory, result: RunResult) -> None:
    """``slips.csv`` and ``stops.csv`` for one run."""
    d = Path(directory)
    with open(d / "slips.csv", "w", encoding="utf-8") as fh:
        fh.write("t,chi,ratio_left,ratio_right,flag\n")
        for s in result.slips:
            r = list(s.ratios) + [float("nan")] * (2 - len(s.ratios))
            fh.write(f"{s.time:.4f},{s.chi:.6f},{r[0]:.6f},{r[1]:.6f},{s.flag.name}\n")
    with open(d / "stops.csv", "w", encoding="utf-8") as fh:
        fh.write("start,end\n")
        for a, b in result.stops:
            fh.write(f"{a:.4f},{b:.4f}\n")


# batch -------------------------------------------------------------------------


def worker_count(default: int | None = None) -> int:
    env = os.environ.get("ROVERNAV_WORKERS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValidationError(f"ROVERNAV_WORKERS must be an integer, got {env!r}") from None
        return max(1, n)
    return default if default is not None else 1


def _run_one(args):
    ds, cfg, combo = args
    res = run_filter(ds, cfg, combo)
    if ds.truth is None:
        return res, []
    return res, evaluate_run(res, ds.truth, cfg.model)


def run_combos(ds: Dataset, cfg: RunConfig, combos, workers: int | None = None):
    """Run several combinations; results keep the input order."""
    combos = list(combos)
    workers = worker_count(workers)
    jobs = [(ds, cfg, c) for c in combos]
    if workers <= 1 or len(jobs) <= 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))
