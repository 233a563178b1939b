"""
Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The Monte-Carlo criteria share cached filter runs, so the whole file takes
a few minutes on one core.
"""

import functools
import math
import time

import numpy as np
import pytest
from test_ekf import BLOCKS, _fd_continuous, _fd_discrete

from rovernav import _kernels, cli, pipeline, sim
from rovernav.ekf import system_matrix
from rovernav.geodesy import WGS84, euler_to_dcm, gravity_ned, ned_delta
from rovernav.mechanization import ImuSample, NavState, mechanize
from rovernav.pipeline import UpdateCombo
from rovernav.smoother import SegmentRecorder, rts_linear

SEEDS = range(20)

pytestmark = pytest.mark.slow


@pytest.fixture
def verdict(capsys):
    def emit(name, ok, detail):
        with capsys.disabled():
            print(f"\n{name}: {'PASS' if ok else 'FAIL'} ({detail})")
        assert ok, detail

    return emit


@functools.lru_cache(maxsize=None)
def _dataset(name, seed):
    ds = pipeline.simulate_dataset(sim.get_scenario(name), seed)
    return ds, pipeline.config_from_manifest(ds.manifest)


@functools.lru_cache(maxsize=None)
def _run(name, seed, combo):
    ds, cfg = _dataset(name, seed)
    res = pipeline.run_filter(ds, cfg, UpdateCombo.parse(combo))
    return res, pipeline.evaluate_run(res, ds.truth, cfg.model)


def test_c1_static_oracle(verdict):
    t0 = time.perf_counter()
    scn = sim.Scenario("static", initial_static=60.0, origin=(math.radians(39.65), 0.0, 300.0))
    tr = sim.generate_truth(scn, 100.0)
    imu = sim.synthesize_imu(tr, noise=False)
    s = NavState(tr.C[0], tr.v[0], tr.llh[0], tr.t[0])
    for k in range(len(imu.t)):
        s = mechanize(s, ImuSample(imu.t[k], imu.gyro[k], imu.accel[k]))
    elapsed = time.perf_counter() - t0
    speed = float(np.linalg.norm(s.velocity_ned))
    drift = float(np.linalg.norm(ned_delta(tr.llh[0], s.position)[:2]))
    ok = speed < 1e-6 and drift < 1e-3 and elapsed < 1.0
    verdict("C1 static oracle", ok, f"|v| {speed:.1e} m/s, drift {drift:.1e} m, {elapsed:.2f} s")


def test_c2_round_trip(verdict):
    scn = sim.Scenario(
        "curve",
        path=(sim.Line(5.0), sim.Arc(3.0, math.pi / 2), sim.Line(4.0), sim.Arc(2.0, -math.pi / 2), sim.Line(3.0)),
        commanded_speed=0.4,
        initial_static=6.0,
        terrain=sim.Terrain.rough(0.05),
    )
    tr = sim.generate_truth(scn, 100.0)
    imu = sim.synthesize_imu(tr, noise=False)
    s = NavState(tr.C[0], tr.v[0], tr.llh[0], tr.t[0])
    pos = att = 0.0
    for k in range(len(imu.t)):
        s = mechanize(s, ImuSample(imu.t[k], imu.gyro[k], imu.accel[k]))
        pos = max(pos, float(np.linalg.norm(ned_delta(tr.llh[k + 1], s.position))))
        c = 0.5 * (np.trace(s.attitude.T @ tr.C[k + 1]) - 1.0)
        att = max(att, math.acos(min(1.0, c)))
    ok = tr.t[-1] >= 60.0 and pos < 1e-3 and att < 1e-5
    verdict("C2 round trip", ok, f"{tr.t[-1]:.0f} s, max position {pos:.1e} m, max attitude {att:.1e} rad")


def _block_errors(F, J, cols):
    out = []
    for r in ("att", "vel", "pos"):
        band = np.linalg.norm(J[BLOCKS[r]])
        for c in cols:
            a, b = F[BLOCKS[r], BLOCKS[c]], J[BLOCKS[r], BLOCKS[c]]
            if a.any():
                out.append(np.linalg.norm(a - b) / np.linalg.norm(b))
            else:
                # structurally zero block: residue relative to the row band
                out.append(np.linalg.norm(b) / band)
    return out


def test_c3_jacobian(verdict):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(100):
        C = euler_to_dcm(*rng.uniform(-0.3, 0.3, 2), rng.uniform(-math.pi, math.pi))
        v = rng.uniform(-1.5, 1.5, 3) * [1.0, 1.0, 0.1]
        p = np.array([rng.uniform(-1.2, 1.2), rng.uniform(-math.pi, math.pi), rng.uniform(-100.0, 2000.0)])
        w = rng.uniform(-0.3, 0.3, 3)
        f = C.T @ -gravity_ned(p) + rng.uniform(-0.5, 0.5, 3)
        F = system_matrix(NavState(C, v, p), C @ f, WGS84)[0:9]
        worst = max(worst, *_block_errors(F, _fd_continuous(C, v, p, w, f, WGS84), BLOCKS))
        # single-step differences of the compiled mechanization; position columns sit below round-off
        worst = max(worst, *_block_errors(F, _fd_discrete(C, v, p, w, f, WGS84), ("att", "vel", "ba", "bg")))
    verdict("C3 Jacobian check", worst < 1e-3, f"worst per-block relative error {worst:.1e} over 100 states")


def _ssr_ratio(t, e):
    """Residual sum of squares of e ~ a t over that of e ~ b t^3."""
    lin = np.linalg.lstsq(t[:, None], e, rcond=None)[1][0]
    cub = np.linalg.lstsq((t**3)[:, None], e, rcond=None)[1][0]
    return lin / cub


def test_c4_error_growth(verdict):
    t0 = time.perf_counter()
    ds, _ = _dataset("rough_terrain", 0)
    start = pipeline.stop_schedule(ds.manifest)[0][1]
    ratios = {}
    for combo in ("I", "IZ"):
        rep = _run("rough_terrain", 0, combo)[1][0]
        m = rep.t >= start
        t, h = rep.t[m] - start, rep.horizontal[m]
        ratios[combo] = _ssr_ratio(t, h - h[0])
    rep = _run("rough_terrain", 0, "IZ")[1][0]
    m = rep.t >= start
    envelope = _ssr_ratio(rep.t[m] - start, np.maximum.accumulate(rep.horizontal[m]) - rep.horizontal[m][0])
    elapsed = time.perf_counter() - t0
    ok = ratios["I"] > 5.0 and ratios["IZ"] < 1.0 and envelope < 1.0 and elapsed < 30.0
    verdict(
        "C4 error growth",
        ok,
        f"INS ratio {ratios['I']:.2f}, I+Z ratio {ratios['IZ']:.3f}, I+Z envelope {envelope:.3f}, {elapsed:.1f} s",
    )


def test_c5_combination_ordering(verdict):
    t0 = time.perf_counter()
    med = {}
    for label in pipeline.COMBO_ORDER:
        med[label] = float(np.median([pipeline.headline(_run("concrete_turn", s, label)[1]).median for s in SEEDS]))
    elapsed = time.perf_counter() - t0
    best = min(med.values())
    ordered = med["I"] > med["I+O"] > med["I+Z"] > med["I+Z+O"]
    ok = ordered and med["I+Z+N+O"] <= 1.1 * best and elapsed < 300.0
    detail = ", ".join(f"{k} {med[k]:.3f}" for k in ("I", "I+O", "I+Z", "I+Z+O", "I+Z+N+O"))
    verdict("C5 combination ordering", ok, f"{detail}; best {best:.3f}; {elapsed:.0f} s")


class _CheckingRecorder(SegmentRecorder):
    """Records the smoothed-minus-filtered trace margin at every flushed epoch."""

    margins: list = []

    def flush(self):
        n = self.size
        P = self.P[1:n].copy()
        out = super().flush()
        if out is not None:
            _CheckingRecorder.margins.extend(np.trace(P, axis1=1, axis2=2) - np.trace(out[5], axis1=1, axis2=2))
        return out


def _scalar_batch():
    # x_{k+1} = x_k + w, z_k = x_k + v; Q = R = 1, prior N(0, 1), three measurements
    z = np.array([1.0, -0.5, 2.0])
    xf, Pf, xp, Pp = [np.zeros(1)], [np.eye(1)], [np.zeros(1)], [np.eye(1)]
    for zk in z:
        P_pred = Pf[-1] + 1.0
        K = P_pred / (P_pred + 1.0)
        xp.append(xf[-1])
        Pp.append(P_pred)
        xf.append(xf[-1] + K @ (zk - xf[-1]))
        Pf.append((1.0 - K) * P_pred)
    xs, Ps = rts_linear(np.array(xf), np.array(Pf), np.array(xp), np.array(Pp), np.ones((4, 1, 1)))
    # information form of the four-state chain
    A = np.diag([2.0, 3.0, 3.0, 2.0]) - np.diag([1.0] * 3, 1) - np.diag([1.0] * 3, -1)
    b = np.r_[0.0, z]
    cov = np.linalg.inv(A)
    return xs[:, 0], Ps[:, 0, 0], cov @ b, np.diag(cov)


def test_c6_smoother_optimality(verdict, monkeypatch):
    _CheckingRecorder.margins = []
    monkeypatch.setattr(pipeline, "SegmentRecorder", _CheckingRecorder)
    ds, cfg = _dataset("concrete_turn", 0)
    pipeline.run_filter(ds, cfg, UpdateCombo.parse("IZNBO"))
    margins = np.array(_CheckingRecorder.margins)
    xs, ps, xb, pb = _scalar_batch()
    err = max(np.abs(xs - xb).max(), np.abs(ps - pb).max())
    ok = len(margins) > 1000 and margins.min() >= -1e-12 and err < 1e-10
    verdict(
        "C6 smoother optimality",
        ok,
        f"{len(margins)} epochs, min trace(P)-trace(Ps) {margins.min():.1e}; scalar vs batch {err:.1e}",
    )


def test_c7_slip_detection(verdict):
    hits = events = false = 0
    minutes = 0.0
    for s in SEEDS:
        ds, _ = _dataset("rough_terrain", s)
        res = _run("rough_terrain", s, "IZNO")[0]
        flagged = np.array([r.time for r in res.slips if r.flag.value])
        matched = np.zeros(len(flagged), dtype=bool)
        for start, end, left, right in pipeline.slip_schedule(ds.manifest):
            assert 0.4 <= max(abs(left), abs(right)) <= 0.8
            m = (flagged >= start) & (flagged <= end + 0.5)
            matched |= m
            hits += bool(m.any())
            events += 1
        false += int(np.count_nonzero(~matched))
        minutes += (ds.imu.t[-1] - ds.imu.t[0]) / 60.0
    recall = hits / events
    rate = false / minutes
    ok = events == 100 and recall >= 0.9 and rate <= 0.1
    verdict("C7 slip detection", ok, f"recall {recall:.2f} ({hits}/{events}), {rate:.3f} false alarms/min")


def test_c8_covariance_consistency(verdict):
    inside = total = 0
    worst = 1.0
    for s in SEEDS:
        rep = _run("concrete_turn", s, "IZNO")[1][0]
        e, s3 = rep.error_ned, rep.sigma3_ned
        ok_k = np.hypot(e[:, 0], e[:, 1]) <= np.hypot(s3[:, 0], s3[:, 1])
        inside += int(np.count_nonzero(ok_k))
        total += len(ok_k)
        worst = min(worst, float(np.mean(ok_k)))
    frac = inside / total
    verdict("C8 covariance consistency", frac >= 0.95, f"{frac:.3f} of epochs inside the 3-sigma hull, worst seed {worst:.3f}")


def test_c9_throughput(verdict):
    ds, cfg = _dataset("rough_terrain", 0)
    n = 40_000
    imu = sim.ImuStream(ds.imu.t[:n], ds.imu.gyro[:n], ds.imu.accel[:n])
    m = ds.odom.t <= imu.t[-1]
    odom = sim.OdomStream(ds.odom.t[m], ds.odom.left[m], ds.odom.right[m])
    short = pipeline.Dataset(imu, odom, None, ds.manifest)
    t0 = time.perf_counter()
    pipeline.run_filter(short, cfg, UpdateCombo.parse("IZNBO"))
    elapsed = time.perf_counter() - t0
    span = imu.t[-1] - imu.t[0]
    verdict("C9 throughput", elapsed < 5.0, f"{span:.0f} s of data in {elapsed:.2f} s, {_kernels.BACKEND} kernels")


def test_c10_determinism(verdict, tmp_path):
    outputs = []
    for name in ("a", "b"):
        d = tmp_path / name
        assert cli.main(["simulate", "concrete_turn", "-o", str(d / "data"), "--seed", "5"]) == 0
        assert cli.main(["run", "-d", str(d / "data"), "--updates", "IZNBO", "IO", "-o", str(d / "run")]) == 0
        outputs.append({p.relative_to(d): p.read_bytes() for p in sorted(d.rglob("*.csv"))})
    same = outputs[0].keys() == outputs[1].keys() and all(outputs[0][k] == outputs[1][k] for k in outputs[0])
    verdict("C10 determinism", same, f"{len(outputs[0])} files compared byte for byte")
