"""
Compare the compiled and numpy kernel backends.

    python3 benchmarks/bench_kernels.py            # per-call timings
    python3 benchmarks/bench_kernels.py --run      # plus a full filter replay per backend
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rovernav import _pykernels
from rovernav.geodesy import WGS84, euler_to_dcm

try:
    from rovernav import _ckernels
except ImportError:
    _ckernels = None


def _cases():
    rng = np.random.default_rng(0)
    C = euler_to_dcm(0.02, -0.01, 1.2)
    v = np.array([0.3, 0.25, 0.01])
    pos = np.array([0.692, -1.395, 300.0])
    w = np.array([1e-3, -2e-3, 0.05])
    f = np.array([0.1, 0.05, -9.8])
    params = WGS84.as_array()
    A = rng.normal(size=(15, 15))
    P = A @ A.T * 1e-4 + np.eye(15) * 1e-6
    q = np.full(15, 1e-9)
    H = rng.normal(size=(4, 15))
    R = np.eye(4) * 1e-3
    z = rng.normal(size=4) * 1e-2
    lever = np.array([-0.25, 0.0, 0.3])
    N = 200
    Ps = np.repeat(P[None], N, axis=0)
    phi = np.repeat((np.eye(15) + 1e-3 * A)[None], N, axis=0)
    Pp = Ps + np.eye(15) * 1e-7
    u = rng.normal(size=(N, 15)) * 1e-4
    return {
        "mechanize_step": lambda k: k.mechanize_step(C, v, pos, w, f, 0.01, params),
        "time_update": lambda k: k.time_update(C, v, pos, w, f, 0.01, params, 3600.0, 3600.0, P, q),
        "window_add": lambda k: k.window_add(C, v, w, lever, 0.01, np.zeros(_pykernels.WINDOW_SIZE)),
        "kalman_update(4 rows)": lambda k: k.kalman_update(P, H, R, z),
        "rts_backward(200 epochs)": lambda k: k.rts_backward(Ps, phi, Pp, u),
    }


def micro(repeat: int) -> None:
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    print(f"{'kernel':<26}" + "".join(f"{name:>14}" for name, _ in backends) + f"{'speedup':>10}")
    for name, fn in _cases().items():
        times = []
        for _, k in backends:
            n = max(1, repeat // 100) if "rts" in name else repeat
            times.append(min(timeit.repeat(lambda: fn(k), number=n, repeat=3)) / n * 1e6)
        cells = "".join(f"{t:12.2f}us" for t in times)
        speed = f"{times[0] / times[1]:9.1f}x" if len(times) > 1 else ""
        print(f"{name:<26}{cells}{speed}")


_REPLAY = """
import time
from rovernav import BACKEND, sim, pipeline as pl
ds = pl.simulate_dataset(sim.get_scenario({scenario!r}), 0)
cfg = pl.config_from_manifest(ds.manifest)
t0 = time.perf_counter()
pl.run_filter(ds, cfg, pl.UpdateCombo.parse("IZNOB"))
dt = time.perf_counter() - t0
print(BACKEND, len(ds.imu.t), dt)
"""


def replay(scenario: str) -> None:
    print(f"\nfull I+Z+N+B+O replay of {scenario}:")
    for backend in ("python", "cython"):
        env = dict(os.environ, ROVERNAV_BACKEND=backend)
        out = subprocess.run(
            [sys.executable, "-c", _REPLAY.format(scenario=scenario)],
            env=env, capture_output=True, text=True, check=True,
        ).stdout.split()
        name, n, dt = out[0], int(out[1]), float(out[2])
        print(f"  {name:<8} {n} IMU samples in {dt:6.2f} s  ({dt / n * 1e6:5.1f} us/sample)")


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--run", action="store_true", help="also time a full filter replay")
    ap.add_argument("--scenario", default="rough_terrain")
    args = ap.parse_args(argv)
    if _ckernels is None:
        print("compiled extension not built; timing the numpy backend only")
    micro(args.repeat)
    if args.run:
        replay(args.scenario)
    return 0


if __name__ == "__main__":
    sys.exit(main())
