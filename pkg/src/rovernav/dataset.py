"""
Dataset files: three headed CSVs plus a flat ``key = value`` manifest.

``imu.csv``    t, wx, wy, wz, fx, fy, fz
``odom.csv``   t, left_mps, right_mps   (or t, left_counts, right_counts)
``truth.csv``  t, lat_rad, lon_rad, h_m, roll, pitch, yaw, vN, vE, vD
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.typing import NDArray

from .errors import NonMonotoneTime, ParseError, ValidationError
from .sim import ENCODER_RESOLUTION, ImuStream, OdomStream

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.cfg"
IMU_HEADER = ("t", "wx", "wy", "wz", "fx", "fy", "fz")
ODOM_MPS_HEADER = ("t", "left_mps", "right_mps")
ODOM_COUNTS_HEADER = ("t", "left_counts", "right_counts")
TRUTH_HEADER = ("t", "lat_rad", "lon_rad", "h_m", "roll", "pitch", "yaw", "vN", "vE", "vD")


@dataclass
class TruthTable:
    t: NDArray[np.float64]
    llh: NDArray[np.float64]
    euler: NDArray[np.float64]
    v: NDArray[np.float64]

    def __len__(self) -> int:
        return len(self.t)

    @classmethod
    def from_trajectory(cls, tr) -> TruthTable:
        return cls(tr.t.copy(), tr.llh.copy(), tr.euler.copy(), tr.v.copy())


@dataclass
class Dataset:
    imu: ImuStream
    odom: OdomStream
    truth: TruthTable | None = None
    manifest: dict[str, str] = field(default_factory=dict)


# manifest ---------------------------------------------------------------------


def parse_manifest(text: str, source: str = "<manifest>") -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key or any(c.isspace() for c in key):
            raise ParseError(f"{source}:{lineno}: expected 'key = value'")
        out[key] = value.strip()
    return out


def format_manifest(entries: dict[str, str]) -> str:
    width = max((len(k) for k in entries), default=0)
    return "".join(f"{k:<{width}} = {v}\n" for k, v in entries.items())


# csv --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def write_csv(path: Path, header, columns) -> None:
    cols = [np.asarray(c) for c in columns]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in zip(*cols):
            w.writerow([_fmt(x) if isinstance(x, float | np.floating) else int(x) for x in row])


def read_csv(path: Path, headers) -> tuple[tuple[str, ...], NDArray[np.float64]]:
    """Read a headed numeric CSV; ``headers`` lists the accepted header tuples."""
    path = Path(path)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot open {path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = tuple(h.strip() for h in next(reader))
        except StopIteration:
            raise ParseError(f"{path}:1: missing header") from None
        if header not in headers:
            raise ParseError(f"{path}:1: unexpected header {','.join(header)}")
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(rec)}")
            try:
                vals = [float(x) for x in rec]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            rows.append(vals)
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return header, data


def _check_time(path, t) -> NDArray[np.bool_]:
    """Raise on regressions; return a mask that drops duplicate stamps."""
    d = np.diff(t)
    bad = np.nonzero(d < 0)[0]
    if bad.size:
        row = int(bad[0]) + 3  # header is line 1, data starts at 2
        raise NonMonotoneTime(f"{path}:{row}: timestamp {t[bad[0] + 1]!r} precedes {t[bad[0]]!r}")
    keep = np.ones(len(t), dtype=bool)
    dup = np.nonzero(d == 0)[0] + 1
    if dup.size:
        log.warning("%s: dropped %d duplicate timestamps", path, dup.size)
        keep[dup] = False
    return keep


def read_imu(path) -> ImuStream:
    _, a = read_csv(path, (IMU_HEADER,))
    keep = _check_time(path, a[:, 0])
    a = a[keep]
    return ImuStream(a[:, 0].copy(), a[:, 1:4].copy(), a[:, 4:7].copy())


def read_odom(path, encoder_resolution: float = ENCODER_RESOLUTION, rate: float = 10.0) -> OdomStream:
    """Wheel speeds in m/s; encoder counts per tick are converted with ``encoder_resolution``."""
    header, a = read_csv(path, (ODOM_MPS_HEADER, ODOM_COUNTS_HEADER))
    keep = _check_time(path, a[:, 0])
    a = a[keep]
    t = a[:, 0].copy()
    if header == ODOM_MPS_HEADER:
        return OdomStream(t, a[:, 1].copy(), a[:, 2].copy())
    dt = np.empty_like(t)
    dt[0] = 1.0 / rate
    dt[1:] = np.diff(t)
    counts = a[:, 1:3].astype(np.int64)
    return OdomStream(
        t,
        counts[:, 0] / (encoder_resolution * dt),
        counts[:, 1] / (encoder_resolution * dt),
        counts[:, 0],
        counts[:, 1],
    )


def read_truth(path) -> TruthTable:
    _, a = read_csv(path, (TRUTH_HEADER,))
    keep = _check_time(path, a[:, 0])
    a = a[keep]
    return TruthTable(a[:, 0].copy(), a[:, 1:4].copy(), a[:, 4:7].copy(), a[:, 7:10].copy())


def write_dataset(directory, ds: Dataset, odom_format: str = "mps") -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_csv(d / "imu.csv", IMU_HEADER, [ds.imu.t, *ds.imu.gyro.T, *ds.imu.accel.T])
    if odom_format == "counts":
        if ds.odom.left_counts is None:
            raise ValidationError("odometry stream carries no encoder counts")
        write_csv(d / "odom.csv", ODOM_COUNTS_HEADER, [ds.odom.t, ds.odom.left_counts, ds.odom.right_counts])
    else:
        write_csv(d / "odom.csv", ODOM_MPS_HEADER, [ds.odom.t, ds.odom.left, ds.odom.right])
    manifest = dict(ds.manifest)
    manifest["files.imu"] = "imu.csv"
    manifest["files.odom"] = "odom.csv"
    if ds.truth is not None:
        tr = ds.truth
        write_csv(d / "truth.csv", TRUTH_HEADER, [tr.t, *tr.llh.T, *tr.euler.T, *tr.v.T])
        manifest["files.truth"] = "truth.csv"
    (d / MANIFEST_NAME).write_text(format_manifest(manifest), encoding="utf-8")
    return d


def read_dataset(path) -> Dataset:
    """Load a dataset from its directory or manifest path."""
    p = Path(path)
    mpath = p / MANIFEST_NAME if p.is_dir() else p
    try:
        text = mpath.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read manifest {mpath}: {exc.strerror}") from None
    m = parse_manifest(text, str(mpath))
    root = mpath.parent
    for key in ("files.imu", "files.odom"):
        if key not in m:
            raise ValidationError(f"{mpath}: missing '{key}'")
    res = float(m.get("odom.encoder_resolution", ENCODER_RESOLUTION))
    rate = float(m.get("rates.odom", 10.0))
    imu = read_imu(root / m["files.imu"])
    odom = read_odom(root / m["files.odom"], res, rate)
    truth = read_truth(root / m["files.truth"]) if "files.truth" in m else None
    return Dataset(imu, odom, truth, m)
