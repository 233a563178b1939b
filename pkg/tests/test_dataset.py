import logging

import numpy as np
import pytest

from rovernav import pipeline, sim
from rovernav.dataset import (
    Dataset,
    ParseError,
    format_manifest,
    parse_manifest,
    read_dataset,
    read_imu,
    read_odom,
    read_truth,
    write_dataset,
)
from rovernav.errors import NonMonotoneTime, ValidationError

IMU_HEAD = "t,wx,wy,wz,fx,fy,fz\n"


@pytest.fixture(scope="module")
def small_dataset():
    scn = sim.Scenario("small", path=(sim.Line(2.0), sim.Arc(1.0, 1.0)), initial_static=2.0, slip_events=(sim.SlipEvent(4.0, 1.0, 0.5, 0.4),))
    return pipeline.simulate_dataset(scn, seed=4)


@pytest.mark.parametrize("fmt", ["mps", "counts"])
def test_round_trip_is_lossless(tmp_path, small_dataset, fmt):
    ds = small_dataset
    write_dataset(tmp_path, ds, fmt)
    back = read_dataset(tmp_path)
    for a, b in ((back.imu.t, ds.imu.t), (back.imu.gyro, ds.imu.gyro), (back.imu.accel, ds.imu.accel)):
        assert a.tobytes() == b.tobytes()
    np.testing.assert_array_equal(back.odom.t, ds.odom.t)
    np.testing.assert_allclose(back.odom.left, ds.odom.left, rtol=1e-12)
    np.testing.assert_allclose(back.odom.right, ds.odom.right, rtol=1e-12)
    assert back.truth.llh.tobytes() == ds.truth.llh.tobytes()
    assert back.truth.v.tobytes() == ds.truth.v.tobytes()
    assert {k: v for k, v in back.manifest.items() if not k.startswith("files.")} == ds.manifest


def test_manifest_path_or_directory(tmp_path, small_dataset):
    write_dataset(tmp_path, small_dataset)
    a = read_dataset(tmp_path)
    b = read_dataset(tmp_path / "manifest.cfg")
    assert a.imu.t.tobytes() == b.imu.t.tobytes()


def test_out_of_order_row_is_named(tmp_path):
    p = tmp_path / "imu.csv"
    p.write_text(IMU_HEAD + "0.00,0,0,0,0,0,-9.8\n0.01,0,0,0,0,0,-9.8\n0.005,0,0,0,0,0,-9.8\n0.02,0,0,0,0,0,-9.8\n")
    with pytest.raises(NonMonotoneTime, match=r"imu\.csv:4:"):
        read_imu(p)


def test_duplicate_stamps_dropped_with_warning(tmp_path, caplog):
    p = tmp_path / "imu.csv"
    p.write_text(IMU_HEAD + "0.00,0,0,0,0,0,-9.8\n0.01,1,0,0,0,0,-9.8\n0.01,2,0,0,0,0,-9.8\n0.02,0,0,0,0,0,-9.8\n")
    with caplog.at_level(logging.WARNING):
        imu = read_imu(p)
    assert "duplicate" in caplog.text
    np.testing.assert_array_equal(imu.t, [0.0, 0.01, 0.02])
    assert imu.gyro[1, 0] == 1.0


@pytest.mark.parametrize("pulses, mps", [(312, 0.04), (3120, 0.4), (0, 0.0), (-78, -0.01)])
def test_encoder_counts_to_speed(tmp_path, pulses, mps):
    p = tmp_path / "odom.csv"
    p.write_text(f"t,left_counts,right_counts\n0.1,{pulses},{pulses}\n0.2,{pulses},0\n")
    od = read_odom(p, 78000.0, 10.0)
    np.testing.assert_allclose(od.left, [mps, mps], rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(od.right, [mps, 0.0], rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(od.left_counts, [pulses, pulses])


@pytest.mark.parametrize(
    "body, line",
    [
        ("0.0,0,0,0,0,0,-9.8\n0.01,0,0,0,0,-9.8\n", 3),
        ("0.0,0,0,0,0,0,-9.8\nnope,0,0,0,0,0,-9.8\n", 3),
        ("0.0,0,0,0,0,0,-9.8\n0.01,0,0,0,0,0,-9.8\n0.02,0,nan,0,0,0,-9.8\n", 4),
    ],
    ids=["short-row", "text", "nan"],
)
def test_parse_error_line_numbers(tmp_path, body, line):
    p = tmp_path / "imu.csv"
    p.write_text(IMU_HEAD + body)
    with pytest.raises(ParseError, match=rf"imu\.csv:{line}:"):
        read_imu(p)


@pytest.mark.parametrize("text", ["", "t,a,b\n0,1,2\n"], ids=["empty", "wrong-header"])
def test_header_required(tmp_path, text):
    p = tmp_path / "truth.csv"
    p.write_text(text)
    with pytest.raises(ParseError, match=r":1:"):
        read_truth(p)


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError):
        read_imu(tmp_path / "absent.csv")
    with pytest.raises(ValidationError):
        read_dataset(tmp_path)


def test_manifest_parse():
    text = "# rover run\nscenario = concrete_turn\n\ngeometry.track_width = 0.555  # m\nschedule.stops = 0.0:10.0, 20.5:25.5\n"
    m = parse_manifest(text)
    assert m == {
        "scenario": "concrete_turn",
        "geometry.track_width": "0.555",
        "schedule.stops": "0.0:10.0, 20.5:25.5",
    }
    assert parse_manifest(format_manifest(m)) == m


@pytest.mark.parametrize("text, line", [("a = 1\nno equals sign\n", 2), ("bad key = 3\n", 1), (" = 3\n", 1)])
def test_manifest_errors(text, line):
    with pytest.raises(ParseError, match=rf":{line}:"):
        parse_manifest(text)


def test_manifest_missing_stream(tmp_path):
    (tmp_path / "manifest.cfg").write_text("files.imu = imu.csv\n")
    with pytest.raises(ValidationError, match="files.odom"):
        read_dataset(tmp_path)


def test_counts_need_counts(tmp_path, small_dataset):
    ds = Dataset(small_dataset.imu, sim.OdomStream(small_dataset.odom.t, small_dataset.odom.left, small_dataset.odom.right))
    with pytest.raises(ValidationError):
        write_dataset(tmp_path, ds, "counts")
