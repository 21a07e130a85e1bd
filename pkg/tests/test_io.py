"""File-format tests: exact round trips and line-numbered error reporting."""

import numpy as np
import pytest

from epiabc.io import (
    CONTACT_TRACING,
    SCREENING,
    DetectionDataset,
    config_hash,
    detections_from_path,
    ingest_detections,
    read_path,
    read_table,
    write_detections,
    write_path,
    write_table,
)
from epiabc.model import PopulationState, initial_state
from epiabc.simulate import simulate


def test_detection_dataset_sorts_and_validates():
    ds = DetectionDataset(times=[2.0, 0.5, 1.0], modes=[1, 0, 0], horizon=3.0)
    assert np.array_equal(ds.times, [0.5, 1.0, 2.0])
    assert np.array_equal(ds.modes, [0, 0, 1])
    assert len(ds) == 3
    with pytest.raises(ValueError, match="equal length"):
        DetectionDataset(times=[1.0], modes=[0, 1], horizon=2.0)
    with pytest.raises(ValueError, match="modes must be"):
        DetectionDataset(times=[1.0], modes=[7], horizon=2.0)
    with pytest.raises(ValueError, match="lie in"):
        DetectionDataset(times=[5.0], modes=[0], horizon=2.0)


def test_detection_dataset_counting_paths():
    ds = DetectionDataset(times=[0.5, 1.0, 2.0], modes=[0, 1, 0], horizon=3.0)
    screen, traced = ds.counting_paths()
    assert screen.evaluate(np.array([3.0]))[0] == 2
    assert traced.evaluate(np.array([3.0]))[0] == 1


def test_detections_round_trip_is_exact(tmp_path):
    times = np.array([0.1234567890123456, 0.5, 2.000000000000001])
    ds = DetectionDataset(times=times, modes=[0, 1, 0], horizon=2.000000000000001)
    file = tmp_path / "det.csv"
    write_detections(ds, file)
    again = ingest_detections(file)
    assert np.array_equal(again.times, ds.times)   # bitwise, thanks to repr
    assert np.array_equal(again.modes, ds.modes)
    assert again.horizon == ds.horizon


def test_ingest_detections_error_reporting(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("time,mode\n0.5,screening\nnope,screening\n")
    with pytest.raises(ValueError, match=r"bad\.csv:3: bad time"):
        ingest_detections(f)
    f.write_text("time,mode\n0.5,phone_call\n")
    with pytest.raises(ValueError, match=r"bad\.csv:2: bad mode"):
        ingest_detections(f)
    f.write_text("time,mode\n0.5,screening,extra\n")
    with pytest.raises(ValueError, match="expected 2 fields"):
        ingest_detections(f)
    f.write_text("when,how\n")
    with pytest.raises(ValueError, match="expected header"):
        ingest_detections(f)


def test_ingest_detections_sorts_with_notice(tmp_path):
    f = tmp_path / "unsorted.csv"
    f.write_text("time,mode\n2.0,screening\n1.0,contact_tracing\n")
    with pytest.warns(UserWarning, match="not sorted"):
        ds = ingest_detections(f)
    assert np.array_equal(ds.times, [1.0, 2.0])
    assert ds.modes[0] == CONTACT_TRACING and ds.modes[1] == SCREENING


def test_ingest_empty_dataset(tmp_path):
    f = tmp_path / "empty.csv"
    f.write_text("time,mode\n")
    ds = ingest_detections(f, horizon=4.0)
    assert len(ds) == 0 and ds.horizon == 4.0


def test_write_table_round_trip_preserves_dtypes(tmp_path):
    f = tmp_path / "table.tsv"
    cols = {
        "x": np.array([1.5, np.pi, 1e-300]),
        "n": np.array([1, -2, 3], np.int64),
        "u": np.array([7, 8, 9], np.uint64),
        "flag": np.array([True, False, True]),
        "name": np.array(["alpha", "beta", "gamma"]),
    }
    write_table(f, {"run": "demo", "seed": 42}, cols)
    meta, again = read_table(f)
    assert meta["run"] == "demo" and meta["seed"] == "42"
    for key in cols:
        assert again[key].dtype == np.asarray(cols[key]).dtype or key == "name"
        assert np.array_equal(again[key], cols[key])
    # repr-based float cells survive exactly, including subnormal-range values
    assert again["x"][2] == 1e-300


def test_write_table_validation(tmp_path):
    f = tmp_path / "t.tsv"
    with pytest.raises(ValueError, match="equal length"):
        write_table(f, {}, {"a": np.ones(2), "b": np.ones(3)})
    with pytest.raises(ValueError, match="whitespace"):
        write_table(f, {}, {"a": np.array(["two words"])})
    with pytest.raises(ValueError, match="single-line"):
        write_table(f, {"k": "line\nbreak"}, {"a": np.ones(1)})
    f.write_text("not a table\n")
    with pytest.raises(ValueError, match="not an epiabc table"):
        read_table(f)


def test_config_hash_is_order_invariant():
    a = config_hash({"x": 1, "y": "two"})
    b = config_hash({"y": "two", "x": 1})
    assert a == b and len(a) == 16
    assert config_hash({"x": 2, "y": "two"}) != a


def test_path_round_trip_bitwise(tmp_path, ct_params):
    init = initial_state(S0=50, I0=3)
    path = simulate(ct_params, init, horizon=4.0, seed=123)
    assert path.times.size > 0
    file = tmp_path / "path.tsv"
    write_path(path, file)
    again = read_path(file)
    assert again.params == path.params
    assert np.array_equal(again.times, path.times)
    assert np.array_equal(again.kinds, path.kinds)
    assert np.array_equal(again.ids, path.ids)
    assert np.array_equal(again.infection_times, path.infection_times)
    assert np.array_equal(again.detection_times, path.detection_times,
                          equal_nan=True)
    assert np.array_equal(again.detection_kinds, path.detection_kinds)
    assert again.horizon == path.horizon and again.seed == path.seed
    assert again.truncated == path.truncated
    fs, ft = again.final, path.final
    assert (fs.S, fs.I, fs.R1, fs.R2) == (ft.S, ft.I, ft.R1, ft.R2)
    assert np.array_equal(np.sort(fs.detection_times), np.sort(ft.detection_times))


def test_path_round_trip_with_initial_detections(tmp_path, ct_params):
    init = PopulationState(t=1.0, S=20, I=2, R1=1, R2=1,
                           detection_times=[0.25, 0.75])
    path = simulate(ct_params, init, horizon=3.0, seed=7)
    file = tmp_path / "path.tsv"
    write_path(path, file)
    again = read_path(file)
    assert np.array_equal(again.init.detection_times, path.init.detection_times)
    assert np.array_equal(again.times, path.times)
    assert again.final.R1 == path.final.R1
    assert again.final.R2 == path.final.R2


def test_read_path_rejects_other_tables(tmp_path):
    f = tmp_path / "t.tsv"
    write_table(f, {"format": "something-else"}, {"a": np.ones(1)})
    with pytest.raises(ValueError, match="not an epidemic path"):
        read_path(f)


def test_detections_from_path_counts(ct_params):
    path = simulate(ct_params, initial_state(S0=60, I0=4), horizon=5.0, seed=2)
    ds = detections_from_path(path)
    assert len(ds) == path.final.R1 + path.final.R2
    assert int(np.sum(ds.modes == SCREENING)) == path.final.R1
    assert int(np.sum(ds.modes == CONTACT_TRACING)) == path.final.R2
    assert ds.horizon == path.horizon - path.init.t
