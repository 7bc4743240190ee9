import numpy as np
import pytest

from cgbench.network import NetworkConfig, param_count
from cgbench.optim import TraceRecord
from cgbench.precision import PrecisionMode
from cgbench.storage import (
    PARAM_MAGIC,
    FormatError,
    export_task_csv,
    load_params,
    load_task,
    read_trace,
    save_params,
    save_task,
    write_trace,
)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_params_round_trip(tmp_path, dtype):
    cfg = NetworkConfig(4, 2, (3, 3))
    w = np.random.default_rng(0).normal(size=param_count(cfg)).astype(dtype)
    save_params(tmp_path / "w.bin", w, cfg, seed=9)
    w2, cfg2, header = load_params(tmp_path / "w.bin")
    assert cfg2 == cfg and header["seed"] == 9
    assert w2.dtype == dtype
    assert w2.tobytes() == w.tobytes()


def test_params_layout_is_documented(tmp_path):
    cfg = NetworkConfig(1, 1, (1,))
    save_params(tmp_path / "w.bin", np.array([1.5, -2.0]), cfg)
    raw = (tmp_path / "w.bin").read_bytes()
    assert raw[:8] == PARAM_MAGIC
    n = int.from_bytes(raw[8:12], "little")
    assert np.frombuffer(raw[12 + n:], dtype="<f8").tolist() == [1.5, -2.0]


def test_bad_magic_rejected(tmp_path):
    (tmp_path / "junk.bin").write_bytes(b"NOTMAGIC" + b"\0" * 16)
    with pytest.raises(FormatError):
        load_params(tmp_path / "junk.bin")
    with pytest.raises(FormatError):
        load_task(tmp_path / "junk.bin")


def test_task_round_trip(tmp_path, small_task):
    spec, ds, _ = small_task
    save_task(tmp_path / "t.task", ds, spec)
    ds2, spec2 = load_task(tmp_path / "t.task")
    assert spec2 == spec
    assert np.array_equal(ds2.inputs, ds.inputs) and np.array_equal(ds2.targets, ds.targets)
    assert ds2.var_y == ds.var_y and ds2.precision is PrecisionMode.DOUBLE


def test_task_csv_export(tmp_path, small_task):
    _, ds, _ = small_task
    export_task_csv(tmp_path / "t.csv", ds)
    rows = (tmp_path / "t.csv").read_text().splitlines()
    assert rows[0].split(",")[:2] == ["x0", "x1"] and rows[0].endswith("y2")
    assert len(rows) == ds.patterns + 1
    back = np.loadtxt(tmp_path / "t.csv", delimiter=",", skiprows=1)
    assert np.array_equal(back[:, :6], ds.inputs)


def test_trace_round_trip_exact(tmp_path):
    trace = [TraceRecord(0, 2, 0.1 + 0.2, 1 / 3, 1e-300, 0, 0.0),
             TraceRecord(1, 13, np.nextafter(0.3, 1.0), 2 / 7, 5e-8, 11, 0.123456789012345678)]
    write_trace(tmp_path / "r.csv", "run-a", trace)
    run_id, back = read_trace(tmp_path / "r.csv")
    assert run_id == "run-a" and back == trace


def test_trace_wrong_columns(tmp_path):
    (tmp_path / "r.csv").write_text("a,b\n1,2\n")
    with pytest.raises(FormatError):
        read_trace(tmp_path / "r.csv")
