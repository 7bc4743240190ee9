"""On-disk formats: parameter and task files, trace CSVs, run metadata.

Parameter and task files share one layout::

    offset 0   8 bytes   magic, b"CGBPARM1" (parameters) or b"CGBTASK1" (task)
    offset 8   uint32 LE length n of the header
    offset 12  n bytes   UTF-8 JSON header
    offset 12+n          body, little-endian IEEE-754 scalars, C order

Parameter header keys: ``config``, ``precision`` ("single"|"double"), ``seed``,
``count``. Body: the flat weight vector (per-layer ``(fan_out, fan_in)``
row-major matrices, input layer first).

Task header keys: ``input_dim``, ``output_dim``, ``patterns``, ``d``,
``profile``, ``seed``, ``precision``, ``var_y``, ``spec``. Body: the
``(patterns, input_dim)`` input matrix followed by the
``(patterns, output_dim)`` target matrix.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from cgbench.network import NetworkConfig, param_count
from cgbench.optim import TraceRecord
from cgbench.precision import PrecisionMode
from cgbench.taskgen import Dataset, TaskSpec

PARAM_MAGIC = b"CGBPARM1"
TASK_MAGIC = b"CGBTASK1"

TRACE_COLUMNS = (
    "run_id",
    "iteration",
    "epoch_equivalents",
    "mse",
    "q",
    "grad_norm",
    "ls_evals",
    "accepted_step",
)


class FormatError(ValueError):
    pass


def _le_dtype(mode: PrecisionMode) -> np.dtype:
    return np.dtype("<f4") if mode is PrecisionMode.SINGLE else np.dtype("<f8")


def _write_blob(path, magic: bytes, header: dict, arrays) -> None:
    head = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(magic)
        fh.write(struct.pack("<I", len(head)))
        fh.write(head)
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr).tobytes(order="C"))


def _read_blob(path, magic: bytes) -> tuple[dict, bytes]:
    data = Path(path).read_bytes()
    if data[:8] != magic:
        raise FormatError(f"{path}: bad magic {data[:8]!r}")
    (n,) = struct.unpack("<I", data[8:12])
    header = json.loads(data[12:12 + n].decode("utf-8"))
    return header, data[12 + n:]


def save_params(path, params: np.ndarray, config: NetworkConfig, seed: int | None = None) -> None:
    mode = PrecisionMode.SINGLE if params.dtype == np.float32 else PrecisionMode.DOUBLE
    header = {"config": config.to_dict(), "precision": mode.value, "seed": seed, "count": int(params.size)}
    _write_blob(path, PARAM_MAGIC, header, [params.astype(_le_dtype(mode), copy=False)])


def load_params(path) -> tuple[np.ndarray, NetworkConfig, dict]:
    header, body = _read_blob(path, PARAM_MAGIC)
    config = NetworkConfig.from_dict(header["config"])
    mode = PrecisionMode(header["precision"])
    params = np.frombuffer(body, dtype=_le_dtype(mode)).astype(mode.dtype)
    if params.size != header["count"] or params.size != param_count(config):
        raise FormatError(f"{path}: parameter count does not match the configuration")
    return params, config, header


def save_task(path, dataset: Dataset, spec: TaskSpec) -> None:
    mode = dataset.precision
    header = {
        "input_dim": spec.config.input_dim,
        "output_dim": spec.config.output_dim,
        "patterns": dataset.patterns,
        "d": spec.d,
        "profile": spec.profile.value,
        "seed": spec.seed,
        "precision": mode.value,
        "var_y": dataset.var_y,
        "spec": spec.to_dict(),
    }
    dt = _le_dtype(mode)
    _write_blob(path, TASK_MAGIC, header, [dataset.inputs.astype(dt, copy=False),
                                            dataset.targets.astype(dt, copy=False)])


def load_task(path) -> tuple[Dataset, TaskSpec]:
    header, body = _read_blob(path, TASK_MAGIC)
    mode = PrecisionMode(header["precision"])
    dt = _le_dtype(mode)
    p, n_in, n_out = header["patterns"], header["input_dim"], header["output_dim"]
    flat = np.frombuffer(body, dtype=dt).astype(mode.dtype)
    if flat.size != p * (n_in + n_out):
        raise FormatError(f"{path}: body holds {flat.size} scalars, expected {p * (n_in + n_out)}")
    inputs = flat[:p * n_in].reshape(p, n_in)
    targets = flat[p * n_in:].reshape(p, n_out)
    ds = Dataset(inputs, targets, float(header["var_y"]), int(header["seed"]), mode)
    return ds, TaskSpec.from_dict(header["spec"])


def export_task_csv(path, dataset: Dataset) -> None:
    n_in, n_out = dataset.inputs.shape[1], dataset.targets.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(n_in)] + [f"y{j}" for j in range(n_out)])
        for x, y in zip(dataset.inputs, dataset.targets):
            w.writerow([_exact(v) for v in x] + [_exact(v) for v in y])


def _exact(x) -> str:
    # shortest repr that round-trips; float() strips numpy scalar wrappers
    return repr(float(x))


def write_trace(path, run_id: str, trace: list[TraceRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_COLUMNS)
        for r in trace:
            w.writerow([run_id, int(r.iteration), int(r.epoch_equivalents), _exact(r.mse), _exact(r.q),
                        _exact(r.grad_norm), int(r.ls_evals), _exact(r.accepted_step)])


def read_trace(path) -> tuple[str | None, list[TraceRecord]]:
    run_id = None
    records = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != TRACE_COLUMNS:
            raise FormatError(f"{path}: unexpected trace columns {reader.fieldnames}")
        for row in reader:
            run_id = row["run_id"]
            records.append(TraceRecord(
                int(row["iteration"]),
                int(row["epoch_equivalents"]),
                float(row["mse"]),
                float(row["q"]),
                float(row["grad_norm"]),
                int(row["ls_evals"]),
                float(row["accepted_step"]),
            ))
    return run_id, records


def write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())
