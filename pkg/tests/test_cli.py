import json
import subprocess
import sys

import pytest

from cgbench.cli import main
from cgbench.storage import load_params, load_task, read_trace

SMALL = ["--params-target", "1500", "--patterns", "30", "--seed", "2"]


def test_generate(tmp_path, capsys):
    assert main(["generate", *SMALL, "--out", str(tmp_path), "--csv"]) == 0
    task_file = capsys.readouterr().out.strip()
    ds, spec = load_task(task_file)
    assert ds.patterns == 30 and spec.seed == 2
    teacher, cfg, _ = load_params(task_file.replace(".task", ".teacher"))
    assert cfg == spec.config
    assert len(list(tmp_path.glob("*.csv"))) == 1


def test_train_generated_and_loaded(tmp_path, capsys):
    assert main(["train", *SMALL, "--optimizer", "cg", "--precision", "single", "--budget", "50",
                 "--run-id", "one", "--out", str(tmp_path)]) == 0
    assert "one:" in capsys.readouterr().out
    _, trace = read_trace(tmp_path / "one.trace.csv")
    assert trace[-1].epoch_equivalents <= 50 + 60

    main(["generate", *SMALL, "--out", str(tmp_path / "t")])
    task_file = capsys.readouterr().out.strip()
    assert main(["train", "--task", task_file, "--optimizer", "rmsprop", "--budget", "20",
                 "--run-id", "two", "--out", str(tmp_path)]) == 0
    _, trace = read_trace(tmp_path / "two.trace.csv")
    assert len(trace) == 10


def test_matrix_config_and_report(tmp_path, capsys):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({
        "defaults": {"params_target": 1500, "patterns": 30, "budget": 40},
        "grid": {"depth": [1], "profile": ["moderate"]},
    }))
    out = tmp_path / "runs"
    assert main(["matrix", "--config", str(cfg), "--parallelism", "2", "--out", str(out)]) == 0
    assert len(list(out.glob("*.trace.csv"))) == 3 and (out / "summary.csv").exists()
    capsys.readouterr()
    assert main(["report", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "single_vs_double" not in text and "cg-double vs rmsprop-single" in text
    assert (out / "report.txt").exists()


def test_matrix_empty_config(tmp_path):
    cfg = tmp_path / "m.json"
    cfg.write_text(json.dumps({"runs": []}))
    assert main(["matrix", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "summary.csv").read_text().count("\n") == 1


@pytest.mark.parametrize("argv", [
    ["train", "--out", "x", "--precision", "quad"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_1(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_config_errors_exit_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"runs": [{"optimizer": "cg", "colour": "red"}]}))
    assert main(["matrix", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["matrix", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert main(["report", "--out", str(tmp_path / "nothing")]) == 1


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_failure_exit_2(tmp_path):
    # a huge learning rate drives RMSprop to overflow, which is a run failure
    assert main(["train", *SMALL, "--optimizer", "rmsprop", "--learning-rate", "1e30",
                 "--budget", "200", "--precision", "single", "--out", str(tmp_path)]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "cgbench", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "generate" in proc.stdout
