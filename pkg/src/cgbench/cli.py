"""Command line driver.

    cgbench generate --profile moderate --depth 1 --params-target 30000 --out tasks/
    cgbench train --optimizer cg --precision single --out runs/
    cgbench matrix --config matrix.json --parallelism 4 --out runs/
    cgbench report --out runs/

Exit status: 0 on success, 1 for usage or configuration errors, 2 when a run fails.

A matrix config is JSON. Top-level ``defaults`` apply to every run; runs come
either from an explicit ``runs`` list or from a ``grid``::

    {"defaults": {"params_target": 30000, "budget": 3000, "patterns": 200, "seed": 0},
     "grid": {"depth": [1, 5], "profile": ["moderate", "strong"],
              "arms": [["cg", "single"], ["cg", "double"], ["rmsprop", "single"]]}}

Recognised run keys: run_id, optimizer, precision, depth, profile, params_target,
patterns, budget, seed, init_seed, input_dim, output_dim, d, ls_tolerance,
learning_rate, decay, beta_rule.
"""

from __future__ import annotations

import argparse
import itertools
import json
import logging
import sys
from pathlib import Path

from cgbench.harness import (
    Optimizer,
    RunConfig,
    default_matrix,
    load_results,
    report,
    run_experiment,
    run_matrix,
    sized_task,
    task_label,
)
from cgbench.optim import CgConfig, NonFiniteError, RmsPropConfig
from cgbench.precision import PrecisionMode
from cgbench.storage import export_task_csv, load_task, save_params, save_task
from cgbench.taskgen import generate_task

EXIT_OK, EXIT_USAGE, EXIT_RUN = 0, 1, 2

log = logging.getLogger("cgbench")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _task_flags(p):
    p.add_argument("--profile", choices=["moderate", "strong"], default="moderate")
    p.add_argument("--depth", type=int, default=1)
    p.add_argument("--params-target", type=int, default=30_000)
    p.add_argument("--patterns", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input-dim", type=int)
    p.add_argument("--output-dim", type=int)
    p.add_argument("--d", type=float, help="nonlinearity factor (default per profile)")


def _build_parser():
    parser = _Parser(prog="cgbench", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="write a task file and its teacher weights")
    _task_flags(g)
    g.add_argument("--out", type=Path, required=True)
    g.add_argument("--csv", action="store_true", help="also export the dataset as CSV")

    t = sub.add_parser("train", help="run one optimization")
    _task_flags(t)
    t.add_argument("--task", type=Path, help="load a task file instead of generating one")
    t.add_argument("--optimizer", choices=["cg", "rmsprop"], default="cg")
    t.add_argument("--precision", choices=["single", "double"], default="double")
    t.add_argument("--budget", type=float, default=3000)
    t.add_argument("--init-seed", type=int)
    t.add_argument("--ls-tolerance", type=float, default=1e-1)
    t.add_argument("--learning-rate", type=float, default=1e-3)
    t.add_argument("--run-id")
    t.add_argument("--out", type=Path, required=True)

    m = sub.add_parser("matrix", help="run a grid of experiments")
    _task_flags(m)
    m.add_argument("--config", type=Path, help="JSON matrix description (default: desk-scale grid)")
    m.add_argument("--budget", type=float, default=3000)
    m.add_argument("--parallelism", type=int, default=1)
    m.add_argument("--out", type=Path, required=True)

    r = sub.add_parser("report", help="summarize finished runs")
    r.add_argument("--out", type=Path, required=True)
    return parser


def _task_from_args(a):
    return sized_task(a.params_target, a.depth, a.profile, patterns=a.patterns, seed=a.seed,
                      input_dim=a.input_dim, output_dim=a.output_dim, d=a.d)


def cmd_generate(a):
    spec = _task_from_args(a)
    dataset, teacher = generate_task(spec)
    a.out.mkdir(parents=True, exist_ok=True)
    stem = task_label(spec)
    save_task(a.out / f"{stem}.task", dataset, spec)
    save_params(a.out / f"{stem}.teacher", teacher, spec.config, seed=spec.seed)
    if a.csv:
        export_task_csv(a.out / f"{stem}.csv", dataset)
    print(a.out / f"{stem}.task")
    return EXIT_OK


def _optimizer_config(opt, budget, ls_tolerance=1e-1, learning_rate=1e-3, **extra):
    if opt is Optimizer.CG:
        return CgConfig(ls_tolerance=ls_tolerance, budget=budget, **extra)
    return RmsPropConfig(learning_rate=learning_rate, budget=budget, **extra)


def cmd_train(a):
    opt = Optimizer(a.optimizer)
    prec = PrecisionMode(a.precision)
    problem = None
    if a.task is not None:
        from cgbench.optim import NetworkProblem

        dataset, spec = load_task(a.task)
        problem = NetworkProblem(spec.config, dataset.astype(prec))
    else:
        spec = _task_from_args(a)
    cfg = _optimizer_config(opt, a.budget, a.ls_tolerance, a.learning_rate)
    run_id = a.run_id or f"{task_label(spec)}-{opt.value}-{prec.value}"
    rc = RunConfig(run_id, spec, opt, prec, cfg, init_seed=a.init_seed, out_dir=a.out)
    try:
        res = run_experiment(rc, problem)
    except NonFiniteError as exc:
        print(f"run {run_id} failed: {exc}", file=sys.stderr)
        return EXIT_RUN
    print(f"{run_id}: {res.reason.value}, {res.iterations} iterations, "
          f"{res.epoch_equivalents} epoch equivalents, Q={res.final_q:.6e}")
    return EXIT_OK


_RUN_KEYS = {"run_id", "optimizer", "precision", "depth", "profile", "params_target", "patterns", "budget",
             "seed", "init_seed", "input_dim", "output_dim", "d", "ls_tolerance", "learning_rate", "decay",
             "beta_rule"}


def configs_from_matrix_file(path, out_dir) -> list[RunConfig]:
    try:
        spec = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read matrix config {path}: {exc}") from exc
    defaults = spec.get("defaults", {})
    entries = list(spec.get("runs", []))
    grid = spec.get("grid")
    if grid:
        arms = grid.get("arms", [["cg", "single"], ["cg", "double"], ["rmsprop", "single"]])
        for depth, profile, (opt, prec) in itertools.product(grid.get("depth", [1]),
                                                             grid.get("profile", ["moderate"]), arms):
            entries.append({"depth": depth, "profile": profile, "optimizer": opt, "precision": prec})
    configs = []
    for entry in entries:
        e = {**defaults, **entry}
        unknown = set(e) - _RUN_KEYS
        if unknown:
            raise UsageError(f"unknown run keys: {sorted(unknown)}")
        try:
            task = sized_task(e.get("params_target", 30_000), e.get("depth", 1), e.get("profile", "moderate"),
                              patterns=e.get("patterns", 200), seed=e.get("seed", 0),
                              input_dim=e.get("input_dim"), output_dim=e.get("output_dim"), d=e.get("d"))
            opt = Optimizer(e.get("optimizer", "cg"))
            prec = PrecisionMode.parse(e.get("precision", "double"))
            extra = {}
            if opt is Optimizer.CG and "beta_rule" in e:
                extra["beta_rule"] = e["beta_rule"]
            if opt is Optimizer.RMSPROP and "decay" in e:
                extra["decay"] = e["decay"]
            cfg = _optimizer_config(opt, e.get("budget", 3000), e.get("ls_tolerance", 1e-1),
                                    e.get("learning_rate", 1e-3), **extra)
            run_id = e.get("run_id") or f"{task_label(task)}-{opt.value}-{prec.value}"
            configs.append(RunConfig(run_id, task, opt, prec, cfg, init_seed=e.get("init_seed"), out_dir=out_dir))
        except (ValueError, TypeError) as exc:
            raise UsageError(f"invalid run {entry}: {exc}") from exc
    return configs


def cmd_matrix(a):
    if a.config is not None:
        configs = configs_from_matrix_file(a.config, a.out)
    else:
        configs = default_matrix(a.out, params_target=a.params_target, budget=a.budget,
                                 patterns=a.patterns, seed=a.seed)
    a.out.mkdir(parents=True, exist_ok=True)
    try:
        results = run_matrix(configs, a.parallelism, summary_path=a.out / "summary.csv")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if results:
        print(report(results).format())
    failed = [r for r in results if not r.ok]
    for r in failed:
        print(f"FAILED {r.run_id}: {r.error}", file=sys.stderr)
    return EXIT_RUN if failed else EXIT_OK


def cmd_report(a):
    if not a.out.is_dir():
        raise UsageError(f"{a.out} is not a directory")
    results = load_results(a.out)
    if not results:
        raise UsageError(f"no run metadata found in {a.out}")
    text = report(results).format()
    (a.out / "report.txt").write_text(text + "\n")
    print(text)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "train": cmd_train, "matrix": cmd_matrix, "report": cmd_report}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * args.verbose, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"cgbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, TypeError) as exc:
        print(f"cgbench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cgbench: I/O failure: {exc}", file=sys.stderr)
        return EXIT_RUN


if __name__ == "__main__":
    sys.exit(main())
