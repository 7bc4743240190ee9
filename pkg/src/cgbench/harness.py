"""Experiment runs, run matrices, and their evaluation.

Bookkeeping (Q, output variance, segment fits) is always done in double
precision; only the optimization itself runs in the requested precision.
"""

from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import enum
import itertools
import logging
import math
import time
import warnings
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

import cgbench
from cgbench.network import param_count
from cgbench.optim import (
    CgConfig,
    NetworkProblem,
    NonFiniteError,
    RmsPropConfig,
    TerminationReason,
    TraceRecord,
    cg_minimize,
    rmsprop_minimize,
)
from cgbench.precision import PrecisionMode
from cgbench.storage import read_json, read_trace, write_json, write_trace
from cgbench.taskgen import PRNG_NAME, Dataset, Profile, TaskSpec, generate_task, initial_params

log = logging.getLogger(__name__)

SIGNIFICANCE_FACTOR = 10.0
# geometry of the largest configurations (4000 inputs, 2000 outputs, 4.08M parameters)
_REF_INPUTS, _REF_OUTPUTS, _REF_PARAMS = 4000, 2000, 4_080_000


class Optimizer(str, enum.Enum):
    CG = "cg"
    RMSPROP = "rmsprop"


def q_metric(mse: float, var_y: float) -> float:
    """Final MSE relative to the output variance, i.e. ``1 - R^2``."""
    if not var_y > 0:
        raise ValueError("output variance must be positive; the task is degenerate")
    return float(mse) / float(var_y)


def hidden_width_for(params_target: int, input_dim: int, output_dim: int, depth: int) -> int:
    """Largest equal hidden width whose parameter count does not exceed the target."""
    if depth < 1:
        raise ValueError("depth must be >= 1")

    def count(h):
        return h * (input_dim + output_dim) + (depth - 1) * h * h

    if depth == 1:
        h = params_target // (input_dim + output_dim)
    else:
        a, b = depth - 1, input_dim + output_dim
        h = int((-b + math.sqrt(b * b + 4 * a * params_target)) / (2 * a))
    while count(h + 1) <= params_target:
        h += 1
    while h > 1 and count(h) > params_target:
        h -= 1
    return max(h, 1)


def default_dims(params_target: int) -> tuple[int, int]:
    """Input/output sizes scaled down from the 4000/2000 reference geometry."""
    s = math.sqrt(params_target / _REF_PARAMS)
    return max(1, round(_REF_INPUTS * s)), max(1, round(_REF_OUTPUTS * s))


def sized_task(
    params_target: int = 30_000,
    depth: int = 1,
    profile: Profile | str = Profile.MODERATE,
    *,
    patterns: int = 200,
    seed: int = 0,
    input_dim: int | None = None,
    output_dim: int | None = None,
    d: float | None = None,
) -> TaskSpec:
    dims = default_dims(params_target)
    n_in = input_dim or dims[0]
    n_out = output_dim or dims[1]
    h = hidden_width_for(params_target, n_in, n_out, depth)
    return TaskSpec.build(n_in, n_out, [h] * depth, profile, d=d, patterns=patterns, seed=seed)


def task_label(spec: TaskSpec) -> str:
    depth = len(spec.config.hidden_sizes)
    return f"{spec.profile.value}-{depth}h-{param_count(spec.config)}p-s{spec.seed}"


@dataclasses.dataclass(frozen=True)
class RunConfig:
    run_id: str
    task: TaskSpec
    optimizer: Optimizer = Optimizer.CG
    precision: PrecisionMode = PrecisionMode.DOUBLE
    optimizer_config: CgConfig | RmsPropConfig | None = None
    init_seed: int | None = None  # None: task seed + 1
    out_dir: Path | None = None

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        object.__setattr__(self, "precision", PrecisionMode.parse(self.precision))
        if self.optimizer_config is None:
            cfg = CgConfig() if self.optimizer is Optimizer.CG else RmsPropConfig()
            object.__setattr__(self, "optimizer_config", cfg)
        expected = CgConfig if self.optimizer is Optimizer.CG else RmsPropConfig
        if not isinstance(self.optimizer_config, expected):
            raise TypeError(f"{self.optimizer.value} needs a {expected.__name__}")
        if self.init_seed is None:
            object.__setattr__(self, "init_seed", self.task.seed + 1)
        if self.init_seed == self.task.seed:
            raise ValueError("init_seed must differ from the task seed")
        if self.out_dir is not None:
            object.__setattr__(self, "out_dir", Path(self.out_dir))

    def to_dict(self) -> dict:
        cfg = dataclasses.asdict(self.optimizer_config)
        cfg = {k: (v.value if isinstance(v, enum.Enum) else v) for k, v in cfg.items()}
        return {
            "run_id": self.run_id,
            "task": self.task.to_dict(),
            "task_label": task_label(self.task),
            "optimizer": self.optimizer.value,
            "optimizer_config": cfg,
            "precision": self.precision.value,
            "init_seed": self.init_seed,
        }


@dataclasses.dataclass
class RunResult:
    run_id: str
    task: str
    optimizer: str
    precision: str
    final_q: float = math.nan
    final_mse: float = math.nan
    initial_q: float = math.nan
    var_y: float = math.nan
    reason: TerminationReason | None = None
    iterations: int = 0
    epoch_equivalents: int = 0
    trace_path: Path | None = None
    wall_time: float = 0.0
    error: str | None = None
    trace: list[TraceRecord] | None = dataclasses.field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return self.error is None

    def summary_row(self) -> dict:
        return {
            "run_id": self.run_id,
            "task": self.task,
            "optimizer": self.optimizer,
            "precision": self.precision,
            "final_q": self.final_q,
            "final_mse": self.final_mse,
            "initial_q": self.initial_q,
            "reason": self.reason.value if self.reason else "",
            "iterations": self.iterations,
            "epoch_equivalents": self.epoch_equivalents,
            "wall_time": self.wall_time,
            "error": self.error or "",
        }


def _paths(rc: RunConfig):
    return rc.out_dir / f"{rc.run_id}.trace.csv", rc.out_dir / f"{rc.run_id}.meta.json"


def prepare_run(rc: RunConfig) -> tuple[NetworkProblem, np.ndarray, Dataset]:
    """Generate the task in double and hand back the problem in run precision."""
    dataset, _ = generate_task(rc.task)
    w0 = initial_params(rc.task.config, rc.task.d, rc.init_seed, teacher_seed=rc.task.seed)
    problem = NetworkProblem(rc.task.config, dataset.astype(rc.precision))
    return problem, w0, dataset


def run_experiment(rc: RunConfig, problem: NetworkProblem | None = None, w0: np.ndarray | None = None) -> RunResult:
    """Run one optimization and write its trace and metadata.

    ``problem``/``w0`` override the generated task, e.g. for a loaded task file
    or a hand-built dataset; the problem must already be in run precision.
    """
    if problem is None:
        problem, w0_gen, _ = prepare_run(rc)
        w0 = w0_gen if w0 is None else w0
    elif w0 is None:
        w0 = initial_params(problem.config, rc.task.d, rc.init_seed, teacher_seed=rc.task.seed)

    meta = rc.to_dict()
    meta.update({
        "prng": PRNG_NAME,
        "software_version": cgbench.__version__,
        "numpy_version": np.__version__,
        "var_y": problem.var_y,
        "param_count": problem.size,
        "patterns": problem.dataset.patterns,
    })
    result = RunResult(rc.run_id, task_label(rc.task), rc.optimizer.value, rc.precision.value,
                       var_y=problem.var_y)
    if rc.out_dir is not None:
        rc.out_dir.mkdir(parents=True, exist_ok=True)
        trace_path, meta_path = _paths(rc)

    minimize = cg_minimize if rc.optimizer is Optimizer.CG else rmsprop_minimize
    start = time.perf_counter()
    try:
        opt = minimize(problem, w0, rc.optimizer_config, rc.precision)
    except NonFiniteError as exc:
        result.wall_time = time.perf_counter() - start
        result.error = f"NonFiniteError: {exc}"
        meta.update(error=result.error, termination_reason=None, wall_time=result.wall_time)
        if rc.out_dir is not None:
            write_json(meta_path, meta)
        raise
    result.wall_time = time.perf_counter() - start

    last = opt.trace[-1]
    result.trace = opt.trace
    result.reason = opt.reason
    result.final_mse = last.mse
    result.final_q = q_metric(last.mse, problem.var_y)
    result.initial_q = q_metric(opt.trace[0].mse, problem.var_y)
    result.iterations = last.iteration
    result.epoch_equivalents = last.epoch_equivalents

    meta.update({
        "termination_reason": opt.reason.value,
        "optimizer_info": opt.info,
        "final_mse": result.final_mse,
        "final_q": result.final_q,
        "initial_q": result.initial_q,
        "iterations": result.iterations,
        "epoch_equivalents": result.epoch_equivalents,
        "wall_time": result.wall_time,
        "error": None,
    })
    if rc.out_dir is not None:
        write_trace(trace_path, rc.run_id, opt.trace)
        meta["trace_file"] = trace_path.name
        write_json(meta_path, meta)
        result.trace_path = trace_path
    log.info("%s: %s after %d iterations, Q=%.3e", rc.run_id, opt.reason.value, result.iterations,
             result.final_q)
    return result


def _sort_key(r: RunResult):
    return (r.task, r.optimizer, r.precision, r.run_id)


def _safe_run(rc: RunConfig) -> RunResult:
    try:
        return run_experiment(rc)
    except Exception as exc:  # one failed run must not abort the matrix
        log.error("run %s failed: %s", rc.run_id, exc)
        return RunResult(rc.run_id, task_label(rc.task), rc.optimizer.value, rc.precision.value,
                         error=f"{type(exc).__name__}: {exc}")


def run_matrix(configs: Sequence[RunConfig], parallelism: int = 1, summary_path=None) -> list[RunResult]:
    ids = [rc.run_id for rc in configs]
    dupes = {i for i in ids if ids.count(i) > 1}
    if dupes:
        raise ValueError(f"duplicate run ids: {sorted(dupes)}")
    if parallelism <= 1:
        results = [_safe_run(rc) for rc in configs]
    else:
        with concurrent.futures.ThreadPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_safe_run, configs))
    results.sort(key=_sort_key)
    if summary_path is not None:
        write_summary(summary_path, results)
    return results


def default_matrix(
    out_dir=None,
    *,
    params_target: int = 30_000,
    depths: Iterable[int] = (1, 5),
    profiles: Iterable[Profile | str] = (Profile.MODERATE, Profile.STRONG),
    budget: float = 3000,
    patterns: int = 200,
    seed: int = 0,
) -> list[RunConfig]:
    """CG in single and double, RMSprop in single, for every depth and profile."""
    arms = [(Optimizer.CG, PrecisionMode.SINGLE), (Optimizer.CG, PrecisionMode.DOUBLE),
            (Optimizer.RMSPROP, PrecisionMode.SINGLE)]
    configs = []
    for depth, profile in itertools.product(depths, profiles):
        task = sized_task(params_target, depth, profile, patterns=patterns, seed=seed)
        for opt, prec in arms:
            cfg = CgConfig(budget=budget) if opt is Optimizer.CG else RmsPropConfig(budget=budget)
            run_id = f"{task_label(task)}-{opt.value}-{prec.value}"
            configs.append(RunConfig(run_id, task, opt, prec, cfg, out_dir=out_dir))
    return configs


# --- evaluation -------------------------------------------------------------


@dataclasses.dataclass(frozen=True)
class SegmentFit:
    start: float
    stop: float
    slope_per_1000: float
    r2: float
    points: int


def superlinearity_diagnostic(trace: Sequence[TraceRecord], start: float = -math.inf,
                              stop: float = math.inf) -> SegmentFit:
    """Least-squares line through ``(epoch_equivalents, log10 Q)`` on a segment.

    A good straight-line fit on the log scale means every iteration multiplies
    the remaining error by a roughly constant factor.
    """
    sel = [r for r in trace if start <= r.epoch_equivalents <= stop]
    keep = [r for r in sel if r.q > 0]
    if len(keep) < len(sel):
        warnings.warn(f"excluded {len(sel) - len(keep)} records with Q <= 0 from the fit", stacklevel=2)
    if len(keep) < 3:
        raise ValueError("need at least three records with Q > 0 in the segment")
    x = np.array([r.epoch_equivalents for r in keep], dtype=np.float64)
    y = np.log10(np.array([r.q for r in keep], dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    r2 = 1.0 if np.ptp(y) == 0.0 else min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    lo = float(x[0]) if math.isinf(start) else start
    hi = float(x[-1]) if math.isinf(stop) else stop
    return SegmentFit(lo, hi, float(slope) * 1000.0, r2, len(keep))


@dataclasses.dataclass(frozen=True)
class Comparison:
    task: str
    kind: str
    arm_a: str
    arm_b: str
    q_a: float | None
    q_b: float | None
    ratio: float | None  # larger Q over smaller Q; None when an arm is missing
    significant: bool | None


def q_ratio(q_a: float, q_b: float) -> float:
    lo, hi = sorted((q_a, q_b))
    if hi == 0:
        return 1.0
    if lo == 0:
        return math.inf
    return hi / lo


def is_significant(q_a: float, q_b: float, factor: float = SIGNIFICANCE_FACTOR) -> bool:
    """An order of magnitude or more counts; factors of two or three do not."""
    return q_ratio(q_a, q_b) >= factor


_COMPARISONS = [
    ("single_vs_double", ("cg", "single"), ("cg", "double")),
    ("single_vs_double", ("rmsprop", "single"), ("rmsprop", "double")),
    ("cg_vs_rmsprop", ("cg", "single"), ("rmsprop", "single")),
    ("cg_vs_rmsprop", ("cg", "double"), ("rmsprop", "double")),
    ("cg_vs_rmsprop", ("cg", "double"), ("rmsprop", "single")),
]


@dataclasses.dataclass
class Report:
    rows: list[dict]
    comparisons: list[Comparison]

    def format(self) -> str:
        lines = [f"{'run_id':48s} {'reason':28s} {'iter':>6s} {'epochs':>7s} {'final Q':>11s}"]
        for r in self.rows:
            q = f"{r['final_q']:.3e}" if r["error"] == "" else "FAILED"
            lines.append(f"{r['run_id']:48s} {r['reason']:28s} {r['iterations']:>6d} "
                         f"{r['epoch_equivalents']:>7d} {q:>11s}")
        lines.append("")
        for c in self.comparisons:
            a, b = f"{c.arm_a}", f"{c.arm_b}"
            if c.ratio is None:
                verdict = "unavailable"
            else:
                verdict = f"ratio {c.ratio:.3g} ({'significant' if c.significant else 'not significant'})"
            lines.append(f"{c.task}: {a} vs {b}: {verdict}")
        return "\n".join(lines)


def report(results: Sequence[RunResult]) -> Report:
    if not results:
        raise ValueError("report needs at least one result")
    rows = [r.summary_row() for r in sorted(results, key=_sort_key)]
    by_task: dict[str, dict[tuple[str, str], RunResult]] = {}
    for r in results:
        if r.ok:
            by_task.setdefault(r.task, {})[(r.optimizer, r.precision)] = r
    comparisons = []
    for task in sorted(by_task):
        arms = by_task[task]
        for kind, a, b in _COMPARISONS:
            ra, rb = arms.get(a), arms.get(b)
            if ra is None and rb is None:
                continue
            qa = ra.final_q if ra else None
            qb = rb.final_q if rb else None
            if ra and rb:
                ratio, sig = q_ratio(qa, qb), is_significant(qa, qb)
            else:
                ratio, sig = None, None
            comparisons.append(Comparison(task, kind, "-".join(a), "-".join(b), qa, qb, ratio, sig))
    return Report(rows, comparisons)


SUMMARY_COLUMNS = list(RunResult("", "", "", "").summary_row())


def write_summary(path, results: Sequence[RunResult]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in sorted(results, key=_sort_key):
            w.writerow(r.summary_row())


def load_results(out_dir) -> list[RunResult]:
    """Rebuild results from the metadata files in ``out_dir``."""
    results = []
    for meta_path in sorted(Path(out_dir).glob("*.meta.json")):
        meta = read_json(meta_path)
        r = RunResult(meta["run_id"], meta["task_label"], meta["optimizer"], meta["precision"],
                      var_y=meta.get("var_y", math.nan), error=meta.get("error"))
        if r.ok:
            trace_path = meta_path.with_name(meta["trace_file"])
            _, trace = read_trace(trace_path)
            r.trace, r.trace_path = trace, trace_path
            r.reason = TerminationReason(meta["termination_reason"])
            r.final_mse = trace[-1].mse
            r.final_q = q_metric(trace[-1].mse, r.var_y)
            r.initial_q = q_metric(trace[0].mse, r.var_y)
            r.iterations = trace[-1].iteration
            r.epoch_equivalents = trace[-1].epoch_equivalents
            r.wall_time = meta.get("wall_time", 0.0)
        results.append(r)
    return results
