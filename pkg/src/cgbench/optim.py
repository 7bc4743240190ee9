"""Nonlinear conjugate gradient with Brent line search, and full-batch RMSprop.

Cost is tracked in epoch equivalents: one forward pass over the training set
costs 1, a forward plus backward pass costs 2. Both optimizers stop at the
first iteration boundary where the budget is used up.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
import math
from typing import Optional

import numpy as np

from cgbench.linesearch import DEFAULT_TOLERANCE, LineSearchStatus, line_search
from cgbench.network import EvaluatedBatch, NetworkConfig, gradient, mse, param_count
from cgbench.precision import PrecisionMode, default_gradient_threshold, demote
from cgbench.taskgen import Dataset

log = logging.getLogger(__name__)

DEFAULT_BUDGET = 3000


class TerminationReason(str, enum.Enum):
    GRADIENT_CONVERGED = "gradient_converged"
    LINE_SEARCH_NO_IMPROVEMENT = "line_search_no_improvement"
    BUDGET_EXHAUSTED = "budget_exhausted"


class BetaRule(str, enum.Enum):
    POLAK_RIBIERE_PLUS = "polak_ribiere_plus"
    FLETCHER_REEVES = "fletcher_reeves"


class NonFiniteError(RuntimeError):
    """Loss or gradient became NaN/inf; the run cannot continue."""


@dataclasses.dataclass
class Budget:
    limit: float = DEFAULT_BUDGET
    spent: int = 0

    def charge(self, batch: EvaluatedBatch) -> None:
        self.spent += batch.epoch_equivalents_charged

    @property
    def exhausted(self) -> bool:
        return self.spent >= self.limit


@dataclasses.dataclass(frozen=True)
class CgConfig:
    gradient_threshold: float | None = None  # None: precision default
    ls_tolerance: float = DEFAULT_TOLERANCE
    budget: float = DEFAULT_BUDGET
    beta_rule: BetaRule = BetaRule.POLAK_RIBIERE_PLUS
    restart_interval: int | None = None  # None: number of parameters

    def __post_init__(self):
        object.__setattr__(self, "beta_rule", BetaRule(self.beta_rule))
        if self.gradient_threshold is not None and not self.gradient_threshold > 0:
            raise ValueError("gradient_threshold must be positive")
        if not self.ls_tolerance > 0:
            raise ValueError("ls_tolerance must be positive")
        if self.restart_interval is not None and self.restart_interval < 1:
            raise ValueError("restart_interval must be >= 1")


@dataclasses.dataclass(frozen=True)
class RmsPropConfig:
    learning_rate: float = 1e-3
    decay: float = 0.9
    eps: float = 1e-7
    budget: float = DEFAULT_BUDGET
    gradient_threshold: float | None = None

    def __post_init__(self):
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")


@dataclasses.dataclass(frozen=True)
class TraceRecord:
    iteration: int
    epoch_equivalents: int
    mse: float
    q: float
    grad_norm: float
    ls_evals: int
    accepted_step: float


@dataclasses.dataclass
class OptimizationResult:
    params: np.ndarray
    trace: list[TraceRecord]
    reason: TerminationReason
    info: dict = dataclasses.field(default_factory=dict)

    @property
    def final(self) -> TraceRecord:
        return self.trace[-1]


class NetworkProblem:
    """MSE of a network on a dataset, evaluated in the dataset's precision."""

    def __init__(self, config: NetworkConfig, dataset: Dataset):
        self.config = config
        self.dataset = dataset
        self.var_y = dataset.var_y
        self.size = param_count(config)

    def loss(self, w: np.ndarray) -> EvaluatedBatch:
        return mse(self.config, w, self.dataset.inputs, self.dataset.targets)

    def loss_and_grad(self, w: np.ndarray) -> EvaluatedBatch:
        return gradient(self.config, w, self.dataset.inputs, self.dataset.targets)


class QuadraticProblem:
    """``0.5 w'Aw - b'w`` with the same cost accounting as a network.

    Passing ``minimizer`` instead of ``b`` evaluates the same quadratic with
    its constant dropped, ``0.5 (w - x*)'A(w - x*)``.  The gradient is
    identical, but the loss no longer carries a large offset, so a
    function-value line search can resolve improvements all the way down.
    """

    var_y = 1.0

    def __init__(self, A: np.ndarray, b: Optional[np.ndarray] = None,
                 mode: PrecisionMode = PrecisionMode.DOUBLE, *,
                 minimizer: Optional[np.ndarray] = None):
        if (b is None) == (minimizer is None):
            raise ValueError("give exactly one of b or minimizer")
        self.A = demote(A, mode)
        if minimizer is not None:
            self.minimizer = demote(minimizer, mode)
            self.b = self.A @ self.minimizer
        else:
            self.minimizer = None
            self.b = demote(b, mode)
        self.size = self.b.shape[0]

    def loss(self, w):
        if self.minimizer is not None:
            e = w - self.minimizer
            return EvaluatedBatch(0.5 * (e @ (self.A @ e)))
        return EvaluatedBatch(0.5 * (w @ (self.A @ w)) - self.b @ w)

    def loss_and_grad(self, w):
        if self.minimizer is not None:
            e = w - self.minimizer
            Ae = self.A @ e
            return EvaluatedBatch(0.5 * (e @ Ae), Ae)
        Aw = self.A @ w
        return EvaluatedBatch(0.5 * (w @ Aw) - self.b @ w, Aw - self.b)


def _norm(v: np.ndarray):
    return np.sqrt(v @ v)


def _record(problem, t, budget, f, gnorm, ls_evals, step) -> TraceRecord:
    f = float(f)
    q = f / problem.var_y if problem.var_y > 0 else math.nan
    return TraceRecord(t, budget.spent, f, q, float(gnorm), int(ls_evals), float(step))


def _evaluate_gradient(problem, w, budget):
    ev = problem.loss_and_grad(w)
    budget.charge(ev)
    if not np.isfinite(ev.mse) or not np.all(np.isfinite(ev.gradient)):
        raise NonFiniteError(f"non-finite loss or gradient after {budget.spent} epoch equivalents")
    return ev


def _start(w0, mode):
    w = np.asarray(w0)
    if w.dtype != mode.dtype:
        w = demote(w, mode)
    return w.copy()


def cg_minimize(problem, w0: np.ndarray, cfg: CgConfig | None = None,
                mode: PrecisionMode = PrecisionMode.DOUBLE) -> OptimizationResult:
    """Minimize ``problem`` by nonlinear conjugate gradient.

    The first record of the trace is the starting point. Every later record is
    one CG iteration: a line search (forward passes only) followed by a
    gradient at the accepted point. When the line search cannot improve on
    the current loss the run ends with a final record carrying the wasted
    evaluations and the unchanged loss.
    """
    cfg = cfg or CgConfig()
    dt = mode.dtype
    threshold = cfg.gradient_threshold or default_gradient_threshold(mode)
    restart_interval = cfg.restart_interval or problem.size
    budget = Budget(cfg.budget)
    w = _start(w0, mode)

    ev = _evaluate_gradient(problem, w, budget)
    f, g = ev.mse, ev.gradient
    gnorm = _norm(g)
    trace = [_record(problem, 0, budget, f, gnorm, 0, 0.0)]
    info = {"beta_rule": cfg.beta_rule.value, "restarts": 0, "gradient_threshold": threshold,
            "ls_status_counts": {}}

    if gnorm < threshold:
        return OptimizationResult(w, trace, TerminationReason.GRADIENT_CONVERGED, info)

    d = -g
    alpha_prev = None
    since_restart = 0
    t = 0
    while True:
        t += 1
        if not (g @ d) < 0:
            d = -g
            since_restart = 0
            info["restarts"] += 1
        alpha_init = alpha_prev if alpha_prev else 1.0 / float(_norm(d))

        def phi(alpha, w=w, d=d):
            ev = problem.loss(w + alpha * d)
            budget.charge(ev)
            return ev.mse

        out = line_search(phi, cfg.ls_tolerance, mode, alpha_init, f0=f)
        counts = info["ls_status_counts"]
        counts[out.status.value] = counts.get(out.status.value, 0) + 1
        if not out.f_alpha < f:
            log.info("line search found no improvement at iteration %d (%s)", t, out.status.value)
            trace.append(_record(problem, t, budget, f, gnorm, out.function_evals, 0.0))
            return OptimizationResult(w, trace, TerminationReason.LINE_SEARCH_NO_IMPROVEMENT, info)

        w = w + dt(out.alpha) * d
        ev = _evaluate_gradient(problem, w, budget)
        f, g_new = ev.mse, ev.gradient
        gnorm = _norm(g_new)
        trace.append(_record(problem, t, budget, f, gnorm, out.function_evals, out.alpha))

        if gnorm < threshold:
            return OptimizationResult(w, trace, TerminationReason.GRADIENT_CONVERGED, info)
        if budget.exhausted:
            return OptimizationResult(w, trace, TerminationReason.BUDGET_EXHAUSTED, info)

        gg = g @ g
        if cfg.beta_rule is BetaRule.FLETCHER_REEVES:
            beta = (g_new @ g_new) / gg
        else:
            beta = max(dt(0.0), (g_new @ (g_new - g)) / gg)
        since_restart += 1
        if since_restart >= restart_interval or beta == 0:
            beta = dt(0.0)
            since_restart = 0
            info["restarts"] += 1
        d = -g_new + beta * d
        g = g_new
        alpha_prev = out.alpha


def rmsprop_step(w: np.ndarray, grad: np.ndarray, d: np.ndarray, cfg: RmsPropConfig):
    """One RMSprop update; returns the new weights and squared-gradient average."""
    dt = w.dtype.type
    g = dt(cfg.decay)
    d_new = g * d + (dt(1.0) - g) * (grad * grad)
    w_new = w - (dt(cfg.learning_rate) / (np.sqrt(d_new) + dt(cfg.eps))) * grad
    return w_new, d_new


def rmsprop_minimize(problem, w0: np.ndarray, cfg: RmsPropConfig | None = None,
                     mode: PrecisionMode = PrecisionMode.DOUBLE) -> OptimizationResult:
    """Full-batch RMSprop, one gradient and one update per epoch.

    Record ``t`` holds the loss at the weights the ``t``-th gradient was taken
    at. The run returns those weights when the budget runs out, so the last
    record describes the returned parameters.
    """
    cfg = cfg or RmsPropConfig()
    threshold = cfg.gradient_threshold or default_gradient_threshold(mode)
    budget = Budget(cfg.budget)
    w = _start(w0, mode)
    d = np.zeros_like(w)
    trace: list[TraceRecord] = []
    info = {"gradient_threshold": threshold, "eps_placement": "outside_sqrt"}
    t = 0
    while True:
        ev = _evaluate_gradient(problem, w, budget)
        gnorm = _norm(ev.gradient)
        trace.append(_record(problem, t, budget, ev.mse, gnorm, 0, cfg.learning_rate))
        if gnorm < threshold:
            return OptimizationResult(w, trace, TerminationReason.GRADIENT_CONVERGED, info)
        if budget.exhausted:
            return OptimizationResult(w, trace, TerminationReason.BUDGET_EXHAUSTED, info)
        w, d = rmsprop_step(w, ev.gradient, d, cfg)
        t += 1
