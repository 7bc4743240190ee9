"""Bracketing plus Brent minimization along a search direction.

All step-length arithmetic is carried out in the working precision of the run,
so a line search in single precision sees exactly the round-off that the
objective evaluations see.
"""

from __future__ import annotations

import dataclasses
import enum
import logging
from typing import Callable

import numpy as np

from cgbench.precision import PrecisionMode, effective_tolerance, machine_epsilon

log = logging.getLogger(__name__)

GOLDEN_RATIO = 1.618033988749895
CGOLD = 0.3819660112501051  # 1 - 1/golden ratio
DEFAULT_TOLERANCE = 1e-1
MAX_EXPANSIONS = 50
MAX_BRENT_ITERATIONS = 100


class LineSearchStatus(str, enum.Enum):
    IMPROVED = "improved"
    NO_IMPROVEMENT = "no_improvement"
    BRACKET_FAILED = "bracket_failed"


@dataclasses.dataclass(frozen=True)
class Bracket:
    a: float
    b: float
    c: float
    fa: float
    fb: float
    fc: float

    def is_valid(self, strict: bool = True) -> bool:
        if not self.a < self.b < self.c:
            return False
        if strict:
            return self.fb < self.fa and self.fb < self.fc
        return self.fb <= self.fa and self.fb <= self.fc


@dataclasses.dataclass(frozen=True)
class LineSearchOutcome:
    alpha: float
    f_alpha: float
    function_evals: int
    status: LineSearchStatus


class BracketFailed(Exception):
    """No bracket within the expansion budget.

    ``descending`` is True when every expansion kept decreasing the objective
    (unbounded or very long descent), False when no step below the starting
    value was found at all.
    """

    def __init__(self, message: str, *, descending: bool, alpha, f_alpha):
        super().__init__(message)
        self.descending = descending
        self.alpha = alpha
        self.f_alpha = f_alpha


class CountingObjective:
    """Wraps a 1-D objective and counts its invocations."""

    def __init__(self, phi: Callable, dtype=np.float64):
        self.phi = phi
        self.dtype = dtype
        self.evals = 0

    def __call__(self, alpha):
        self.evals += 1
        return self.dtype(self.phi(alpha))


def bracket_minimum(
    phi: Callable,
    alpha0: float,
    *,
    f0=None,
    mode: PrecisionMode = PrecisionMode.DOUBLE,
    max_expansions: int = MAX_EXPANSIONS,
) -> Bracket:
    """Find ``0 <= a < b < c`` with ``phi(b)`` below both ends.

    Starting from ``(0, alpha0)`` the trial step is grown by the golden ratio
    while the objective keeps falling; if ``phi(alpha0)`` is not below
    ``phi(0)``, the step is shrunk by the same ratio instead. Only nonnegative
    steps are tried since ``phi`` is taken along a descent direction.
    """
    dt = mode.dtype
    if not alpha0 > 0:
        raise ValueError("initial step must be positive")
    a = dt(0.0)
    fa = dt(phi(a)) if f0 is None else dt(f0)
    if not np.isfinite(fa):
        raise ValueError("objective is not finite at the starting point")
    b = dt(alpha0)
    fb = dt(phi(b))

    if not fb < fa:
        c, fc = b, fb
        for _ in range(max_expansions):
            b = c * dt(1.0 / GOLDEN_RATIO)
            if not b > a:
                break
            fb = dt(phi(b))
            log.debug("bracket contract: alpha=%g f=%g", b, fb)
            if fb < fa:
                return Bracket(a, b, c, fa, fb, fc)
            c, fc = b, fb
        raise BracketFailed("no step improves on the starting value", descending=False, alpha=a, f_alpha=fa)

    for _ in range(max_expansions):
        c = b + dt(GOLDEN_RATIO) * (b - a)
        fc = dt(phi(c))
        log.debug("bracket expand: alpha=%g f=%g", c, fc)
        if fc > fb or not np.isfinite(fc):
            return Bracket(a, b, c, fa, fb, fc)
        a, fa, b, fb = b, fb, c, fc
    raise BracketFailed("objective still decreasing after expansion budget", descending=True, alpha=b, f_alpha=fb)


def brent_minimize(
    phi: Callable,
    bracket: Bracket,
    tol: float,
    mode: PrecisionMode = PrecisionMode.DOUBLE,
    *,
    f0=None,
    max_iter: int = MAX_BRENT_ITERATIONS,
    hook: Callable[[int, Bracket], None] | None = None,
) -> LineSearchOutcome:
    """Brent's parabolic interpolation with golden-section fallback.

    ``tol`` is relative and clamped up to ``sqrt(eps)`` of the working precision;
    an absolute guard of ``10 * eps`` keeps the target width nonzero near
    ``alpha = 0``. ``f0`` is the objective at step zero used to decide the
    status; it defaults to ``bracket.fa`` when ``bracket.a == 0`` and is
    evaluated otherwise.

    ``hook(iteration, state)`` receives the current interval as a
    :class:`Bracket` ``(lower, best, upper)`` with its objective values.
    """
    dt = mode.dtype
    evals = 0

    def f(u):
        nonlocal evals
        evals += 1
        return dt(phi(u))

    if f0 is None:
        f0 = bracket.fa if bracket.a == 0 else f(dt(0.0))
    f0 = dt(f0)
    tol = dt(effective_tolerance(tol, mode))
    zeps = dt(10.0 * machine_epsilon(mode))
    half, two, cgold = dt(0.5), dt(2.0), dt(CGOLD)

    a, b = dt(min(bracket.a, bracket.c)), dt(max(bracket.a, bracket.c))
    fa, fb = (dt(bracket.fa), dt(bracket.fc)) if bracket.a < bracket.c else (dt(bracket.fc), dt(bracket.fa))
    x = w = v = dt(bracket.b)
    fx = fw = fv = dt(bracket.fb)
    d = e = dt(0.0)

    for it in range(max_iter):
        if hook is not None:
            hook(it, Bracket(a, x, b, fa, fx, fb))
        xm = half * (a + b)
        tol1 = tol * abs(x) + zeps
        tol2 = two * tol1
        if abs(x - xm) <= tol2 - half * (b - a):
            break
        golden = True
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = two * (q - r)
            if q > 0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if not (abs(p) >= abs(half * q * etemp) or p <= q * (a - x) or p >= q * (b - x)):
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = tol1 if xm >= x else -tol1
                golden = False
        if golden:
            e = (a - x) if x >= xm else (b - x)
            d = cgold * e
        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = f(u)
        # strict: on a tie keep the incumbent, usually the exact parabolic minimizer
        if fu < fx:
            if u >= x:
                a, fa = x, fx
            else:
                b, fb = x, fx
            v, fv, w, fw, x, fx = w, fw, x, fx, u, fu
        else:
            if u < x:
                a, fa = u, fu
            else:
                b, fb = u, fu
            if fu <= fw or w == x:
                v, fv, w, fw = w, fw, u, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu

    status = LineSearchStatus.IMPROVED if fx < f0 else LineSearchStatus.NO_IMPROVEMENT
    return LineSearchOutcome(x, fx, evals, status)


def line_search(
    phi: Callable,
    tol: float = DEFAULT_TOLERANCE,
    mode: PrecisionMode = PrecisionMode.DOUBLE,
    alpha_init: float = 1.0,
    *,
    f0=None,
    max_expansions: int = MAX_EXPANSIONS,
    hook: Callable[[int, Bracket], None] | None = None,
) -> LineSearchOutcome:
    """Bracket then refine with Brent.

    ``function_evals`` counts every call of ``phi`` made here, including
    ``phi(0)`` unless the caller supplies it as ``f0``.
    """
    dt = mode.dtype
    counted = CountingObjective(phi, dt)
    if f0 is None:
        f0 = counted(dt(0.0))
    f0 = dt(f0)
    try:
        bracket = bracket_minimum(counted, alpha_init, f0=f0, mode=mode, max_expansions=max_expansions)
    except BracketFailed as exc:
        log.debug("line search: %s", exc)
        status = LineSearchStatus.BRACKET_FAILED if exc.descending else LineSearchStatus.NO_IMPROVEMENT
        return LineSearchOutcome(exc.alpha, exc.f_alpha, counted.evals, status)
    out = brent_minimize(counted, bracket, tol, mode, f0=f0, hook=hook)
    return dataclasses.replace(out, function_evals=counted.evals)
