import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cgbench.linesearch import (
    Bracket,
    BracketFailed,
    LineSearchStatus,
    bracket_minimum,
    brent_minimize,
    line_search,
)
from cgbench.precision import PrecisionMode, machine_epsilon, tolerance_floor

SINGLE, DOUBLE = PrecisionMode.SINGLE, PrecisionMode.DOUBLE


class Counted:
    def __init__(self, f):
        self.f = f
        self.calls = 0

    def __call__(self, a):
        self.calls += 1
        return self.f(a)


def test_bracket_contains_minimizer():
    br = bracket_minimum(lambda a: (a - 2.0) ** 2, 1.0)
    assert br.is_valid(strict=True)
    assert br.a < 2.0 < br.c


def test_bracket_contracts_when_first_step_overshoots():
    br = bracket_minimum(lambda a: (a - 0.01) ** 2, 1.0)
    assert br.is_valid(strict=True)
    assert br.a == 0.0 and br.a < 0.01 < br.c


def test_bracket_monotone_increasing_has_no_descent():
    with pytest.raises(BracketFailed) as exc:
        bracket_minimum(lambda a: a * a, 1.0)
    assert not exc.value.descending
    out = line_search(lambda a: a * a, alpha_init=1.0)
    assert out.status is LineSearchStatus.NO_IMPROVEMENT
    assert out.alpha == 0.0


def test_bracket_unbounded_descent_fails():
    phi = Counted(lambda a: -a)
    with pytest.raises(BracketFailed) as exc:
        bracket_minimum(phi, 1.0, max_expansions=50)
    assert exc.value.descending
    assert phi.calls == 52  # phi(0), phi(alpha0), 50 expansions
    out = line_search(lambda a: -a)
    assert out.status is LineSearchStatus.BRACKET_FAILED
    assert out.f_alpha < 0


def test_brent_shifted_quadratic():
    f = lambda a: (a - 2.0) ** 2 + 1.0
    br = Bracket(0.0, 1.0, 4.0, f(0.0), f(1.0), f(4.0))
    out = brent_minimize(f, br, 1e-3, DOUBLE)
    assert abs(out.alpha - 2.0) <= 1e-3 * 2.0 + 10 * machine_epsilon(DOUBLE)
    assert out.status is LineSearchStatus.IMPROVED


def test_brent_symmetric_quadratic():
    f = lambda a: (a - 1.0) ** 2
    br = Bracket(0.0, 0.5, 3.0, f(0.0), f(0.5), f(3.0))
    out = brent_minimize(f, br, 1e-3, DOUBLE)
    assert out.alpha == pytest.approx(1.0, abs=1e-6)
    assert out.f_alpha == pytest.approx(0.0, abs=1e-12)


def test_single_precision_tolerance_is_clamped():
    f = lambda a: np.float32((a - np.float32(1.3)) ** 2 + np.float32(0.1) * a ** 4)
    br = bracket_minimum(f, 0.5, mode=SINGLE)
    tight = brent_minimize(f, br, 1e-12, SINGLE)
    floor = brent_minimize(f, br, tolerance_floor(SINGLE), SINGLE)
    assert tight.function_evals == floor.function_evals
    assert tight.alpha == floor.alpha
    assert tight.function_evals < 40


def test_brent_runs_in_working_precision():
    seen = []

    def f(a):
        seen.append(type(a))
        return (a - np.float32(1.0)) ** 2

    line_search(f, 1e-3, SINGLE, 0.3)
    assert set(seen) == {np.float32}


def test_line_search_convex_quadratic_improves():
    phi = Counted(lambda a: (1.0 - a) ** 2 + 0.5)
    out = line_search(phi, alpha_init=0.1)
    assert out.status is LineSearchStatus.IMPROVED
    assert out.f_alpha < 1.5
    assert out.function_evals == phi.calls


def test_line_search_f0_not_recounted():
    phi = Counted(lambda a: (1.0 - a) ** 2)
    out = line_search(phi, alpha_init=0.1, f0=1.0)
    assert out.function_evals == phi.calls


def test_flat_to_single_precision():
    flat32 = lambda a: np.float32(1.0) + np.float32(1e-9) * a * a
    out = line_search(flat32, 1e-1, SINGLE, 1.0)
    assert out.status is LineSearchStatus.NO_IMPROVEMENT
    # double resolves the same function
    flat64 = lambda a: 1.0 + 1e-9 * a * a
    assert flat64(1.0) != flat64(0.0)


def test_flat_dip_found_only_in_double():
    dip32 = lambda a: np.float32(1.0) + np.float32(1e-9) * (a * a - np.float32(2.0) * a)
    dip64 = lambda a: 1.0 + 1e-9 * (a * a - 2.0 * a)
    assert line_search(dip32, 1e-1, SINGLE, 0.5).status is LineSearchStatus.NO_IMPROVEMENT
    out = line_search(dip64, 1e-1, DOUBLE, 0.5)
    assert out.status is LineSearchStatus.IMPROVED
    assert out.alpha == pytest.approx(1.0, rel=0.1)


def test_looser_tolerance_uses_fewer_evaluations():
    f = lambda a: math.exp(a) - 3.0 * a
    loose = line_search(f, 1e-1, DOUBLE, 0.2)
    tight = line_search(f, 1e-3, DOUBLE, 0.2)
    assert loose.function_evals < tight.function_evals
    assert tight.alpha == pytest.approx(math.log(3.0), rel=2e-3)


@settings(max_examples=60, deadline=None)
@given(
    center=st.floats(0.05, 20.0),
    quartic=st.floats(0.0, 5.0),
    scale=st.floats(0.1, 100.0),
    alpha0=st.floats(1e-3, 10.0),
    tol=st.sampled_from([1e-1, 1e-3, 1e-8]),
    single=st.booleans(),
)
def test_brent_invariants(center, quartic, scale, alpha0, tol, single):
    mode = SINGLE if single else DOUBLE
    dt = mode.dtype

    def f(a):
        u = a - dt(center)
        return dt(scale) * (u * u + dt(quartic) * u * u * u * u)

    phi = Counted(f)
    states = []
    out = line_search(phi, tol, mode, alpha0, hook=lambda it, s: states.append(s))
    assert out.function_evals == phi.calls >= 1
    assert out.status is LineSearchStatus.IMPROVED
    assert out.f_alpha < f(dt(0.0))
    best = [s.fb for s in states]
    assert all(b2 <= b1 for b1, b2 in zip(best, best[1:]))
    for s in states:
        assert s.a <= s.b <= s.c
        assert s.fb <= s.fa and s.fb <= s.fc
