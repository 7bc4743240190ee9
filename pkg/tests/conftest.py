import numpy as np
import pytest

from cgbench.taskgen import TaskSpec, generate_task, initial_params

_ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a pass/fail line for an acceptance criterion."""
    number = request.node.get_closest_marker("criterion").args[0]

    def record(passed: bool, detail: str):
        _ACCEPTANCE[number] = (passed, request.node.name, detail)
        return passed

    return record


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        passed, name, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{n:2d}] {'PASS' if passed else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="session")
def small_task():
    spec = TaskSpec.build(6, 3, [5], "moderate", patterns=12, seed=11)
    dataset, teacher = generate_task(spec)
    return spec, dataset, teacher


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
