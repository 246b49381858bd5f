import numpy as np
import pytest

from zib import _kernels

BACKENDS = [pytest.param(_kernels.numpy_backend, id="numpy")]
if _kernels.numba_backend is not None:
    BACKENDS.append(pytest.param(_kernels.numba_backend, id="numba"))


@pytest.fixture(params=BACKENDS)
def kernels(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and return the verdict."""

    def _report(criterion: int, ok: bool, detail: str) -> bool:
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
