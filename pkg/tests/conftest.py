import numpy as np
import pytest

REF_TRIANGLE = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
UNIT_SQUARE = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
PENTAGON = np.array([[0.0, 0.0], [1.0, 0.0], [1.3, 0.7], [0.5, 1.2], [-0.2, 0.6]])


@pytest.fixture
def ref_triangle():
    return REF_TRIANGLE.copy()


@pytest.fixture
def unit_square():
    return UNIT_SQUARE.copy()


@pytest.fixture
def pentagon():
    return PENTAGON.copy()


_ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(criterion, checks):
        failed = [name for name, ok, _ in checks if not ok]
        detail = "; ".join(f"{name}: {'ok' if ok else 'FAIL'} ({info})" for name, ok, info in checks)
        line = f"{'PASS' if not failed else 'FAIL'} criterion {criterion} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert not failed, f"criterion {criterion} failed checks: {', '.join(failed)}"

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2])):
            terminalreporter.write_line(line)
