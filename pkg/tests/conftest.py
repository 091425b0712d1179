import pytest

from drawstring.cutoff_construction import build_drawstring_B
from drawstring.gluing_construction import build_drawstring_A
from drawstring.params import DrawstringSpec

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def spec_b():
    return DrawstringSpec(k=0.0, epsilon=0.1, delta=0.1, r0=1e-3, method="B")


@pytest.fixture(scope="session")
def spec_a():
    return DrawstringSpec(k=0.0, epsilon=0.1, delta=0.1, r0=1e-3, method="A")


@pytest.fixture(scope="session")
def profile_b(spec_b):
    return build_drawstring_B(spec_b)


@pytest.fixture(scope="session")
def profile_a(spec_a):
    return build_drawstring_A(spec_a)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
