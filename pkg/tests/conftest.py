import numpy as np
import pytest

from kppspeed import media


@pytest.fixture(scope="session")
def homog():
    return media.make_homogeneous(1.0, 0.0, 1.0)


@pytest.fixture(scope="session")
def cosine_c():
    # c = 1 + 0.5 cos(2 pi x), period 1
    return media.make_periodic(c_modes=[(0.5, 1, 0.0)], period=1.0)


@pytest.fixture(scope="session")
def div_periodic():
    return media.make_periodic(a_modes=[(0.3, 1, 0.0)], c_modes=[(0.4, 2, 0.5)], period=2.0,
                               divergence_form=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one acceptance line and assert it."""
    def check(number, title, ok, detail):
        line = f"criterion {number:>2} {'PASS' if ok else 'FAIL'}: {title} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line
    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
