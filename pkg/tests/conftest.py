import pytest

from nscert.fespace import build_spaces
from nscert.mesh import build_box_mesh

# Lines appended by the acceptance suite, echoed at the end of the session.
ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def cube1():
    return build_spaces(build_box_mesh(1, 1, 1))


@pytest.fixture(scope="session")
def cube2():
    return build_spaces(build_box_mesh(2, 2, 2))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
