import pytest

from inls_lab.core_model import GridSpec, ModelParams
from inls_lab.profiles import datum_field, make_datum, scale_to_smallness

# filled by test_acceptance; printed at the end of the session
ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: int(k[1:])):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def p1_params():
    return ModelParams(1, 1.2, 0.4, 0.5)


@pytest.fixture(scope="session")
def p1_grid():
    return GridSpec("line1d", 40, 4096)


@pytest.fixture(scope="session")
def p1_datum(p1_params, p1_grid):
    phi = scale_to_smallness(p1_params, datum_field(p1_grid, "x_gauss"), 0.3)
    return make_datum(p1_params, phi, 0.42, 0.95)


@pytest.fixture(scope="session")
def radial_params():
    return ModelParams(2, 2 / 3, 1 / 3, 2 ** (-1 / 3) * 0.5)


@pytest.fixture(scope="session")
def radial_datum(radial_params):
    g = GridSpec("radial2d", 16, 1024)
    phi = scale_to_smallness(radial_params, datum_field(g, "r2_gauss"), 0.3)
    return make_datum(radial_params, phi, 0.77, 1.6)
