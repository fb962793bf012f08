import pytest

from uavcover.graph import InstanceParams, build_grid, build_path


@pytest.fixture
def p3():
    return build_path(3, 1000.0)


@pytest.fixture
def grid2():
    return build_grid(2, 2, 1000.0, station=0)


@pytest.fixture
def table_params():
    return InstanceParams(5000.0, 11000.0, 20000.0)


# one verdict line per acceptance criterion, repeated at the end of the run
VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[VERDICTS] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
