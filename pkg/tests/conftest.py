import pytest

import acceptance_log


def pytest_terminal_summary(terminalreporter):
    if acceptance_log.LINES:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_log.LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def kitchen_catalog():
    from checks import FIXTURES
    from worldmind.sim import build_catalog, load_world
    return build_catalog(load_world(FIXTURES / "worlds" / "kitchen_small.json"))
