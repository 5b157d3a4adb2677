import pytest
from hypothesis import HealthCheck, settings

from protoloop.kit import load_kit
from protoloop.synthetic import KIT_REQUIREMENTS
from protoloop.protocol import load_requirements

settings.register_profile("default", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def kit():
    return load_kit()


@pytest.fixture
def kit_reqs():
    return load_requirements(KIT_REQUIREMENTS)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line[1])
