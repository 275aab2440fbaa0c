import os

import pytest
from hypothesis import settings

from popcomp import core

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

# predicates of the exhaustive correctness family
FAMILY = [
    "x >= 2",
    "x - y >= 0",
    "x = 1 mod 3",
    "2x + y = 3 mod 5",
    "x = 1 mod 3 && x >= 2",
    "8x + 5y = 4 mod 11 || -2x + y >= 5",
]


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURES, name)


@pytest.fixture
def toy():
    return core.from_file(fixture_path("toy_cycle.json"))


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
