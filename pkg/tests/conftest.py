import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from poigap.synth import SynthConfig, generate  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def small_city():
    return generate(SynthConfig(blocks=8, days=9, categories=12, planted=3, seed=11))


@pytest.fixture(scope="session")
def city_dir(tmp_path_factory, small_city):
    from poigap.synth import write_city

    out = tmp_path_factory.mktemp("city")
    write_city(small_city, out)
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
