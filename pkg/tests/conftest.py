import math

import pytest
from hypothesis import HealthCheck, settings

from photonlab.detectors import DetectorArray, DetectorSpec

settings.register_profile(
    "photonlab", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("photonlab")

PRESET = [
    DetectorSpec(0.3, 0.2, 1.0, 0.0),
    DetectorSpec(0.2, 0.3, 1.0, 0.7 * math.pi),
    DetectorSpec(0.2, 0.3, 1.0, -0.5 * math.pi),
]


@pytest.fixture
def three():
    return DetectorArray(tuple(PRESET))


@pytest.fixture
def two():
    return DetectorArray(tuple(PRESET[:2]))


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion for the terminal summary."""
    lines = request.config._acceptance_lines

    def report(number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append((number, line))
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
