import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ROOT = Path(__file__).resolve().parents[1]


@pytest.fixture
def gulf_bbox():
    from hexmarkov.hexgrid import BoundingBox

    return BoundingBox(46.0, 50.0, -66.0, -58.0)


@pytest.fixture
def grid(gulf_bbox):
    from hexmarkov.hexgrid import GridConfig

    return GridConfig(gulf_bbox)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
