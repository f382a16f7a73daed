import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dronemosaic import FlightConfig, build_mosaic, generate_flight, make_scene  # noqa: E402

# lines recorded by the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []

JITTER_SEED = 0


@pytest.fixture(scope="session")
def scene():
    """Default procedural scene, large enough for the 4x4 grid with jitter margin."""
    return make_scene()


@pytest.fixture(scope="session")
def flat_flight(scene):
    return generate_flight(scene, flight=FlightConfig())


@pytest.fixture(scope="session")
def jitter_flight(scene):
    return generate_flight(scene, flight=FlightConfig(jitter_sigma=3.0, rng_seed=JITTER_SEED))


@pytest.fixture(scope="session")
def flat_mosaic(flat_flight):
    return build_mosaic(flat_flight.plan, flat_flight.frames)


@pytest.fixture(scope="session")
def jitter_mosaic(jitter_flight):
    return build_mosaic(jitter_flight.plan, jitter_flight.frames)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
