import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from semitrailer import default_params  # noqa: E402
from semitrailer.maneuvers import ManeuverSpec, NoiseSpec, synthesize_dataset  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def params():
    return default_params()


def random_params(rng, spread=0.3):
    """Default parameters with every entry except g scaled by a factor in [1-spread, 1+spread]."""
    base = default_params()
    values = {k: v * rng.uniform(1 - spread, 1 + spread) for k, v in base.to_flat().items() if k != "g"}
    values["mu"] = min(values["mu"], 2.0)
    return base.with_values(values).validate()


def random_state(rng):
    return np.concatenate([
        [rng.uniform(-1, 1), rng.uniform(-0.3, 0.3), rng.uniform(-0.05, 0.05), rng.uniform(-1, 1),
         rng.uniform(-0.1, 0.1), rng.uniform(-0.3, 0.3), rng.uniform(-0.5, 0.5)],
        rng.uniform(-2e4, 2e4, 8),
    ])


SHORT_SLALOM = ManeuverSpec("slalom", 10.0, speed=40.0, amplitude=0.05, frequency=0.5, cycles=3, start=2.0)


@pytest.fixture(scope="session")
def short_dataset(params):
    """Noiseless 10 s slalom at 50 Hz."""
    spec = ManeuverSpec("slalom", 10.0, speed=40.0, amplitude=0.05, frequency=0.5, cycles=3, sample_rate=50.0)
    return synthesize_dataset(params, spec, None, dt=1e-3)


@pytest.fixture(scope="session")
def short_noisy_dataset(params):
    spec = ManeuverSpec("slalom", 10.0, speed=40.0, amplitude=0.05, frequency=0.5, cycles=3, sample_rate=50.0)
    return synthesize_dataset(params, spec, NoiseSpec.realistic(3), dt=1e-3)
