import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_spd(rng, p, scale=1.0):
    G = rng.standard_normal((p, p))
    return scale * (G.T @ G + p * np.eye(p))


def random_dag_parents(rng, p, density=0.5):
    return tuple(tuple(j for j in range(i + 1, p) if rng.random() < density) for i in range(p))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# "CRITERION k: ..." lines from the acceptance suite, shown after the run
CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(CRITERIA_LINES):
            terminalreporter.write_line(line)
