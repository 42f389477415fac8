import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from trialoffer.dataset import builtin_examples, load_dataset  # noqa: E402
from trialoffer.model import MarketSpec  # noqa: E402


@pytest.fixture(scope="session")
def examples():
    return builtin_examples()


@pytest.fixture(scope="session")
def musiclab():
    return load_dataset()


@pytest.fixture(scope="session")
def musiclab_anti():
    return load_dataset(setting="anticorrelated")


def random_market(rng: np.random.Generator, n: int) -> MarketSpec:
    return MarketSpec(
        quality=rng.uniform(0.1, 1.0, n),
        appeal=rng.uniform(0.1, 1.0, n),
        visibility=rng.uniform(0.1, 1.0, n),
    )


# filled by the acceptance suite; printed after the run
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
