import sys

import numpy as np
import pytest

from flipbound.dataset import Dataset, TestTarget


def random_instance(seed: int):
    """Small integer instance: m <= 12, d <= 3, entries in {-2..2}."""
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, 13))
    d = int(rng.integers(1, 4))
    X = rng.integers(-2, 3, size=(m, d))
    y = rng.choice([-1, 1], size=m)
    target = TestTarget(rng.integers(-2, 3, size=d), int(rng.choice([-1, 1])))
    return Dataset(X, y), target


def separable_dataset(m: int, d: int, seed: int, gap: float = 0.3) -> Dataset:
    """Gaussian points labelled by a random hyperplane, with a margin gap."""
    rng = np.random.default_rng(seed)
    w = rng.normal(size=d)
    X = rng.normal(size=(4 * m, d))
    keep = np.abs(X @ w) > gap * np.linalg.norm(w)
    X = X[keep][:m]
    return Dataset(X, np.where(X @ w > 0, 1, -1))


@pytest.fixture(scope="session")
def instances():
    return [random_instance(s) for s in range(100)]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for n in sorted(lines):
            terminalreporter.write_line(lines[n])
