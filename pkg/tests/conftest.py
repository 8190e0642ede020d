import numpy as np
import pytest

from plexreg import Dataset, SplineSpec, build_design


def make_instance(n=100, p=5, d=2, seed=0, active=(0, 1), noise=0.5, hetero=False):
    """Random partially linear additive data with a sparse linear part."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p))
    Z = rng.uniform(size=(n, d))
    beta = np.zeros(p)
    beta[list(active)] = 1.5
    g = np.sin(2 * np.pi * Z[:, 0])
    if d > 1:
        g = g + Z[:, 1] ** 2
    eps = noise * rng.standard_normal(n)
    if hetero:
        eps = eps * (1 + np.abs(X[:, 0]))
    y = X @ beta + g + eps
    ds = Dataset(y, X, Z)
    return ds, build_design(Z, SplineSpec()), beta


@pytest.fixture
def instance():
    return make_instance()


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
