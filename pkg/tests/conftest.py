import numpy as np
import pytest

from segan.data import encode, load_csv
from segan.synthetic import correlated_gaussian, write_table

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def gaussian_csv(tmp_path_factory):
    """Complete 8-feature correlated Gaussian table, n=2000, with a binary label."""
    path = tmp_path_factory.mktemp("data") / "gaussian.csv"
    write_table(path, *correlated_gaussian(n=2000, d=8, seed=0))
    return path


@pytest.fixture(scope="session")
def gaussian(gaussian_csv):
    return encode(*load_csv(gaussian_csv, "label"))


@pytest.fixture
def small_csv(tmp_path):
    """300-row table with 20% blanks; quick enough for CLI round trips."""
    path = tmp_path / "small.csv"
    x, y = correlated_gaussian(n=300, d=4, seed=3)
    write_table(path, x, y, missing_rate=0.2, seed=3, label_name="y")
    return path
