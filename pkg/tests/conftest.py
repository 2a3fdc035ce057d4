import numpy as np
import pytest

from mcplus.linalg import GramView, RegressionData, standardize_columns
from mcplus.penalty import make_lasso, make_mcp, make_scad

_acceptance = {}


def record_criterion(number, passed, detail):
    _acceptance[number] = (bool(passed), detail)
    return passed


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        passed, detail = _acceptance[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")


def backtrack_data():
    """Two standardized columns with x1'x2/n = 1/4 and z = (1, -0.883)."""
    S = np.array([[1.0, 0.25], [0.25, 1.0]])
    n = 2
    X = np.sqrt(n) * np.linalg.cholesky(S).T
    y = n * np.linalg.solve(X.T, np.array([1.0, -0.883]))
    return RegressionData(X, y)


def orthonormal_design(n, seed):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return np.sqrt(n) * Q


def random_instance(rng, n=None, p=None):
    n = int(rng.integers(15, 101)) if n is None else n
    p = int(rng.integers(3, 101)) if p is None else p
    X = rng.standard_normal((n, p))
    if rng.random() < 0.5:
        # correlated columns
        X = X + 0.6 * rng.standard_normal((n, 1))
    beta = np.zeros(p)
    d = max(1, min(p, n) // 4)
    S = rng.choice(p, size=int(rng.integers(1, d + 1)), replace=False)
    beta[S] = rng.choice([-1, 1], size=S.size) * rng.uniform(0.3, 2.0, size=S.size)
    y = X @ beta + rng.standard_normal(n)
    return standardize_columns(RegressionData(X, y))


PENALTY_CYCLE = [
    make_lasso(),
    make_mcp(1.4),
    make_mcp(2.0),
    make_mcp(3.0),
    make_scad(2.4),
    make_scad(3.7),
]


@pytest.fixture
def backtrack():
    return backtrack_data()


@pytest.fixture
def backtrack_gram():
    return GramView.from_matrix([[1.0, 0.25], [0.25, 1.0]])
