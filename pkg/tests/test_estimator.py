import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from conftest import random_instance
from mcplus.errors import LambdaNotReached, NonpositiveWeight, SingularSubGram
from mcplus.estimator import (
    FIRST_REACH,
    SPARSEST,
    EstimatorChoice,
    adaptive_rescale,
    beta_at_lambda,
    first_reach_x,
    oracle_lse,
)
from mcplus.linalg import GramView, RegressionData
from mcplus.path import PathOptions, compute_path, interpolate, plus_path, verify_kkt
from mcplus.penalty import make_lasso, make_mcp, rho


def test_zero_above_lambda0():
    rng = np.random.default_rng(0)
    data = random_instance(rng, n=40, p=8)
    path = compute_path(data, make_mcp(2.0))
    lam0 = path.points[0].lam
    assert not np.any(beta_at_lambda(path, 1.01 * lam0))
    assert first_reach_x(path, 2 * lam0) == 0.0


def test_first_reach_matches_interpolation():
    rng = np.random.default_rng(1)
    data = random_instance(rng, n=40, p=8)
    path = compute_path(data, make_mcp(2.0))
    lam = 0.5 * path.points[0].lam
    x = first_reach_x(path, lam)
    lam_x, beta_x = interpolate(path, x)
    assert lam_x == pytest.approx(lam)
    assert np.allclose(beta_x, beta_at_lambda(path, lam), atol=1e-12)


def test_sparsest_never_denser_than_first_reach(backtrack_gram):
    path = plus_path(backtrack_gram, [1.0, -0.883], make_mcp(0.5))
    for lam in np.linspace(0.05, 1.5, 40):
        a = beta_at_lambda(path, lam, FIRST_REACH)
        b = beta_at_lambda(path, lam, SPARSEST)
        assert np.count_nonzero(b) <= np.count_nonzero(a)


def test_lambda_not_reached_on_truncated_path():
    rng = np.random.default_rng(2)
    data = random_instance(rng, n=40, p=20)
    path = compute_path(data, make_lasso(), PathOptions(lambda_min=0.3))
    with pytest.raises(LambdaNotReached):
        beta_at_lambda(path, 1e-3)


def test_estimator_choice_validation():
    with pytest.raises(ValueError):
        EstimatorChoice("median", 0.1)
    with pytest.raises(ValueError):
        EstimatorChoice(FIRST_REACH, -1.0)


def test_oracle_lse():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((30, 5))
    beta = np.array([1.0, 0.0, -2.0, 0.0, 0.0])
    data = RegressionData(X, X @ beta)
    assert np.allclose(oracle_lse(data, [0, 2]), beta)
    assert not np.any(oracle_lse(data, []))
    X2 = np.column_stack([X[:, 0], X[:, 0]])
    with pytest.raises(SingularSubGram):
        oracle_lse(RegressionData(X2, X2[:, 0]), [0, 1])


def test_adaptive_rescale_univariate_brute_force():
    """The rescaled path minimizes the weighted criterion coordinate by coordinate."""
    rng = np.random.default_rng(4)
    n = 6
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    X = np.sqrt(n) * Q[:, :2]
    y = X @ np.array([1.3, -0.8]) + 0.1 * rng.standard_normal(n)
    data = RegressionData(X, y)
    r = np.array([0.7, 1.6])
    pen = make_mcp(3.0)
    scaled, back = adaptive_rescale(data, r)
    path = compute_path(scaled, pen, PathOptions(allow_unstandardized=True))
    lam = 0.3
    beta = back(beta_at_lambda(path, lam))
    z = data.z_tilde
    for j in range(2):
        f = lambda t: 0.5 * (t - z[j]) ** 2 + rho(pen, abs(t) * r[j], lam)
        res = minimize_scalar(f, bounds=(-5, 5), method="bounded", options={"xatol": 1e-12})
        assert beta[j] == pytest.approx(res.x, abs=1e-6)


def test_adaptive_rescale_rejects_bad_weights():
    data = RegressionData(np.eye(3), np.ones(3))
    with pytest.raises(NonpositiveWeight):
        adaptive_rescale(data, [1.0, 0.0, 1.0])


def test_adaptive_rescale_kkt():
    rng = np.random.default_rng(5)
    data = random_instance(rng, n=50, p=12)
    r = rng.uniform(0.5, 2.0, size=12)
    scaled, back = adaptive_rescale(data, r)
    pen = make_mcp(2.5)
    path = compute_path(scaled, pen, PathOptions(allow_unstandardized=True))
    lam = 0.4 * path.points[0].lam
    b = beta_at_lambda(path, lam)
    assert verify_kkt(scaled, lam, b, pen).passed
    assert np.allclose(scaled.X @ b, data.X @ back(b))
