import math
import warnings

import numpy as np
import pytest

from conftest import random_instance
from mcplus.errors import DegenerateDoF, EmptyActiveSet, RankDeficientDesign
from mcplus.estimator import beta_at_lambda
from mcplus.linalg import GramView, RegressionData, standardize_columns
from mcplus.path import compute_path
from mcplus.penalty import make_lasso, make_mcp, rho_dot
from mcplus.risk import (
    cp_hat,
    default_lambda_star,
    df_hat,
    lse_sigma2,
    mse_contrast,
    q_matrix,
    risk_report,
    sigma_hat,
)


def test_df_lasso_counts_active():
    gram = GramView.from_matrix([[1.0, 0.3, 0.0], [0.3, 1.0, 0.2], [0.0, 0.2, 1.0]])
    assert df_hat([0.5, 0.0, -1.0], 0.2, gram, make_lasso()) == 2.0
    assert df_hat([0.0, 0.0, 0.0], 0.2, gram, make_lasso()) == 0.0


def test_df_mcp_orthonormal_closed_form():
    # on the concave segment df per coordinate is gamma/(gamma-1); past gamma*lambda it is 1
    gram = GramView.from_matrix(np.eye(3))
    pen = make_mcp(3.0)
    lam = 0.5
    beta = [0.6, 2.0, 0.0]
    assert df_hat(beta, lam, gram, pen) == pytest.approx(1.5 + 1.0)


def test_q_matrix_empty():
    with pytest.raises(EmptyActiveSet):
        q_matrix([0.0, 0.0], 0.1, GramView.from_matrix(np.eye(2)), make_lasso())


def test_lse_sigma2_needs_n_above_p():
    with pytest.raises(RankDeficientDesign):
        lse_sigma2(RegressionData(np.ones((3, 3)) + np.eye(3), np.ones(3)))


def test_cp_equals_rss_shift_for_zero_fit():
    rng = np.random.default_rng(0)
    data = standardize_columns(RegressionData(rng.standard_normal((30, 4)), rng.standard_normal(30)))
    s2 = 1.3
    mu = data.X @ np.linalg.lstsq(data.X, data.y, rcond=None)[0]
    assert cp_hat(data, np.zeros(4), 0.1, s2, make_lasso()) == pytest.approx(mu @ mu - 4 * s2)


def test_mse_contrast_warns_when_concavity_dominates():
    rng = np.random.default_rng(1)
    data = standardize_columns(RegressionData(rng.standard_normal((30, 4)), rng.standard_normal(30)))
    with pytest.warns(RuntimeWarning):
        mse_contrast(np.ones(4), data, np.array([0.3, 0, 0, 0]), 0.2, 1.0, make_mcp(0.5))
    assert mse_contrast(np.zeros(4), data, np.zeros(4), 0.2, 1.0, make_lasso()) == 0.0


def test_risk_report_fields():
    rng = np.random.default_rng(2)
    data = random_instance(rng, n=60, p=8)
    pen = make_mcp(2.0)
    path = compute_path(data, pen)
    lam = 0.3 * path.points[0].lam
    rep = risk_report(data, path, lam, pen)
    beta = beta_at_lambda(path, lam)
    assert rep.active_count == np.count_nonzero(beta)
    assert rep.df_hat >= rep.active_count - 1e-12
    assert rep.sigma2_used == pytest.approx(lse_sigma2(data))


def test_degenerate_dof():
    data = standardize_columns(RegressionData(np.array([[1.0, 0.0], [0.0, 1.0]]), [1.0, 2.0]))
    path = compute_path(data, make_lasso())
    with pytest.raises(DegenerateDoF):
        risk_report(data, path, 1e-6, make_lasso(), sigma2=1.0)


def test_sigma_hat_tracks_noise_level():
    rng = np.random.default_rng(3)
    n, p = 150, 300
    X = rng.standard_normal((n, p))
    beta = np.zeros(p)
    beta[:5] = 1.0
    sigma = 0.8
    data = standardize_columns(RegressionData(X, X @ beta + sigma * rng.standard_normal(n)))
    pen = make_mcp(1.7)
    path = compute_path(data, pen)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        est = sigma_hat(data, path, pen)
    assert est.crossed
    assert est.lambda_hat >= default_lambda_star(n, p)
    assert abs(est.sigma - sigma) < 0.25


def test_sigma_hat_rejects_unknown_rule():
    data = random_instance(np.random.default_rng(4), n=30, p=5)
    path = compute_path(data, make_lasso())
    with pytest.raises(ValueError):
        sigma_hat(data, path, make_lasso(), rule="largest")


def test_default_lambda_star():
    assert default_lambda_star(200, 800) == pytest.approx(math.sqrt(math.log(800) / 1600))
