import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import PENALTY_CYCLE, orthonormal_design, random_instance
from mcplus.errors import NotStandardized, SingularQ
from mcplus.estimator import beta_at_lambda
from mcplus.linalg import GramView, RegressionData
from mcplus.path import (
    LAMBDA_FLOOR,
    PERFECT_FIT,
    STEP_CAP,
    PathOptions,
    compute_path,
    hitting_times,
    interpolate,
    plus_path,
    segment_slope,
    transition_indicator,
    verify_kkt,
)
from mcplus.penalty import make_lasso, make_mcp, make_scad, threshold


def test_backtracking_eta_sequence(backtrack_gram):
    path = plus_path(backtrack_gram, [1.0, -0.883], make_mcp(0.5))
    assert [tuple(e) for e in path.etas()] == [(0, 0), (1, 0), (2, 0), (2, -1), (2, -2)]
    assert [pt.xi for pt in path.points] == [0, -1, 1, -1, 1]
    assert path.termination == PERFECT_FIT


def test_backtracking_ends_at_least_squares(backtrack, backtrack_gram):
    path = plus_path(backtrack_gram, backtrack.z_tilde, make_mcp(0.5))
    ls = np.linalg.solve([[1.0, 0.25], [0.25, 1.0]], backtrack.z_tilde)
    assert np.allclose(path.final_beta(), ls, atol=1e-10)


def test_zero_response_gives_single_point():
    path = plus_path(GramView.from_matrix(np.eye(3)), np.zeros(3), make_lasso())
    assert path.k_star == 0
    assert path.termination == PERFECT_FIT
    assert math.isinf(path.points[0].tau)


def test_first_turning_point_is_max_gradient():
    z = np.array([0.2, -0.9, 0.5])
    path = plus_path(GramView.from_matrix(np.eye(3)), z, make_mcp(2.0))
    assert path.points[0].lam == pytest.approx(0.9)
    assert path.points[1].eta[1] == -1


def test_unstandardized_design_rejected():
    data = RegressionData(np.array([[1.0, 0.0], [0.0, 3.0]]), [1.0, 1.0])
    with pytest.raises(NotStandardized):
        compute_path(data, make_lasso())
    compute_path(data, make_lasso(), PathOptions(allow_unstandardized=True))


def test_step_cap():
    rng = np.random.default_rng(3)
    data = random_instance(rng, n=40, p=30)
    path = compute_path(data, make_mcp(2.0), PathOptions(k_max=2))
    assert path.termination == STEP_CAP
    assert path.k_star <= 3


def test_lambda_floor_stops_early():
    rng = np.random.default_rng(4)
    data = random_instance(rng, n=40, p=30)
    full = compute_path(data, make_lasso())
    cut = compute_path(data, make_lasso(), PathOptions(lambda_min=0.2))
    assert cut.termination == LAMBDA_FLOOR
    assert cut.points[-1].lam <= 0.2
    assert cut.k_star <= full.k_star
    for a, b in zip(cut.points, full.points):
        assert a.tau == b.tau


def test_transition_indicator_moves_one_coordinate():
    eta = np.array([0, 1, 2])
    out = transition_indicator(eta, 0, None, None, g_j=-1.0)
    assert list(out) == [-1, 1, 2]
    assert list(eta) == [0, 1, 2]


def test_segment_slope_singular():
    gram = GramView.from_matrix(np.eye(2))
    # MCP gamma=1: Q = 1 - 1 = 0 on the concave segment
    from mcplus.penalty import PenaltySpec

    pen = PenaltySpec((0.0, 1.0), (1.0, 0.0), (1.0, 0.0), kind="mcp")
    with pytest.raises(SingularQ):
        segment_slope(np.array([1, 0]), np.array([1.0, 0.0]), gram, pen)


def test_hitting_times_first_segment_orthonormal():
    gram = GramView.from_matrix(np.eye(2))
    z = np.array([1.0, 0.5])
    eta = np.array([1, 0])
    pen = make_lasso()
    slope = segment_slope(eta, z, gram, pen)
    hits = hitting_times(1.0, np.zeros(2), eta, slope, 1, z, gram, pen)
    # coordinate 1 enters when z_2 tau = 1, i.e. after delta = 1
    assert hits.hit_index == 1
    assert hits.delta == pytest.approx(1.0)


@pytest.mark.parametrize("pen", PENALTY_CYCLE, ids=lambda p: p.label())
def test_kkt_at_turning_points(pen):
    rng = np.random.default_rng(11)
    data = random_instance(rng, n=60, p=25)
    path = compute_path(data, pen)
    assert path.termination == PERFECT_FIT
    for pt in path.points[1:]:
        if pt.is_ray:
            continue
        assert verify_kkt(data, pt.lam, pt.beta, pen).passed


def test_interpolation_is_linear_between_points():
    rng = np.random.default_rng(12)
    data = random_instance(rng, n=50, p=10)
    path = compute_path(data, make_mcp(3.0))
    for k in range(1, len(path.points)):
        if path.points[k].is_ray:
            continue
        lam, beta = interpolate(path, k - 0.5)
        tau = 0.5 * (path.points[k - 1].tau + path.points[k].tau)
        assert lam == pytest.approx(1 / tau)
        assert verify_kkt(data, lam, beta, make_mcp(3.0)).passed


def test_interpolation_beyond_end_freezes_beta():
    rng = np.random.default_rng(13)
    data = random_instance(rng, n=50, p=10)
    path = compute_path(data, make_lasso())
    k = path.k_star
    lam, beta = interpolate(path, k + 5)
    assert np.array_equal(beta, path.points[-1].beta)
    assert lam <= path.points[-1].lam


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.5, 1.5, 2.0, 4.0]))
def test_orthonormal_mcp_matches_firm(seed, gamma):
    n = 8
    X = orthonormal_design(n, seed)
    rng = np.random.default_rng(seed + 1)
    y = X @ rng.standard_normal(n)
    data = RegressionData(X, y)
    path = compute_path(data, make_mcp(gamma))
    z = data.z_tilde
    lam = 0.37 * np.max(np.abs(z))
    beta = beta_at_lambda(path, lam)
    if gamma > 1:
        expected = threshold("firm", z, lam, gamma)
    else:
        # for gamma < 1 the first-reach estimator jumps straight to least squares
        expected = threshold("hard", z, lam)
    assert np.max(np.abs(beta - expected)) <= 1e-10


@pytest.mark.parametrize("pen", PENALTY_CYCLE, ids=lambda p: p.label())
def test_verify_kkt_matches_scalar_derivative(pen):
    from mcplus.penalty import rho_dot

    rng = np.random.default_rng(21)
    data = random_instance(rng, n=30, p=12)
    lam = 0.3
    # include coordinates sitting exactly on knots
    beta = np.array([0.0, 0.3, -0.6, 1.0, 0.05, 0.0, 2.0, -0.42, 0.0, 0.9, -1.11, 0.0])
    grad = data.X.T @ (data.y - data.X @ beta) / data.n
    expected = [
        abs(grad[j] - math.copysign(rho_dot(pen, abs(b), lam), b)) if b else max(abs(grad[j]) - lam, 0.0)
        for j, b in enumerate(beta)
    ]
    assert verify_kkt(data, lam, beta, pen).max_violation == pytest.approx(max(expected), abs=1e-15)
