import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mcplus.bounds import (
    SrcParams,
    gamma_threshold,
    kstar,
    kstar_objective,
    lambda_univ,
    ptilde,
    ptilde_residual,
    sparsity_caps,
    src_probe,
)
from mcplus.errors import BadDims, BadParams, BadRange, BadSize, InvalidRegime
from mcplus.linalg import RegressionData, standardize_columns


def test_lambda_univ_values():
    assert lambda_univ(300, 200, 1.0) == pytest.approx(math.sqrt(2 * math.log(200) / 300))
    assert lambda_univ(100, 60, 2.0) == pytest.approx(2 * math.sqrt(2 * math.log(60) / 100))
    with pytest.raises(BadDims):
        lambda_univ(10, 1, 1.0)


def test_ptilde_boundary_and_value():
    assert ptilde(10, 9, 1, 1.0) == pytest.approx(math.exp(0.5))
    val = ptilde(200, 10, 100, 1.0)
    assert abs(ptilde_residual(val, 200, 10, 100, 1.0)) <= 1e-10
    with pytest.raises(BadRange):
        ptilde(10, 5, 6, 1.0)
    with pytest.raises(BadRange):
        ptilde(10, 5, 2, 0.0)


def test_kstar_lasso_closed_form():
    # kappa = 0: K* = (c^*/c_* - 1)/(2 - 2 alpha)
    assert kstar(SrcParams(0.5, 1.5, kappa=0.0, alpha=0.5)) == pytest.approx(2.0)


def test_kstar_is_infimum_over_t():
    params = SrcParams(0.75, 1.25, kappa=1 / 3.0, alpha=0.5)
    k = kstar(params)
    w = (2 - 0.5) / (0.75 * 1.25 * 9 - 1)
    upper = (2 / w + 1.5) / 0.5
    ts = np.linspace(1e-3, upper - 1e-3, 20001)
    vals = [kstar_objective(t, 0.75, 1.25, 1 / 3.0, 0.5) for t in ts]
    assert k <= min(vals) + 1e-12
    assert k == pytest.approx(min(vals), rel=1e-6)


def test_kstar_invalid_regime():
    with pytest.raises(InvalidRegime):
        kstar(SrcParams(0.5, 1.5, kappa=2.0))
    with pytest.raises(BadParams):
        SrcParams(2.0, 1.0)


def test_gamma_threshold_and_caps():
    assert gamma_threshold(1.0, 1.0) == pytest.approx(math.sqrt(5))
    d1, d5 = sparsity_caps(30, 4 / 7, 10 / 7, 0.0, 0.5)
    assert (d1, d5) == (10, 12)


def test_src_probe():
    rng = np.random.default_rng(0)
    data = standardize_columns(RegressionData(rng.standard_normal((100, 40)), np.zeros(100)))
    probe = src_probe(data, 5, 2.0, 50, seed=1)
    assert 0.0 <= probe.fraction_pass <= 1.0
    assert np.all(probe.cmin <= probe.cmax)
    s = probe.summary()
    assert s["cmin_mean_minus_2sd"] <= s["cmin_mean"] <= s["cmin_mean_plus_2sd"]
    again = src_probe(data, 5, 2.0, 50, seed=1)
    assert np.array_equal(probe.cmin, again.cmin)
    with pytest.raises(BadSize):
        src_probe(data, 0, 2.0, 10, seed=1)


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 5000), st.data(), st.floats(1e-6, 1.0))
def test_ptilde_residual_property(p, data, eps):
    d0 = data.draw(st.integers(0, p - 1))
    m = data.draw(st.integers(1, p - d0))
    val = ptilde(p, d0, m, eps)
    assert 2 * math.log(val) >= 1 - 1e-12
    if val > math.exp(0.5):
        assert abs(ptilde_residual(val, p, d0, m, eps)) <= 1e-10
