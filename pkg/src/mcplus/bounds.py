"""Computable constants from the selection and estimation theory of MC+:
universal penalty level, the effective dimension p-tilde, K*, sparsity caps,
the MCP gamma threshold, and an empirical sparse-eigenvalue probe."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar
from scipy.special import gammaln

from .errors import BadDims, BadParams, BadRange, BadSize, InvalidRegime
from .linalg import GramView, RegressionData, eig_extremes

PTILDE_TOL = 1e-10
KSTAR_MARGIN = 1e-9
FLOOR_EPS = 1e-9


@dataclass(frozen=True)
class SrcParams:
    c_star: float
    c_upper: float
    d_star: int = 1
    kappa: float = 0.0
    alpha: float = 0.5

    def __post_init__(self):
        if not (0 < self.c_star <= self.c_upper < math.inf):
            raise BadParams("need 0 < c_* <= c^* < inf")
        if self.kappa < 0:
            raise BadParams("kappa must be nonnegative")
        if not 0 < self.alpha < 1:
            raise BadParams("alpha must lie in (0, 1)")


def lambda_univ(n: int, p: int, sigma: float) -> float:
    if n < 1 or p < 2:
        raise BadDims("need n >= 1 and p >= 2")
    if sigma < 0:
        raise BadDims("sigma must be nonnegative")
    return sigma * math.sqrt(2.0 * math.log(p) / n)


def log_binom(a: int, b: int) -> float:
    return float(gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1))


def ptilde_rhs(p: int, d0: int, m: int, eps: float) -> float:
    return (2.0 / m) * (log_binom(p - d0, m) + math.log(1.0 / eps))


def ptilde_residual(ptilde_value: float, p: int, d0: int, m: int, eps: float) -> float:
    u = 2.0 * math.log(ptilde_value)
    return u - 1.0 - math.log(u) - ptilde_rhs(p, d0, m, eps)


def ptilde(p: int, d0: int, m: int, eps: float) -> float:
    """Solve ``2L - 1 - log(2L) = rhs`` for ``L = log p~`` on the branch ``2L >= 1``."""
    if not (1 <= m <= p - d0) or d0 < 0:
        raise BadRange(f"need 1 <= m <= p - d0, got p={p}, d0={d0}, m={m}")
    if not (0 < eps <= 1):
        raise BadRange(f"eps must lie in (0, 1], got {eps}")
    rhs = max(ptilde_rhs(p, d0, m, eps), 0.0)
    if rhs == 0.0:
        return math.exp(0.5)

    def f(u):
        return u - 1.0 - math.log(u) - rhs

    # u - 1 - log u >= u/2 - 1 + (1 - log 2) > u/2 - 1 for u >= 2, so this brackets
    hi = 2.0 * rhs + 4.0
    u = brentq(f, 1.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return math.exp(u / 2.0)


def kstar_w(c_star: float, c_upper: float, kappa: float, alpha: float) -> float:
    if kappa == 0:
        return 0.0
    ratio = c_star * c_upper / kappa**2
    if ratio <= 1:
        raise InvalidRegime(f"c_* c^* / kappa^2 = {ratio:.4g} must exceed 1")
    return (2.0 - alpha) / (ratio - 1.0)


def kstar_objective(t: float, c_star: float, c_upper: float, kappa: float, alpha: float) -> float:
    w = kstar_w(c_star, c_upper, kappa, alpha)
    num = (1.0 + w * (1.0 + (alpha / t) / (1.0 - alpha))) * c_upper / c_star - 1.0
    den = (2.0 + w * (1.0 + alpha - t * alpha)) * (1.0 - alpha)
    return num / den


def kstar(params: SrcParams) -> float:
    """Infimum over ``t`` of the K* ratio."""
    cs, cu, kappa, alpha = params.c_star, params.c_upper, params.kappa, params.alpha
    w = kstar_w(cs, cu, kappa, alpha)
    if w == 0.0:
        return (cu / cs - 1.0) / (2.0 - 2.0 * alpha)
    upper = (2.0 / w + 1.0 + alpha) / alpha
    lo, hi = KSTAR_MARGIN, upper - KSTAR_MARGIN * max(1.0, upper)

    def f(t):
        return kstar_objective(t, cs, cu, kappa, alpha)

    res = minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * max(1.0, upper), "maxiter": 500})
    best = float(res.fun)
    # the minimizer is near sqrt((c^*/c_*) / K* / (1 - alpha)); check that seed too
    seed = math.sqrt((cu / cs) / max(best, 1e-12) / (1.0 - alpha))
    if lo < seed < hi:
        best = min(best, f(seed))
    return best


def gamma_threshold(c_star: float, c_upper: float) -> float:
    if not (0 < c_star <= c_upper < math.inf):
        raise BadParams("need 0 < c_* <= c^*")
    return math.sqrt(4.0 + c_star / c_upper) / c_star


def sparsity_caps(d_star: int, c_star: float, c_upper: float, kappa: float, alpha: float) -> tuple[int, int]:
    if d_star < 1:
        raise BadParams("d* must be at least 1")
    k = kstar(SrcParams(c_star, c_upper, d_star, kappa, alpha))
    d1 = math.floor(d_star / (c_upper / c_star + 0.5) + FLOOR_EPS)
    d5 = math.floor(d_star / (1.0 + k) + FLOOR_EPS)
    return d1, d5


@dataclass(frozen=True)
class SrcProbe:
    fraction_pass: float
    cmin: np.ndarray
    cmax: np.ndarray

    def summary(self) -> dict:
        out = {"fraction_pass": self.fraction_pass}
        for name, arr in (("cmin", self.cmin), ("cmax", self.cmax)):
            sd = float(np.std(arr, ddof=1)) if arr.size > 1 else 0.0
            out[f"{name}_mean"] = float(np.mean(arr))
            out[f"{name}_mean_minus_2sd"] = float(np.mean(arr)) - 2 * sd
            out[f"{name}_mean_plus_2sd"] = float(np.mean(arr)) + 2 * sd
        return out


def src_probe(data: RegressionData, d: int, gamma: float, reps: int, seed: int) -> SrcProbe:
    """Sample random supports of size ``d`` and report their extreme Gram eigenvalues."""
    if not (1 <= d <= min(data.n, data.p)):
        raise BadSize(f"d must lie in [1, min(n, p)] = [1, {min(data.n, data.p)}]")
    if reps < 1:
        raise BadSize("reps must be positive")
    if not gamma > 0:
        raise BadParams("gamma must be positive")
    rng = np.random.default_rng(seed)
    gram = GramView.from_data(data)
    cmin = np.empty(reps)
    cmax = np.empty(reps)
    for r in range(reps):
        A = np.sort(rng.choice(data.p, size=d, replace=False))
        cmin[r], cmax[r] = eig_extremes(gram.submatrix(A))
    return SrcProbe(float(np.mean(cmin >= 1.0 / gamma)), cmin, cmax)
