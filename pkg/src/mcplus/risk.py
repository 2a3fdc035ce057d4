"""Risk estimation for penalized fits: SURE degrees of freedom, Cp, MSE
contrasts and the noise-level estimators built on them."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateDoF,
    EmptyActiveSet,
    LambdaNotReached,
    RankDeficientDesign,
    SingularMatrix,
    SingularQ,
)
from .estimator import FIRST_REACH, beta_at_lambda
from .linalg import GramView, RegressionData, eig_extremes, solve_dense
from .path import SolutionPath
from .penalty import PenaltySpec, rho_ddot

RANK_RTOL = 1e-10
SIGMA_BISECT_TOL = 1e-6
SIGMA_GRID_POINTS = 64


@dataclass(frozen=True)
class RiskReport:
    lam: float
    df_hat: float
    cp_hat: float
    sigma2_at_lambda: float
    active_count: int
    sigma2_used: float


def _gram(data_or_gram) -> GramView:
    if isinstance(data_or_gram, GramView):
        return data_or_gram
    return GramView.from_data(data_or_gram)


def _curvatures(beta, lam, penalty, A) -> np.ndarray:
    return np.array([rho_ddot(penalty, abs(beta[j]), lam) for j in A])


def q_matrix(beta, lam: float, gram: GramView, penalty: PenaltySpec) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    A = np.flatnonzero(beta)
    if A.size == 0:
        raise EmptyActiveSet("Q is undefined for an all-zero coefficient vector")
    return gram.submatrix(A) + np.diag(_curvatures(beta, lam, penalty, A))


def df_hat(beta, lam: float, gram: GramView, penalty: PenaltySpec) -> float:
    """``trace(Q^{-1} Sigma_A)``; 0 for an empty active set."""
    beta = np.asarray(beta, dtype=float)
    A = np.flatnonzero(beta)
    if A.size == 0:
        return 0.0
    curv = _curvatures(beta, lam, penalty, A)
    if not np.any(curv):
        # Q = Sigma_A, so Q^{-1} Sigma_A is the identity
        return float(A.size)
    S = gram.submatrix(A)
    try:
        M = solve_dense(S + np.diag(curv), S)
    except SingularMatrix as exc:
        raise SingularQ("Q(beta; lambda) is singular", exc.condition) from exc
    return float(np.trace(M))


def design_rank(X) -> int:
    R = scipy.linalg.qr(X, mode="r", pivoting=True)[0]
    d = np.abs(np.diag(R))
    if d.size == 0 or d[0] == 0:
        return 0
    return int(np.sum(d > RANK_RTOL * d[0]))


def projection(X, y) -> tuple[np.ndarray, int]:
    """Orthogonal projection of ``y`` on the column span of ``X`` and the rank used."""
    Qf, R, _ = scipy.linalg.qr(X, mode="economic", pivoting=True)
    d = np.abs(np.diag(R))
    r = int(np.sum(d > RANK_RTOL * d[0])) if d.size and d[0] > 0 else 0
    Qr = Qf[:, :r]
    return Qr @ (Qr.T @ y), r


def full_lse(data: RegressionData) -> np.ndarray:
    if design_rank(data.X) < data.p:
        raise RankDeficientDesign("the full least-squares fit needs rank(X) = p")
    return scipy.linalg.lstsq(data.X, data.y)[0]


def lse_sigma2(data: RegressionData) -> float:
    """``||y - X beta_tilde||^2 / (n - p)``."""
    if data.n <= data.p:
        raise RankDeficientDesign("residual variance needs n > p")
    beta = full_lse(data)
    r = data.y - data.X @ beta
    return float(r @ r) / (data.n - data.p)


def cp_hat(data: RegressionData, beta, lam: float, sigma2: float | None, penalty: PenaltySpec, gram=None) -> float:
    beta = np.asarray(beta, dtype=float)
    if sigma2 is None:
        sigma2 = lse_sigma2(data)
    mu_tilde, r = projection(data.X, data.y)
    resid = mu_tilde - data.X @ beta
    df = df_hat(beta, lam, _gram(gram if gram is not None else data), penalty)
    return float(resid @ resid) + sigma2 * (2 * df - r)


def mse_contrast(a, data: RegressionData, beta, lam: float, sigma2: float | None, penalty: PenaltySpec) -> float:
    """Unbiased estimate of ``E |a'(beta_hat - beta)|^2`` for full-rank designs."""
    a = np.asarray(a, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if not np.any(a):
        return 0.0
    gram = GramView.from_data(data)
    S = gram.submatrix(np.arange(data.p))
    cmin, _ = eig_extremes(S)
    if cmin <= penalty.kappa:
        warnings.warn(
            f"c_min(Sigma)={cmin:.3g} does not exceed the penalty concavity {penalty.kappa:.3g}",
            RuntimeWarning,
            stacklevel=2,
        )
    beta_tilde = full_lse(data)
    if sigma2 is None:
        sigma2 = lse_sigma2(data)
    n = data.n
    total = float(a @ (beta - beta_tilde)) ** 2 - sigma2 / n * float(a @ solve_dense(S, a))
    A = np.flatnonzero(beta)
    if A.size:
        Q = q_matrix(beta, lam, gram, penalty)
        try:
            total += 2 * sigma2 / n * float(a[A] @ solve_dense(Q, a[A]))
        except SingularMatrix as exc:
            raise SingularQ("Q(beta; lambda) is singular", exc.condition) from exc
    return total


def sigma2_at_lambda(data: RegressionData, path: SolutionPath, lam: float, penalty: PenaltySpec, gram=None) -> float:
    beta = beta_at_lambda(path, lam, FIRST_REACH)
    return sigma2_from_beta(data, beta, lam, penalty, _gram(gram if gram is not None else data))


def sigma2_from_beta(data, beta, lam, penalty, gram) -> float:
    df = df_hat(beta, lam, gram, penalty)
    dof = data.n - df
    if dof < 1:
        raise DegenerateDoF(f"n - df_hat = {dof:.3g} < 1 at lambda={lam:g}")
    r = data.y - data.X @ beta
    return float(r @ r) / dof


def risk_report(
    data: RegressionData, path: SolutionPath, lam: float, penalty: PenaltySpec, sigma2: float | None = None
) -> RiskReport:
    gram = GramView.from_data(data)
    beta = beta_at_lambda(path, lam, FIRST_REACH)
    df = df_hat(beta, lam, gram, penalty)
    s2_lam = sigma2_from_beta(data, beta, lam, penalty, gram)
    s2 = sigma2 if sigma2 is not None else lse_sigma2(data)
    cp = cp_hat(data, beta, lam, s2, penalty, gram=gram)
    return RiskReport(lam, df, cp, s2_lam, int(np.count_nonzero(beta)), s2)


def default_lambda_star(n: int, p: int) -> float:
    return math.sqrt(math.log(p) / (8.0 * n))


@dataclass(frozen=True)
class SigmaHat:
    sigma: float
    lambda_hat: float
    crossed: bool


def sigma_hat(
    data: RegressionData,
    path: SolutionPath,
    penalty: PenaltySpec,
    r0: float = 1.0,
    lambda_star: float | None = None,
    rule: str = "top-down",
) -> SigmaHat:
    """Solve ``sigma2(lambda) <= n lambda^2 / (r0 log p)`` for the level ``lambda_hat``.

    The inequality always holds for large ``lambda``. With ``rule="top-down"``
    the grid (turning points plus log-spaced refinement) is scanned downward
    and ``lambda_hat`` is the lower end of the qualifying interval reached
    from above. ``rule="smallest"`` instead returns the smallest qualifying
    grid level, which can land on isolated low levels where a nonconvex fit
    overfits. Crossings are refined by bisection. When the inequality holds
    all the way down, ``lambda_hat = lambda_star`` and ``crossed`` is False.
    """
    if rule not in ("top-down", "smallest"):
        raise ValueError(f"unknown rule {rule!r}")
    n, p = data.n, data.p
    if p < 2:
        raise ValueError("noise estimation needs p >= 2")
    if lambda_star is None:
        lambda_star = default_lambda_star(n, p)
    logp = math.log(p)
    gram = GramView.from_data(data)
    lam0 = path.points[0].lam

    def value(lam):
        try:
            return sigma2_from_beta(data, beta_at_lambda(path, lam), lam, penalty, gram)
        except (DegenerateDoF, LambdaNotReached):
            return None

    def ok(lam):
        s2 = value(lam)
        return s2 is not None and s2 <= n * lam * lam / (r0 * logp)

    def bisect(lo, hi):
        # ok(hi) holds and ok(lo) fails
        while hi - lo > SIGMA_BISECT_TOL:
            mid = 0.5 * (lo + hi)
            if ok(mid):
                hi = mid
            else:
                lo = mid
        return hi

    # above this level the zero fit always qualifies
    lam_top = max(lam0, math.sqrt(float(data.y @ data.y) * r0 * logp) / n, lambda_star)
    grid = {lambda_star, lam_top, min(lam0, lam_top)}
    grid.update(pt.lam for pt in path.points if lambda_star <= pt.lam <= lam_top)
    grid.update(np.geomspace(lambda_star, lam_top, SIGMA_GRID_POINTS).tolist())
    grid = sorted(float(g) for g in grid if g >= lambda_star)
    flags = [ok(g) for g in grid]
    lam_hat = None
    if rule == "top-down":
        for i in range(len(grid) - 1, 0, -1):
            if flags[i] and not flags[i - 1]:
                lam_hat = bisect(grid[i - 1], grid[i])
                break
            if not flags[i]:
                break
    else:
        for i, f in enumerate(flags):
            if f:
                lam_hat = grid[i] if i == 0 else bisect(grid[i - 1], grid[i])
                break
    if lam_hat is None or (flags[0] and lam_hat == grid[0]):
        s2 = value(lambda_star)
        if not flags[0]:
            warnings.warn("noise-level equation has no crossing above lambda_star", RuntimeWarning, stacklevel=2)
        return SigmaHat(math.sqrt(s2) if s2 is not None else math.nan, lambda_star, False)
    return SigmaHat(math.sqrt(value(lam_hat)), lam_hat, True)
