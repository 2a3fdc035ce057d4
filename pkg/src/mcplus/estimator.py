"""Estimators read off a computed path: first-reach and sparsest selections,
the oracle least-squares fit, and per-coordinate penalty rescaling."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import LambdaNotReached, NonpositiveWeight, SingularMatrix, SingularSubGram
from .linalg import RegressionData, solve_dense
from .path import PERFECT_FIT, SolutionPath

FIRST_REACH = "first-reach"
SPARSEST = "sparsest"


@dataclass(frozen=True)
class EstimatorChoice:
    rule: str
    lam: float

    def __post_init__(self):
        if self.rule not in (FIRST_REACH, SPARSEST):
            raise ValueError(f"unknown rule {self.rule!r}")
        if not (math.isfinite(self.lam) and self.lam > 0):
            raise ValueError("lambda must be finite and positive")


def _crossings(path: SolutionPath, lam: float):
    """Yield ``(x, beta)`` for every point of the path with ``lambda^(x) = lam``,
    in increasing ``x``. Segments that sit entirely at ``lam`` contribute
    their left end."""
    T = 1.0 / lam
    pts = path.points
    if pts[0].tau == T:
        yield 0.0, pts[0].beta.copy()
    for k in range(1, len(pts)):
        prev, cur = pts[k - 1], pts[k]
        lo, hi = min(prev.tau, cur.tau), max(prev.tau, cur.tau)
        if not (lo <= T <= hi) or prev.tau == T:
            continue
        if cur.tau == T:
            yield float(k), cur.beta.copy()
            continue
        b = prev.b + (T - prev.tau) * cur.slope
        if cur.is_ray:
            f = 1.0 - lam / prev.lam
        else:
            f = (T - prev.tau) / (cur.tau - prev.tau)
        yield k - 1 + f, b / T


def first_reach_x(path: SolutionPath, lam: float) -> float:
    """``x_lambda = inf{x : lambda^(x) <= lam}``."""
    pts = path.points
    if pts[0].lam <= lam:
        return 0.0
    for x, _ in _crossings(path, lam):
        return x
    if path.termination == PERFECT_FIT:
        return path.k_star * pts[-1].lam / lam
    raise LambdaNotReached(
        f"lambda={lam:g} is below the smallest level {min(p.lam for p in pts):g} reached by a {path.termination} path"
    )


def beta_at_lambda(path: SolutionPath, lam: float, rule: str = FIRST_REACH) -> np.ndarray:
    EstimatorChoice(rule, lam)
    pts = path.points
    p = path.p
    if pts[0].lam <= lam:
        return np.zeros(p)
    if rule == FIRST_REACH:
        for _, beta in _crossings(path, lam):
            return beta
    else:
        best = None
        for x, beta in _crossings(path, lam):
            nnz = int(np.count_nonzero(beta))
            if best is None or nnz < best[0]:
                best = (nnz, x, beta)
        if best is not None:
            return best[2]
    if path.termination == PERFECT_FIT:
        return pts[-1].beta.copy()
    raise LambdaNotReached(
        f"lambda={lam:g} is below the smallest level {min(p.lam for p in pts):g} reached by a {path.termination} path"
    )


def oracle_lse(data: RegressionData, B) -> np.ndarray:
    """Least squares with support restricted to ``B``."""
    B = np.asarray(sorted(set(int(j) for j in B)), dtype=int)
    beta = np.zeros(data.p)
    if B.size == 0:
        return beta
    XB = data.X[:, B]
    S = XB.T @ XB / data.n
    try:
        beta[B] = solve_dense(S, XB.T @ data.y / data.n)
    except SingularMatrix as exc:
        raise SingularSubGram("Sigma_B is singular", exc.condition) from exc
    return beta


def adaptive_rescale(data: RegressionData, weights) -> tuple[RegressionData, Callable[[np.ndarray], np.ndarray]]:
    """Reduce the penalty ``sum_j lam^2 rho_m(|beta_j| r_j / lam)`` to the plain one.

    With ``b_j = r_j beta_j`` the fit term becomes ``sum_j (x_j / r_j) b_j``, so
    the path is traced on columns ``x_j / r_j`` and coefficients are mapped
    back by ``beta_j = b_j / r_j``. A larger ``r_j`` penalizes coordinate ``j``
    more heavily. The rescaled design is not standardized; trace it with
    ``allow_unstandardized``.
    """
    r = np.asarray(weights, dtype=float).ravel()
    if r.shape[0] != data.p:
        raise ValueError(f"expected {data.p} weights, got {r.shape[0]}")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise NonpositiveWeight("weights must be finite and positive")
    scaled = RegressionData(data.X / r, data.y, col_norms=data.col_norms, standardized=data.standardized)

    def back(b):
        return np.asarray(b, dtype=float) / r

    return scaled, back
