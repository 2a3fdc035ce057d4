"""Dense small-matrix helpers: design bookkeeping, Gram columns, solves, eigenvalues."""
from __future__ import annotations

import threading
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BadDims, NotSymmetric, SingularMatrix, ZeroColumn

GRAM_MATERIALIZE_CAP = 4096
TOL_SOLVE = 1e-10
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class RegressionData:
    """Design ``X`` (rows are observations) and response ``y``.

    ``col_norms`` holds the Euclidean norms of the columns as they were
    before standardization; ``standardized`` records whether the columns
    have been rescaled to ``||x_j||^2 = n``.
    """

    X: np.ndarray
    y: np.ndarray
    col_norms: np.ndarray = None
    standardized: bool = False

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=float).ravel()
        if X.ndim != 2:
            raise BadDims("X must be a 2-d array")
        n, p = X.shape
        if n < 1 or p < 1:
            raise BadDims("X must have at least one row and one column")
        if y.shape[0] != n:
            raise BadDims(f"y has length {y.shape[0]} but X has {n} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise BadDims("X and y must be finite")
        norms = self.col_norms
        if norms is None:
            norms = np.linalg.norm(X, axis=0)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "col_norms", np.asarray(norms, dtype=float))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def z_tilde(self) -> np.ndarray:
        return self.X.T @ self.y / self.n

    def scales(self) -> np.ndarray:
        """Multipliers taking standardized coefficients back to the original scale."""
        if not self.standardized:
            return np.ones(self.p)
        return np.sqrt(self.n) / self.col_norms

    def to_original_scale(self, beta) -> np.ndarray:
        return np.asarray(beta, dtype=float) * self.scales()

    def is_standardized(self, rtol: float = 1e-10) -> bool:
        sq = np.einsum("ij,ij->j", self.X, self.X)
        return bool(np.all(np.abs(sq - self.n) <= rtol * self.n))


def standardize_columns(data: RegressionData) -> RegressionData:
    """Rescale every column so that ``||x_j||^2 = n``.

    Coefficients fitted on the result map back through
    ``beta_orig = beta_std * sqrt(n) / ||x_j||``.
    """
    X = data.X
    norms = np.linalg.norm(X, axis=0)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroColumn(int(zero[0]))
    n = X.shape[0]
    target = np.sqrt(n)
    scale = target / norms
    # keep already-normalized columns bit-for-bit
    already = np.abs(norms**2 - n) <= 1e-14 * n
    scale[already] = 1.0
    Xs = X * scale
    return RegressionData(Xs, data.y, col_norms=norms, standardized=True)


@dataclass
class GramView:
    """Lazy access to ``Sigma = X'X/n`` by columns.

    The full matrix is materialized up front when ``p <= cap``. A view must not
    be shared between concurrently running fits; the cache lock only protects
    against torn writes.
    """

    X: np.ndarray | None = None
    cap: int = GRAM_MATERIALIZE_CAP
    full: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        if self.full is None and self.X is not None:
            n, p = self.X.shape
            if p <= self.cap:
                S = self.X.T @ self.X / n
                self.full = (S + S.T) / 2
        if self.full is None and self.X is None:
            raise BadDims("GramView needs a design or a Gram matrix")

    @classmethod
    def from_data(cls, data: RegressionData, cap: int = GRAM_MATERIALIZE_CAP) -> "GramView":
        return cls(X=data.X, cap=cap)

    @classmethod
    def from_matrix(cls, sigma) -> "GramView":
        S = np.asarray(sigma, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise BadDims("Gram matrix must be square")
        if not np.allclose(S, S.T, atol=1e-12, rtol=0):
            raise NotSymmetric("Gram matrix is not symmetric")
        return cls(X=None, full=(S + S.T) / 2)

    @property
    def p(self) -> int:
        return self.full.shape[0] if self.full is not None else self.X.shape[1]

    def column(self, j: int) -> np.ndarray:
        if not 0 <= j < self.p:
            raise IndexError(f"column index {j} out of range for p={self.p}")
        if self.full is not None:
            return self.full[:, j]
        col = self._cache.get(j)
        if col is None:
            col = self.X.T @ self.X[:, j] / self.X.shape[0]
            col.setflags(write=False)
            with self._lock:
                col = self._cache.setdefault(j, col)
        return col

    def columns(self, A) -> np.ndarray:
        """``Sigma[:, A]`` as a p x |A| array."""
        A = np.asarray(A, dtype=int)
        if self.full is not None:
            return self.full[:, A]
        if A.size == 0:
            return np.zeros((self.p, 0))
        return np.column_stack([self.column(int(j)) for j in A])

    def submatrix(self, A) -> np.ndarray:
        A = _check_index_set(A, self.p)
        if self.full is not None:
            return self.full[A[:, None], A]
        return self.columns(A)[A, :]

    def times(self, A, v) -> np.ndarray:
        """``Sigma[:, A] @ v`` without forming the columns when a design is available."""
        A = np.asarray(A, dtype=int)
        if A.size == 0:
            return np.zeros(self.p)
        if self.full is not None:
            return self.full[:, A] @ v
        X = self.X
        return X.T @ (X[:, A] @ v) / X.shape[0]


def _check_index_set(A, p: int) -> np.ndarray:
    A = np.asarray(A, dtype=int).ravel()
    if A.size == 0:
        raise ValueError("index set must be nonempty")
    if A.size > 1 and np.any(np.diff(np.sort(A)) == 0):
        raise ValueError("index set has duplicate entries")
    if A.min() < 0 or A.max() >= p:
        raise IndexError("index set out of range")
    return A


def gram_column(g: GramView, j: int) -> np.ndarray:
    return g.column(j)


def gram_submatrix(g: GramView, A) -> np.ndarray:
    return g.submatrix(A)


def solve_dense(M, rhs, tol: float = TOL_SOLVE) -> np.ndarray:
    """Solve ``M x = rhs`` by row-pivoted LU.

    ``M`` may be indefinite. Raises :class:`SingularMatrix` when a pivot falls
    below ``1e-12 * max|M|``.
    """
    M = np.asarray(M, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise BadDims("M must be square")
    if M.shape[0] != rhs.shape[0]:
        raise BadDims("rhs length does not match M")
    if not (np.all(np.isfinite(M)) and np.all(np.isfinite(rhs))):
        raise BadDims("non-finite entries")
    if M.shape[0] == 0:
        return np.zeros(0)
    scale = np.max(np.abs(M))
    if scale == 0:
        raise SingularMatrix("zero matrix")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularMatrix
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_RTOL * scale:
        raise SingularMatrix("pivot below threshold", _cond(M))
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    r = rhs - M @ x
    if np.max(np.abs(r)) > tol * (1 + np.max(np.abs(rhs))):
        x = x + scipy.linalg.lu_solve((lu, piv), r, check_finite=False)
    return x


def _cond(M) -> float:
    with np.errstate(all="ignore"):
        try:
            return float(np.linalg.cond(M))
        except np.linalg.LinAlgError:
            return float("inf")


def eig_extremes(M, sym_tol: float = 1e-12) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise BadDims("M must be square")
    if np.max(np.abs(M - M.T), initial=0.0) > sym_tol * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise NotSymmetric("matrix is not symmetric within tolerance")
    w = np.linalg.eigvalsh((M + M.T) / 2)
    return float(w[0]), float(w[-1])
