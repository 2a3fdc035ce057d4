"""Piecewise-linear solution paths for quadratic-spline penalized least squares.

The path is traced in rescaled coordinates ``tau = 1/lambda`` and
``b = beta/lambda``. Each segment has a fixed indicator vector ``eta`` (which
spline segment, with sign, each coordinate occupies); along it ``b`` moves
linearly in ``tau`` with slope ``s`` solving ``Q(eta) s_A = z_A`` where
``Q(eta) = Sigma_A - diag(v(eta_j))``. A segment ends at the first coordinate
to reach a knot of its spline segment or, for an inactive coordinate, the
first gradient to reach +-1.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AmbiguousTransition, NotStandardized, SingularMatrix, SingularQ
from .linalg import GramView, RegressionData, solve_dense
from .penalty import PenaltySpec

PERFECT_FIT = "PerfectFit"
STEP_CAP = "StepCap"
STALLED = "Stalled"
LAMBDA_FLOOR = "LambdaFloor"
RAY_ZERO_RTOL = 1e-12


@dataclass
class PathOptions:
    k_max: int = 5000
    tol_knot: float = 1e-9
    tol_kkt: float = 1e-9
    tol_fit: float = 1e-8
    loop_avoidance: bool = True
    allow_unstandardized: bool = False
    lambda_min: float | None = None


@dataclass(frozen=True)
class TurningPoint:
    """One breakpoint of the path.

    ``eta``, ``slope`` and ``xi`` describe the segment that *ends* here
    (segment ``k``); ``hit_index`` is the coordinate whose boundary was reached.
    The terminal ray has ``tau = inf``; there ``b`` and ``beta`` hold the
    limit of ``b/tau``.
    """

    k: int
    tau: float
    b: np.ndarray
    eta: np.ndarray
    slope: np.ndarray | None = None
    xi: int = 0
    delta: float = 0.0
    hit_index: int | None = None

    @property
    def lam(self) -> float:
        return 0.0 if math.isinf(self.tau) else 1.0 / self.tau

    @property
    def beta(self) -> np.ndarray:
        if math.isinf(self.tau):
            return self.b
        return self.b / self.tau

    @property
    def is_ray(self) -> bool:
        return math.isinf(self.tau)


@dataclass
class SolutionPath:
    points: list
    z_tilde: np.ndarray
    penalty: PenaltySpec
    termination: str
    visited: set = field(default_factory=set, repr=False)
    message: str = ""
    options: PathOptions = field(default_factory=PathOptions)

    @property
    def k_star(self) -> int:
        return len(self.points) - 1

    @property
    def p(self) -> int:
        return self.z_tilde.shape[0]

    def lambdas(self) -> np.ndarray:
        return np.array([pt.lam for pt in self.points])

    def taus(self) -> np.ndarray:
        return np.array([pt.tau for pt in self.points])

    def final_beta(self) -> np.ndarray:
        return self.points[-1].beta

    def etas(self) -> list:
        return [tuple(int(e) for e in pt.eta) for pt in self.points]


# ---------------------------------------------------------------------------
# single-step pieces


def init_path(z_tilde, penalty: PenaltySpec, options: PathOptions | None = None) -> SolutionPath:
    z = np.asarray(z_tilde, dtype=float)
    p = z.shape[0]
    options = options or PathOptions()
    zmax = np.max(np.abs(z)) if p else 0.0
    if zmax == 0:
        pt = TurningPoint(0, math.inf, np.zeros(p), np.zeros(p, dtype=int))
        return SolutionPath([pt], z, penalty, PERFECT_FIT, message="zero gradient at origin", options=options)
    pt = TurningPoint(0, 1.0 / zmax, np.zeros(p), np.zeros(p, dtype=int))
    return SolutionPath([pt], z, penalty, "", options=options)


def transition_indicator(eta, j: int, b_prev, b_prev2, g_j: float, direction: int | None = None) -> np.ndarray:
    """New indicator vector after coordinate ``j`` reaches a boundary.

    An inactive ``j`` enters with the sign of its gradient ``g_j``; an active
    one moves one spline segment in the direction it was travelling, given
    either explicitly or as ``sgn(b_prev[j] - b_prev2[j])``.
    """
    eta = np.array(eta, dtype=int)
    if eta[j] == 0:
        step = int(np.sign(g_j))
        if step == 0:
            raise AmbiguousTransition(f"coordinate {j} has zero gradient")
        eta[j] = step
    else:
        if direction is None:
            direction = int(np.sign(b_prev[j] - b_prev2[j]))
        if direction == 0:
            raise AmbiguousTransition(f"coordinate {j} did not move")
        eta[j] = eta[j] + int(direction)
    return eta


def segment_slope(eta, z_tilde, gram: GramView, penalty: PenaltySpec) -> np.ndarray:
    eta = np.asarray(eta)
    p = eta.shape[0]
    s = np.zeros(p)
    A = np.flatnonzero(eta)
    if A.size == 0:
        return s
    Q = gram.submatrix(A)
    Q[np.diag_indices_from(Q)] -= _slope_table(penalty)[np.abs(eta[A])]
    try:
        s[A] = solve_dense(Q, np.asarray(z_tilde, dtype=float)[A])
    except SingularMatrix as exc:
        raise SingularQ(f"Q(eta) singular on active set of size {A.size}", exc.condition) from exc
    return s


def segment_sign(eta_new, eta_old, slope, z_tilde, gram: GramView, hit_index: int, tol: float = 0.0) -> int:
    """Direction of travel in ``tau`` for a new segment (+1 or -1; 0 if undecided)."""
    j = hit_index
    if eta_new[j] != 0:
        q = (eta_new[j] - eta_old[j]) * slope[j]
    else:
        A = np.flatnonzero(eta_new)
        chi_s = gram.times(A, slope[A])[j]
        q = eta_old[j] * (chi_s - z_tilde[j])
    if abs(q) <= tol:
        return 0
    return 1 if q > 0 else -1


@dataclass
class Hits:
    delta: float
    hit_index: int | None
    deltas: np.ndarray
    new_values: np.ndarray  # indicator value each coordinate would move to
    targets: np.ndarray  # boundary value each coordinate is heading for
    rate: np.ndarray  # d(gradient)/d(tau) for every coordinate
    g: np.ndarray  # gradient at the start of the segment


@functools.lru_cache(maxsize=64)
def _knot_table(penalty: PenaltySpec) -> np.ndarray:
    """``t(i)`` for ``i = -m .. m+1`` stored at offset ``i + m``."""
    m = penalty.m
    table = np.array([penalty.t_of(i) for i in range(-m, m + 2)])
    table.setflags(write=False)
    return table


@functools.lru_cache(maxsize=64)
def _slope_table(penalty: PenaltySpec) -> np.ndarray:
    """``v(i)`` indexed by ``|i|``."""
    table = np.array([0.0, *penalty.v])
    table.setflags(write=False)
    return table


def hitting_times(tau, b, eta, slope, xi, z_tilde, gram: GramView, penalty: PenaltySpec, tol_rate: float = 0.0) -> Hits:
    """Distance in ``tau`` until each coordinate reaches the next side of ``S(eta)``."""
    z = np.asarray(z_tilde, dtype=float)
    eta = np.asarray(eta, dtype=int)
    p = z.shape[0]
    m = penalty.m
    A = np.flatnonzero(eta)
    g = tau * z - gram.times(A, b[A])
    rate = z - gram.times(A, slope[A])
    deltas = np.full(p, math.inf)
    new_values = np.zeros(p, dtype=int)
    targets = np.full(p, math.nan)
    table = _knot_table(penalty)
    active = eta != 0
    ds = xi * slope
    up = active & (ds > tol_rate)
    down = active & (ds < -tol_rate)
    new_values[up] = eta[up] + 1
    new_values[down] = eta[down] - 1
    targets[up] = table[eta[up] + 1 + m]
    targets[down] = table[eta[down] + m]
    moving = (up | down) & np.isfinite(targets)
    deltas[moving] = (targets[moving] - b[moving]) / ds[moving]
    da = xi * rate
    enter_up = ~active & (da > tol_rate)
    enter_down = ~active & (da < -tol_rate)
    targets[enter_up] = 1.0
    targets[enter_down] = -1.0
    new_values[enter_up] = 1
    new_values[enter_down] = -1
    entering = enter_up | enter_down
    deltas[entering] = (targets[entering] - g[entering]) / da[entering]
    np.maximum(deltas, 0.0, out=deltas)
    if np.all(np.isinf(deltas)):
        return Hits(math.inf, None, deltas, new_values, targets, rate, g)
    j = int(np.argmin(deltas))
    return Hits(float(deltas[j]), j, deltas, new_values, targets, rate, g)


# ---------------------------------------------------------------------------
# the tracer


def compute_path(data: RegressionData, penalty: PenaltySpec, options: PathOptions | None = None) -> SolutionPath:
    """Trace the main branch from ``beta = 0`` to a least-squares fit."""
    options = options or PathOptions()
    if not options.allow_unstandardized and not data.is_standardized():
        raise NotStandardized("columns must satisfy ||x_j||^2 = n (standardize or set allow_unstandardized)")
    gram = GramView.from_data(data)
    return plus_path(gram, data.z_tilde, penalty, options)


def plus_path(gram: GramView, z_tilde, penalty: PenaltySpec, options: PathOptions | None = None) -> SolutionPath:
    options = options or PathOptions()
    path = init_path(z_tilde, penalty, options)
    if path.termination:
        return path
    z = path.z_tilde
    p = z.shape[0]
    zmax = float(np.max(np.abs(z)))
    finite_knots = [t for t in penalty.knots if math.isfinite(t)]
    tol_knot = options.tol_knot * (1 + max(finite_knots))
    tol_kkt = options.tol_kkt * (1 + zmax)
    tol_rate = tol_kkt
    tol_fit = options.tol_fit * (1 + zmax)
    tau_floor = None if options.lambda_min is None else 1.0 / options.lambda_min

    pts = path.points
    visited = path.visited
    tau = pts[0].tau
    b = pts[0].b.copy()
    eta = pts[0].eta.copy()
    # entering candidates at the origin: |tau0 z_j| = 1
    g0 = tau * z
    cands = [(j, int(np.sign(z[j]))) for j in range(p) if abs(abs(g0[j]) - 1.0) <= tol_kkt]
    zero_run = 0
    k = 1

    def stop(status, msg=""):
        path.termination = status
        path.message = msg
        return path

    while True:
        if k > options.k_max:
            return stop(STEP_CAP, f"k_max={options.k_max} reached")
        chosen = None
        last_err = None
        for j, val in cands:
            eta_new = eta.copy()
            eta_new[j] = val
            if abs(val) > penalty.m:
                continue
            try:
                s = segment_slope(eta_new, z, gram, penalty)
            except SingularQ as exc:
                last_err = exc
                continue
            xi = segment_sign(eta_new, eta, s, z, gram, j, tol=1e-14 * (1 + zmax))
            if xi == 0:
                continue
            key = (eta_new.tobytes(), xi)
            if options.loop_avoidance and key in visited:
                continue
            chosen = (j, eta_new, s, xi, key)
            break
        if chosen is None:
            A = np.flatnonzero(eta)
            if last_err is not None:
                return stop(
                    STALLED,
                    f"singular Q at step {k} (|A|={A.size}, condition {last_err.condition:.3g}); "
                    "try perturbing gamma by +-1e-4",
                )
            return stop(STALLED, f"no admissible transition at step {k} among candidates {[c[0] for c in cands]}")
        j, eta_new, s, xi, key = chosen
        visited.add(key)
        hits = hitting_times(tau, b, eta_new, s, xi, z, gram, penalty, tol_rate=tol_rate)
        if math.isinf(hits.delta):
            if xi < 0:
                return stop(STALLED, f"segment {k} has no exit while tau decreases")
            A = np.flatnonzero(eta_new)
            fit_gap = float(np.max(np.abs(z - gram.times(A, s[A]))))
            # coordinates whose slope is rounding noise have limit exactly 0
            limit = s.copy()
            limit[np.abs(limit) <= RAY_ZERO_RTOL * float(np.max(np.abs(limit)))] = 0.0
            pts.append(TurningPoint(k, math.inf, limit, eta_new, s, xi, math.inf, None))
            if fit_gap <= tol_fit:
                return stop(PERFECT_FIT)
            return stop(STALLED, f"unbounded final segment without a least-squares fit (gap {fit_gap:.3g})")
        tau_new = tau + xi * hits.delta
        if not tau_new > 0:
            return stop(STALLED, f"tau became nonpositive at step {k}")
        b_new = b + (tau_new - tau) * s
        # everything sitting on its boundary at the new point is a candidate
        g_new = hits.g + (tau_new - tau) * hits.rate
        finite = np.isfinite(hits.deltas)
        act_new = eta_new != 0
        on_knot = finite & act_new & (np.abs(b_new - hits.targets) <= tol_knot)
        on_edge = finite & ~act_new & (np.abs(g_new - hits.targets) <= tol_kkt)
        hit = on_knot | on_edge
        hit[hits.hit_index] = True
        b_new[hit & act_new & (hits.targets == 0.0)] = 0.0
        nxt = [(int(i), int(hits.new_values[i])) for i in np.flatnonzero(hit)]
        if hits.delta <= 1e-14 * max(1.0, tau):
            zero_run += 1
            if zero_run > p:
                return stop(STALLED, f"more than p={p} consecutive zero-length steps at step {k}")
        else:
            zero_run = 0
        pts.append(TurningPoint(k, tau_new, b_new, eta_new, s, xi, hits.delta, hits.hit_index))
        tau, b, eta, cands = tau_new, b_new, eta_new, nxt
        if tau_floor is not None and tau >= tau_floor:
            return stop(LAMBDA_FLOOR, f"lambda_min={options.lambda_min} reached")
        k += 1


# ---------------------------------------------------------------------------
# reading the path


def interpolate(path: SolutionPath, x: float) -> tuple[float, np.ndarray]:
    """``(lambda, beta)`` at continuous step index ``x``.

    Finite segments interpolate linearly in ``(tau, b)``. On the terminal ray
    ``lambda`` is interpolated linearly down to 0 instead.
    """
    if x < 0:
        raise ValueError("x must be nonnegative")
    pts = path.points
    kstar = len(pts) - 1
    if x >= kstar:
        last = pts[-1]
        if x == kstar or kstar == 0:
            return last.lam, last.beta.copy()
        return (kstar / x) * last.lam, last.beta.copy()
    k = int(math.ceil(x))
    if k == x:
        pt = pts[k]
        return pt.lam, pt.beta.copy()
    f = x - (k - 1)
    prev, cur = pts[k - 1], pts[k]
    if cur.is_ray:
        lam = (1 - f) * prev.lam
        tau = 1.0 / lam
        b = prev.b + (tau - prev.tau) * cur.slope
        return lam, b / tau
    tau = (1 - f) * prev.tau + f * cur.tau
    b = (1 - f) * prev.b + f * cur.b
    return 1.0 / tau, b / tau


@dataclass
class KKTReport:
    max_violation: float
    worst_index: int | None
    passed: bool
    tol: float


def verify_kkt(data: RegressionData, lam: float, beta, penalty: PenaltySpec, tol: float = 1e-8) -> KKTReport:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    beta = np.asarray(beta, dtype=float)
    grad = data.X.T @ (data.y - data.X @ beta) / data.n
    active = beta != 0
    x = np.abs(beta[active]) / lam
    # exact knots belong to the left segment
    seg = np.searchsorted(penalty.knots, x, side="left") - 1
    deriv = lam * (np.asarray(penalty.u)[seg] - np.asarray(penalty.v)[seg] * x)
    viol = np.maximum(np.abs(grad) - lam, 0.0)
    viol[active] = np.abs(grad[active] - np.sign(beta[active]) * deriv)
    worst = int(np.argmax(viol)) if viol.size else None
    mx = float(viol[worst]) if viol.size else 0.0
    return KKTReport(mx, worst, mx <= tol, tol)
