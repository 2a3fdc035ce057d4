"""Quadratic spline penalties ``rho(t; lam) = lam^2 rho_m(t/lam)`` and univariate thresholds.

A spline is described by knots ``t_1 = 0 < ... < t_m``, intercepts ``u`` and
slopes ``v`` so that the derivative on ``[t_i, t_{i+1})`` is ``u_i - v_i t``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import BadGamma, InvalidPenalty, NegativeT

KNOT_TOL = 1e-12


@dataclass(frozen=True)
class PenaltySpec:
    knots: tuple
    u: tuple
    v: tuple
    kind: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "knots", tuple(float(x) for x in self.knots))
        object.__setattr__(self, "u", tuple(float(x) for x in self.u))
        object.__setattr__(self, "v", tuple(float(x) for x in self.v))
        validate(self)

    @property
    def m(self) -> int:
        return len(self.knots)

    @property
    def gamma(self) -> float:
        """Threshold factor ``t_m`` (infinite for the lasso)."""
        return self.knots[-1] if self.m > 1 else math.inf

    @property
    def kappa(self) -> float:
        return concavity(self)

    def label(self) -> str:
        if self.kind == "lasso":
            return "lasso"
        return f"{self.kind}({self.gamma:g})"

    # Extended per-indicator lookups: u(i) = u_|i|, v(i) = v_|i|, and the
    # signed knot t(i) bounding segment i from below.
    def u_of(self, i: int) -> float:
        return self.u[abs(i) - 1] if i != 0 else 0.0

    def v_of(self, i: int) -> float:
        return self.v[abs(i) - 1] if i != 0 else 0.0

    def t_of(self, i: int) -> float:
        m = self.m
        if i > 0:
            return self.knots[i - 1] if i <= m else math.inf
        k = -i + 1
        return -self.knots[k - 1] if k <= m else -math.inf

    def as_dict(self) -> dict:
        return {"kind": self.kind, "knots": list(self.knots), "u": list(self.u), "v": list(self.v)}


def validate(spec: PenaltySpec) -> PenaltySpec:
    t, u, v = spec.knots, spec.u, spec.v
    m = len(t)
    if m < 1 or len(u) != m or len(v) != m:
        raise InvalidPenalty("knots, u and v must have the same positive length")
    if not all(math.isfinite(x) for x in t + u + v):
        raise InvalidPenalty("penalty parameters must be finite")
    if t[0] != 0.0:
        raise InvalidPenalty("first knot must be 0")
    if any(t[i + 1] <= t[i] for i in range(m - 1)):
        raise InvalidPenalty("knots must be strictly increasing")
    if abs(u[0] - 1.0) > KNOT_TOL:
        raise InvalidPenalty("u_1 must equal 1")
    if v[-1] != 0.0:
        raise InvalidPenalty("v_m must equal 0")
    for i in range(m - 1):
        left = u[i] - v[i] * t[i + 1]
        right = u[i + 1] - v[i + 1] * t[i + 1]
        if abs(left - right) > KNOT_TOL * max(1.0, abs(left)):
            raise InvalidPenalty(f"derivative discontinuous at knot {i + 2}")
        if left < -KNOT_TOL:
            raise InvalidPenalty(f"derivative negative before knot {i + 2}")
    if u[-1] < -KNOT_TOL:
        raise InvalidPenalty("derivative negative on last segment")
    return spec


def make_lasso() -> PenaltySpec:
    return PenaltySpec((0.0,), (1.0,), (0.0,), kind="lasso")


def make_mcp(gamma: float) -> PenaltySpec:
    gamma = float(gamma)
    if not (gamma > 0 and math.isfinite(gamma)):
        raise BadGamma(f"MCP needs gamma > 0, got {gamma}")
    if abs(gamma - 1.0) < 1e-3:
        warnings.warn(
            "MCP with gamma near 1 makes Q(eta) nearly singular for standardized designs",
            RuntimeWarning,
            stacklevel=2,
        )
    return PenaltySpec((0.0, gamma), (1.0, 0.0), (1.0 / gamma, 0.0), kind="mcp")


def make_scad(gamma: float) -> PenaltySpec:
    gamma = float(gamma)
    if not (gamma > 2 and math.isfinite(gamma)):
        raise BadGamma(f"SCAD needs gamma > 2, got {gamma}")
    return PenaltySpec(
        (0.0, 1.0, gamma), (1.0, gamma / (gamma - 1.0), 0.0), (0.0, 1.0 / (gamma - 1.0), 0.0), kind="scad"
    )


def make_penalty(kind: str, gamma: float | None = None) -> PenaltySpec:
    kind = kind.lower()
    if kind == "lasso":
        return make_lasso()
    if gamma is None:
        raise BadGamma(f"{kind} requires gamma")
    if kind == "mcp":
        return make_mcp(gamma)
    if kind == "scad":
        return make_scad(gamma)
    raise InvalidPenalty(f"unknown penalty kind {kind!r}")


def segment_index(spec: PenaltySpec, x: float) -> int:
    """0-based segment containing ``x > 0``; exact knots belong to the left segment."""
    t = spec.knots
    i = 0
    while i + 1 < len(t) and x > t[i + 1]:
        i += 1
    return i


def rho_dot_unit(spec: PenaltySpec, x: float) -> float:
    i = segment_index(spec, x)
    return spec.u[i] - spec.v[i] * x


def rho_unit(spec: PenaltySpec, x: float) -> float:
    total = 0.0
    t = spec.knots
    for i in range(spec.m):
        a = t[i]
        if x <= a:
            break
        b = min(x, t[i + 1]) if i + 1 < spec.m else x
        total += spec.u[i] * (b - a) - spec.v[i] * (b * b - a * a) / 2
    return total


def rho(spec: PenaltySpec, t: float, lam: float) -> float:
    if t < 0:
        raise NegativeT(f"t must be nonnegative, got {t}")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return lam * lam * rho_unit(spec, t / lam)


def rho_dot(spec: PenaltySpec, t: float, lam: float) -> float:
    if t < 0:
        raise NegativeT(f"t must be nonnegative, got {t}")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    if t == 0:
        return lam * spec.u[0]
    return lam * rho_dot_unit(spec, t / lam)


def rho_ddot(spec: PenaltySpec, t: float, lam: float) -> float:
    """Piecewise-constant second derivative ``-v_i`` (left segment at knots)."""
    if t <= 0:
        return -spec.v[0]
    return -spec.v[segment_index(spec, t / lam)]


def concavity(spec: PenaltySpec) -> float:
    return max(spec.v)


def threshold(kind: str, z, lam: float, gamma: float | None = None):
    """Soft, hard or firm thresholding of ``z`` at level ``lam``; vectorized over ``z``."""
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    if kind == "soft":
        out = np.sign(z) * np.maximum(az - lam, 0.0)
    elif kind == "hard":
        out = np.where(az > lam, z, 0.0)
    elif kind == "firm":
        if gamma is None or not gamma > 1:
            raise BadGamma(f"firm threshold needs gamma > 1, got {gamma}")
        out = np.sign(z) * np.minimum(az, gamma * np.maximum(az - lam, 0.0) / (gamma - 1.0))
    else:
        raise ValueError(f"unknown threshold kind {kind!r}")
    return out if out.ndim else float(out)
