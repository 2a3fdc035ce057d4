"""Simulation designs, selection and estimation metrics, and replication runners."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .bounds import lambda_univ
from .errors import BadPool, BadRho, ConfigError, InfeasiblePattern, LambdaNotReached
from .estimator import beta_at_lambda, first_reach_x
from .linalg import RegressionData
from .path import LAMBDA_FLOOR, PERFECT_FIT, PathOptions, compute_path
from .penalty import make_penalty
from .risk import default_lambda_star, sigma_hat

DESIGNS = ("grouped-exp1", "grouped-exp3", "ar-gaussian", "iid-gaussian")
PATTERNS = ("pm-constant", "blocks", "gaussian")
GRID_MULTIPLIERS = (0.5, 0.75, 1.0, 1.25, 1.5)
RECOVERY_TOL = 1e-8


def make_rng(seed, *key) -> np.random.Generator:
    """Counter-based generator for stream ``key`` of ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))))


def _normalize(X) -> np.ndarray:
    n = X.shape[0]
    return X * (math.sqrt(n) / np.linalg.norm(X, axis=0))


def _as_data(X, y=None) -> RegressionData:
    n, p = X.shape
    y = np.zeros(n) if y is None else y
    return RegressionData(X, y, col_norms=np.full(p, math.sqrt(n)), standardized=True)


# ---------------------------------------------------------------------------
# designs


def gen_design_grouped(n: int, p: int, pool_mult: int = 3, group_size: int = 10, seed=0) -> RegressionData:
    """Groups of highly correlated columns drawn greedily from a skewed pool.

    Pool entries are unit exponential minus chi-square(1); columns are
    centered and scaled to length sqrt(n). Each group takes one random
    column from the remaining pool plus the ``group_size - 1`` remaining
    columns most correlated with it; the group then leaves the pool.
    """
    if group_size < 1 or p % group_size:
        raise BadPool(f"group size {group_size} must divide p={p}")
    if pool_mult < 1:
        raise BadPool("pool must hold at least p columns")
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    size = pool_mult * p
    expo = -np.log1p(-rng.random((n, size)))
    chi2 = rng.standard_normal((n, size)) ** 2
    pool = expo - chi2
    pool -= pool.mean(axis=0)
    pool = _normalize(pool)
    remaining = np.arange(size)
    cols = []
    for _ in range(p // group_size):
        anchor = remaining[rng.integers(remaining.size)]
        others = remaining[remaining != anchor]
        corr = np.abs(pool[:, others].T @ pool[:, anchor]) / n
        top = others[np.argsort(-corr, kind="stable")[: group_size - 1]]
        group = np.concatenate(([anchor], top))
        cols.extend(group.tolist())
        remaining = np.setdiff1d(remaining, group, assume_unique=True)
    return _as_data(pool[:, cols])


def gen_design_ar(n: int, p: int, rho12: float, seed=0) -> RegressionData:
    if not abs(rho12) < 1:
        raise BadRho(f"|rho12| must be below 1, got {rho12}")
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    Z = rng.standard_normal((n, p))
    X = np.empty((n, p))
    X[:, 0] = Z[:, 0]
    c = math.sqrt(1.0 - rho12 * rho12)
    for j in range(1, p):
        X[:, j] = rho12 * X[:, j - 1] + c * Z[:, j]
    return _as_data(_normalize(X))


def gen_design_iid(n: int, p: int, seed=0) -> RegressionData:
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    return _as_data(_normalize(rng.standard_normal((n, p))))


def gen_beta(p: int, d0: int, pattern: str, beta_star: float, seed=0) -> tuple[np.ndarray, np.ndarray]:
    """Coefficients and their support.

    ``pm-constant`` puts ``+-beta_star`` on a uniform random support,
    ``gaussian`` puts i.i.d. N(0,1) values there, and ``blocks`` builds five
    blocks ``beta_star * (1,2,3,4,3,2,1)`` centered at distinct random
    multiples of 25 (``d0`` is then 35).
    """
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    beta = np.zeros(p)
    if pattern == "blocks":
        if d0 not in (None, 35):
            raise InfeasiblePattern("the block pattern has exactly 35 nonzeros")
        centers = np.array([c for c in range(25, p - 3, 25)])
        if centers.size < 5:
            raise InfeasiblePattern(f"p={p} leaves fewer than 5 block centers")
        shape = beta_star * np.array([1.0, 2, 3, 4, 3, 2, 1])
        for c in np.sort(rng.choice(centers, size=5, replace=False)):
            beta[c - 3 : c + 4] = shape
        return beta, np.flatnonzero(beta)
    if not 0 <= d0 <= p:
        raise InfeasiblePattern(f"d0={d0} must lie in [0, p]")
    if d0 == 0:
        return beta, np.zeros(0, dtype=int)
    support = np.sort(rng.choice(p, size=d0, replace=False))
    if pattern == "pm-constant":
        beta[support] = beta_star * rng.choice([-1.0, 1.0], size=d0)
    elif pattern == "gaussian":
        beta[support] = rng.standard_normal(d0)
    else:
        raise InfeasiblePattern(f"unknown pattern {pattern!r}")
    return beta, support


def gen_response(data: RegressionData, beta, sigma: float, seed=0) -> np.ndarray:
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    mu = data.X @ np.asarray(beta, dtype=float)
    if sigma == 0:
        return mu
    rng = make_rng(seed) if not isinstance(seed, np.random.Generator) else seed
    return mu + sigma * rng.standard_normal(data.n)


def corr_rule_gamma(data: RegressionData) -> float:
    """``2 / (1 - max_{j != k} |x_j' x_k| / n)``."""
    S = data.X.T @ data.X / data.n
    np.fill_diagonal(S, 0.0)
    return 2.0 / (1.0 - float(np.max(np.abs(S))))


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class Metrics:
    cs: int
    se_beta: float
    se_mu: float
    fn: int
    fp: int


def evaluate(beta_hat, beta, data: RegressionData) -> Metrics:
    beta_hat = np.asarray(beta_hat, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if beta_hat.shape != beta.shape or beta.shape[0] != data.p:
        raise ValueError("coefficient vectors must have length p")
    sel = beta_hat != 0
    true = beta != 0
    diff = beta_hat - beta
    fit = data.X @ diff
    return Metrics(
        int(np.array_equal(sel, true)),
        float(diff @ diff),
        float(fit @ fit) / data.n,
        int(np.sum(true & ~sel)),
        int(np.sum(sel & ~true)),
    )


# ---------------------------------------------------------------------------
# experiments


@dataclass
class ExperimentConfig:
    design: str
    n: int
    p: int
    d0: int
    beta_star: float = 0.5
    beta_pattern: str = "pm-constant"
    sigma: float = 1.0
    penalties: list = field(default_factory=lambda: ["lasso", {"kind": "mcp", "gamma": "corr-rule"}])
    lambdas: object = "univ"
    reps: int = 10
    seed: int = 0
    sigma_rule: str = "known"
    rho12: float = 0.5
    pool_mult: int = 3
    group_size: int | None = None
    k_max: int = 5000
    r0: float = 1.0

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        missing = {"design", "n", "p", "d0"} - set(d)
        if missing:
            raise ConfigError(f"missing config keys: {sorted(missing)}")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.design not in DESIGNS:
            raise ConfigError(f"design must be one of {DESIGNS}")
        if self.beta_pattern not in PATTERNS:
            raise ConfigError(f"beta_pattern must be one of {PATTERNS}")
        if not (isinstance(self.n, int) and isinstance(self.p, int) and self.n >= 1 and self.p >= 2):
            raise ConfigError("n must be >= 1 and p >= 2")
        if not (isinstance(self.reps, int) and self.reps >= 1):
            raise ConfigError("reps must be a positive integer")
        if self.beta_pattern != "blocks" and not 0 <= self.d0 <= self.p:
            raise ConfigError("d0 must lie in [0, p]")
        if self.sigma < 0:
            raise ConfigError("sigma must be nonnegative")
        if self.sigma_rule not in ("known", "estimated"):
            raise ConfigError("sigma_rule must be 'known' or 'estimated'")
        if not self.penalties:
            raise ConfigError("at least one penalty is required")
        for pen in self.penalties:
            _parse_penalty(pen)
        self.lambda_multipliers()

    @property
    def noiseless(self) -> bool:
        return self.sigma == 0

    def lambda_multipliers(self) -> list:
        """Levels as multiples of sigma (or of sigma-hat)."""
        univ = lambda_univ(self.n, self.p, 1.0)
        if self.lambdas == "univ":
            return [univ]
        if self.lambdas == "grid":
            return [m * univ for m in GRID_MULTIPLIERS]
        if isinstance(self.lambdas, (list, tuple)) and self.lambdas:
            vals = [float(v) for v in self.lambdas]
            if any(not (v > 0 and math.isfinite(v)) for v in vals):
                raise ConfigError("lambda values must be positive")
            return vals
        raise ConfigError("lambdas must be 'univ', 'grid' or a nonempty list")

    def to_dict(self) -> dict:
        return asdict(self)


def _parse_penalty(pen):
    if isinstance(pen, str):
        kind, gamma = pen, None
    elif isinstance(pen, dict):
        kind, gamma = pen.get("kind"), pen.get("gamma")
    else:
        raise ConfigError(f"bad penalty entry {pen!r}")
    if kind not in ("lasso", "mcp", "scad"):
        raise ConfigError(f"unknown penalty kind {kind!r}")
    if kind != "lasso":
        if gamma == "corr-rule":
            pass
        elif isinstance(gamma, (int, float)) and gamma > (2 if kind == "scad" else 0):
            pass
        else:
            raise ConfigError(f"{kind} needs a valid gamma or 'corr-rule'")
    return kind, gamma


@dataclass
class ReplicationResult:
    rep: int
    penalty: str
    gamma: float
    lam_mult: float
    lam: float
    status: str
    cs: float = math.nan
    se_beta: float = math.nan
    se_mu: float = math.nan
    steps: float = math.nan
    fn: float = math.nan
    fp: float = math.nan
    recovered: float = math.nan
    sigma_hat: float = math.nan
    gamma_rule: str = ""


def simulate_data(config: ExperimentConfig, rep: int):
    seed = config.seed
    if config.design == "grouped-exp1":
        data = gen_design_grouped(config.n, config.p, config.pool_mult, config.group_size or 10, make_rng(seed, rep, 0))
    elif config.design == "grouped-exp3":
        data = gen_design_grouped(config.n, config.p, config.pool_mult, config.group_size or 50, make_rng(seed, rep, 0))
    elif config.design == "ar-gaussian":
        data = gen_design_ar(config.n, config.p, config.rho12, make_rng(seed, rep, 0))
    else:
        data = gen_design_iid(config.n, config.p, make_rng(seed, rep, 0))
    beta, _ = gen_beta(config.p, config.d0, config.beta_pattern, config.beta_star, make_rng(seed, rep, 1))
    y = gen_response(data, beta, config.sigma, make_rng(seed, rep, 2))
    return RegressionData(data.X, y, col_norms=data.col_norms, standardized=True), beta


def run_replication(config: ExperimentConfig, rep: int) -> list:
    data, beta = simulate_data(config, rep)
    out = []
    mults = [math.nan] if config.noiseless else config.lambda_multipliers()
    for pen in config.penalties:
        kind, gamma = _parse_penalty(pen)
        if gamma == "corr-rule":
            gamma = corr_rule_gamma(data)
        penalty = make_penalty(kind, gamma)
        glabel = math.inf if kind == "lasso" else float(gamma)
        label = kind
        rule = _gamma_rule(pen)
        if config.noiseless:
            path = compute_path(data, penalty, PathOptions(k_max=config.k_max))
            res = ReplicationResult(rep, label, glabel, math.nan, 0.0, path.termination, gamma_rule=rule)
            if path.termination == PERFECT_FIT:
                bh = path.final_beta()
                m = evaluate(bh, beta, data)
                res.cs, res.se_beta, res.se_mu, res.fn, res.fp = m.cs, m.se_beta, m.se_mu, m.fn, m.fp
                res.recovered = float(np.max(np.abs(bh - beta), initial=0.0) <= RECOVERY_TOL)
                res.steps = path.k_star
            out.append(res)
            continue
        if config.sigma_rule == "known":
            scale, s_hat = config.sigma, math.nan
        else:
            scale = None
        lam_floor = min(mults) * (config.sigma if scale is not None else 1.0)
        if scale is None:
            lam_floor = min(default_lambda_star(data.n, data.p), lam_floor * 0.25)
        path = compute_path(data, penalty, PathOptions(k_max=config.k_max, lambda_min=lam_floor / 1.01))
        if scale is None:
            est = sigma_hat(data, path, penalty, r0=config.r0)
            scale = s_hat = est.sigma
            need = min(mults) * scale
            if path.termination == LAMBDA_FLOOR and need < path.points[-1].lam:
                path = compute_path(data, penalty, PathOptions(k_max=config.k_max, lambda_min=need / 1.01))
        for mult in mults:
            lam = mult * scale
            res = ReplicationResult(rep, label, glabel, mult, lam, path.termination, sigma_hat=s_hat, gamma_rule=rule)
            try:
                bh = beta_at_lambda(path, lam)
                x = first_reach_x(path, lam)
            except LambdaNotReached:
                out.append(res)
                continue
            res.status = "ok"
            m = evaluate(bh, beta, data)
            res.cs, res.se_beta, res.se_mu, res.fn, res.fp = m.cs, m.se_beta, m.se_mu, m.fn, m.fp
            res.steps = math.ceil(x)
            out.append(res)
    return out


def _gamma_rule(pen) -> str:
    kind, gamma = _parse_penalty(pen)
    if kind == "lasso":
        return "inf"
    return gamma if isinstance(gamma, str) else repr(float(gamma))


def _run_rep(args):
    config, rep = args
    return run_replication(config, rep)


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    replications: list
    summary: list


def run_experiment(config: ExperimentConfig, parallel: int = 1) -> ExperimentResult:
    config.validate()
    jobs = [(config, r) for r in range(config.reps)]
    if parallel > 1:
        with ProcessPoolExecutor(max_workers=parallel) as ex:
            per_rep = list(ex.map(_run_rep, jobs))
    else:
        per_rep = [_run_rep(j) for j in jobs]
    reps = [r for rows in per_rep for r in rows]
    return ExperimentResult(config, reps, summarize(reps, config.noiseless))


def _mean(vals) -> float:
    return float(np.mean(vals)) if len(vals) else math.nan


def summarize(reps: list, noiseless: bool) -> list:
    keys = []
    groups: dict = {}
    for r in reps:
        key = (r.penalty, r.gamma_rule, r.lam_mult)
        if key not in groups:
            keys.append(key)
            groups[key] = []
        groups[key].append(r)
    rows = []
    for key in keys:
        rs = groups[key]
        good = [r for r in rs if (r.status == PERFECT_FIT if noiseless else r.status == "ok")]
        row = {
            "penalty": key[0],
            "gamma_rule": key[1],
            "gamma": _mean([r.gamma for r in rs]) if key[0] != "lasso" else math.inf,
            "lambda_mult": key[2],
            "reps": len(rs),
            "failed": len(rs) - len(good),
            "cs": _mean([r.cs for r in good]),
            "se_beta": _mean([r.se_beta for r in good]),
            "se_mu": _mean([r.se_mu for r in good]),
            "steps": _mean([r.steps for r in good]),
            "fn": _mean([r.fn for r in good]),
            "fp": _mean([r.fp for r in good]),
        }
        if noiseless:
            rec = [r for r in good if r.recovered == 1]
            miss = [r for r in good if r.recovered != 1]
            row["recovery_pct"] = 100.0 * len(rec) / len(rs) if rs else math.nan
            row["fn_not_recovered"] = _mean([r.fn for r in miss])
            row["kstar_recovered"] = _mean([r.steps for r in rec])
            row["kstar_not_recovered"] = _mean([r.steps for r in miss])
        else:
            row["sigma_hat"] = _mean([r.sigma_hat for r in rs if not math.isnan(r.sigma_hat)])
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# output


def fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def summary_csv(result: ExperimentResult) -> str:
    rows = result.summary
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    cols = list(rows[0].keys()) if rows else []
    w.writerow(cols)
    for row in rows:
        w.writerow([fmt(row[c]) for c in cols])
    return buf.getvalue()


def long_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["penalty", "gamma", "lambda", "metric", "value"])
    for row in result.summary:
        for metric, value in row.items():
            if metric in ("penalty", "gamma", "gamma_rule", "lambda_mult"):
                continue
            w.writerow([row["penalty"], fmt(row["gamma"]), fmt(row["lambda_mult"]), metric, fmt(value)])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    return v


def replications_json(result: ExperimentResult) -> str:
    doc = {
        "config": result.config.to_dict(),
        "replications": [{k: _json_safe(v) for k, v in asdict(r).items()} for r in result.replications],
    }
    return json.dumps(doc, indent=1, sort_keys=True) + "\n"
