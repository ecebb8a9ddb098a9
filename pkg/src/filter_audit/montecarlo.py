"""Deterministic Monte Carlo experiments behind the acceptance checks.

Trials are grouped into fixed-size blocks.  Block ``b`` of curve point
``i`` in experiment ``e`` draws from the stream
``SeedSequence(master_seed, spawn_key=(e, i, b))``, so results depend only
on the plan, never on how blocks are scheduled across workers, and the
reduction always runs in block order.
"""

from __future__ import annotations

import ast
import enum
import math
import operator
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Any, Callable, Optional

import numpy as np

from . import _rng
from .audit import AuditConfig, Estimator, InfoPoint, audit_statistics
from .decisions import EstimatorSpec, ValuePair, calibrate_eta, distinguishability_probe
from .errors import DomainError, ValidationError
from .families import GaussianKnownVar, ModelFamily, get_family
from .regcost import FeasibleQuery, RewardSpec, cost_of_regulation, statistic_path

BLOCK = 500
Z99 = 2.576
MIN_TRIALS = 100


class Experiment(str, enum.Enum):
    FPR_CALIBRATION = "fpr_calibration"
    POWER_CURVE = "power_curve"
    UNBIASEDNESS = "unbiasedness"
    Z_TEST_EQUIVALENCE = "z_test_equivalence"
    GULLIBILITY_PANEL = "gullibility_panel"
    DIVERSITY_SWEEP = "diversity_sweep"
    COST_SWEEP = "cost_sweep"

    @property
    def code(self) -> int:
        return list(Experiment).index(self)


@dataclass(frozen=True)
class CurvePoint:
    abscissa: float
    estimate: float
    half_width: float
    trials: int
    series: str = ""
    stderr: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "series": self.series,
            "abscissa": self.abscissa,
            "estimate": self.estimate,
            "half_width": self.half_width,
            "trials": self.trials,
            "stderr": self.stderr,
        }


@dataclass(frozen=True)
class ExperimentPlan:
    experiment_id: Experiment
    parameters: dict
    master_seed: int = 0
    workers: int = 1

    def __post_init__(self):
        try:
            object.__setattr__(self, "experiment_id", Experiment(self.experiment_id))
        except ValueError:
            raise ValidationError(f"unknown experiment {self.experiment_id!r}", field="experiment_id") from None


def proportion_half_width(p: float, trials: int) -> float:
    """99% normal-approximation half-width, floored at ``1/trials``."""
    return max(Z99 * math.sqrt(p * (1.0 - p) / trials), 1.0 / trials)


# -- parameter handling -------------------------------------------------------

_COMMON = {"family", "family_sigma2", "trials"}
_SCHEMAS = {
    Experiment.FPR_CALIBRATION: _COMMON | {"theta", "epsilons", "ms", "info_point", "estimator"},
    Experiment.POWER_CURVE: _COMMON | {"theta", "theta_prime", "epsilons", "ms", "info_point", "estimator"},
    Experiment.UNBIASEDNESS: _COMMON | {"thetas", "m"},
    Experiment.Z_TEST_EQUIVALENCE: {"trials", "max_m"},
    Experiment.GULLIBILITY_PANEL: _COMMON
    | {"theta", "theta_prime", "theta0", "m", "rho", "weights", "panel", "calibration_trials"},
    Experiment.DIVERSITY_SWEEP: {"family", "family_sigma2", "theta_star", "reference", "omega", "kappas",
                                 "epsilon", "m", "shared_coords", "info_point"},
    Experiment.COST_SWEEP: {"family", "family_sigma2", "reference", "target", "omega", "epsilons", "m",
                            "axes", "shared_coords", "info_point"},
}
_STOCHASTIC = {
    Experiment.FPR_CALIBRATION,
    Experiment.POWER_CURVE,
    Experiment.UNBIASEDNESS,
    Experiment.Z_TEST_EQUIVALENCE,
    Experiment.GULLIBILITY_PANEL,
}


class _Params:
    def __init__(self, plan: ExperimentPlan):
        self.plan = plan
        self.p = dict(plan.parameters)
        unknown = sorted(set(self.p) - _SCHEMAS[plan.experiment_id])
        if unknown:
            raise ValidationError(
                f"unknown parameter(s) {unknown} for experiment {plan.experiment_id.value}", field=unknown[0]
            )

    def get(self, key, default=None):
        return self.p.get(key, default)

    def require(self, key):
        if key not in self.p:
            raise ValidationError(f"missing parameter {key!r}", field=key)
        return self.p[key]

    def family(self) -> ModelFamily:
        fam = self.p.get("family", "gaussian1d")
        if isinstance(fam, ModelFamily):
            return fam
        kwargs = {}
        if self.p.get("family_sigma2") is not None:
            kwargs["sigma2"] = float(self.p["family_sigma2"])
        try:
            return get_family(fam, **kwargs)
        except (DomainError, TypeError) as exc:
            raise ValidationError(str(exc), field="family") from None

    def trials(self) -> int:
        t = self.require("trials")
        if isinstance(t, bool) or int(t) != t or t < MIN_TRIALS:
            raise ValidationError(f"trials must be an integer >= {MIN_TRIALS}, got {t!r}", field="trials")
        return int(t)

    def theta(self, key, family: ModelFamily) -> np.ndarray:
        try:
            return family.check(self.require(key))
        except DomainError as exc:
            raise ValidationError(f"{key}: {exc}", field=key) from None

    def positive_int(self, key, default=None) -> int:
        v = self.p.get(key, default)
        if v is None or isinstance(v, bool) or int(v) != v or v < 1:
            raise ValidationError(f"{key} must be a positive integer, got {v!r}", field=key)
        return int(v)

    def floats(self, key, default=None) -> list:
        v = self.p.get(key, default)
        if v is None:
            raise ValidationError(f"missing parameter {key!r}", field=key)
        return [float(x) for x in np.atleast_1d(v)]

    def ints(self, key, default=None) -> list:
        vals = self.floats(key, default)
        for v in vals:
            if v != int(v) or v < 1:
                raise ValidationError(f"{key} entries must be positive integers, got {v!r}", field=key)
        return [int(v) for v in vals]

    def probabilities(self, key, default=None) -> list:
        vals = self.floats(key, default)
        for v in vals:
            if not 0.0 <= v <= 1.0:
                raise ValidationError(f"{key} entries must lie in [0,1], got {v!r}", field=key)
        return vals


# -- block runner -------------------------------------------------------------


def _run_blocks(plan: ExperimentPlan, point: int, trials: int, fn: Callable[[np.random.Generator, int], Any]) -> list:
    sizes = [min(BLOCK, trials - s) for s in range(0, trials, BLOCK)]
    code = plan.experiment_id.code

    def one(b: int):
        rng = np.random.default_rng(_rng.derive(plan.master_seed, code, point, b))
        return fn(rng, sizes[b])

    if plan.workers > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=plan.workers) as pool:
            return list(pool.map(one, range(len(sizes))))
    return [one(b) for b in range(len(sizes))]


def _rejection_rate(plan, point, config: AuditConfig, theta, theta_prime, trials) -> tuple:
    family = config.family
    threshold = config.threshold

    def block(rng, size):
        x = family.draw(theta, (size, config.m), rng)
        xp = family.draw(theta_prime, (size, config.m), rng)
        stats = audit_statistics(config, config.estimate_batch(x), config.estimate_batch(xp))
        return int(np.count_nonzero(stats >= threshold))

    hits = sum(_run_blocks(plan, point, trials, block))
    p = hits / trials
    return p, proportion_half_width(p, trials)


def _rate_experiment(plan: ExperimentPlan, params: _Params, alternative: bool) -> list:
    family = params.family()
    trials = params.trials()
    theta = params.theta("theta", family)
    theta_prime = params.theta("theta_prime", family) if alternative else theta
    epsilons = params.probabilities("epsilons", [0.05])
    ms = params.ints("ms", [2000])
    try:
        info_point = InfoPoint(params.get("info_point", "oracle"))
        estimator = Estimator(params.get("estimator", "mvue"))
    except ValueError as exc:
        raise ValidationError(str(exc), field="info_point") from None
    oracle = 0.5 * (theta + theta_prime)
    by_m = len(ms) > 1 or alternative

    points = []
    for i, (eps, m) in enumerate((e, m) for e in epsilons for m in ms):
        config = AuditConfig(family, eps, m, estimator, info_point, tuple(oracle))
        p, hw = _rejection_rate(plan, i, config, theta, theta_prime, trials)
        if by_m:
            points.append(CurvePoint(float(m), p, hw, trials, series=f"epsilon={eps:g}"))
        else:
            points.append(CurvePoint(eps, p, hw, trials, series=f"m={m}"))
    return points


def _unbiasedness(plan: ExperimentPlan, params: _Params) -> list:
    family = params.family()
    trials = params.trials()
    m = params.positive_int("m", 50)
    thetas = params.require("thetas")
    points = []
    for i, raw in enumerate(thetas):
        try:
            theta = family.check(raw)
        except DomainError as exc:
            raise ValidationError(f"thetas[{i}]: {exc}", field="thetas") from None

        def block(rng, size, theta=theta):
            est = family.mvue_batch(family.draw(theta, (size, m), rng))
            return est.sum(axis=0), (est**2).sum(axis=0)

        parts = _run_blocks(plan, i, trials, block)
        s1 = sum(p[0] for p in parts)
        s2 = sum(p[1] for p in parts)
        mean = s1 / trials
        var = np.maximum(s2 / trials - mean**2, 0.0) * trials / (trials - 1)
        se = np.sqrt(var / trials)
        label = ",".join(f"{t:g}" for t in theta)
        for k in range(family.r):
            points.append(
                CurvePoint(float(theta[k]), float(mean[k]), Z99 * float(se[k]), trials,
                           series=f"theta=({label}) {family.coordinate_names[k]}", stderr=float(se[k]))
            )
    return points


def z_test_verdict(xbar: float, xbar_prime: float, sigma2: float, m: int, epsilon: float) -> bool:
    """Classical two-sided two-sample z-test with known variance; True means reject."""
    if epsilon <= 0.0:
        return False
    z = (xbar - xbar_prime) / math.sqrt(2.0 * sigma2 / m)
    if epsilon >= 1.0:
        return abs(z) >= 0.0
    return abs(z) >= NormalDist().inv_cdf(1.0 - epsilon / 2.0)


def _z_test_equivalence(plan: ExperimentPlan, params: _Params) -> list:
    trials = params.trials()
    max_m = params.positive_int("max_m", 200)

    def block(rng, size):
        agree = 0
        for _ in range(size):
            sigma2 = float(rng.uniform(0.25, 4.0))
            m = int(rng.integers(2, max_m + 1))
            eps = float(rng.uniform(0.001, 0.5))
            mu = float(rng.normal())
            # half the instances are null pairs
            mu_p = mu if rng.random() < 0.5 else mu + float(rng.normal(scale=math.sqrt(sigma2 / m) * 3))
            family = GaussianKnownVar(sigma2)
            x = family.draw(np.array([mu]), (m,), rng)
            xp = family.draw(np.array([mu_p]), (m,), rng)
            config = AuditConfig(family, eps, m)
            stat = float(audit_statistics(config, family.mvue_batch(x), family.mvue_batch(xp)))
            alg = stat >= config.threshold
            agree += alg == z_test_verdict(x.mean(), xp.mean(), sigma2, m, eps)
        return agree

    agree = sum(_run_blocks(plan, 0, trials, block))
    p = agree / trials
    return [CurvePoint(float(trials), p, proportion_half_width(p, trials), trials, series="agreement")]


def parse_estimator(text) -> EstimatorSpec:
    """``"mvue"``, ``"biased:2,0"`` or ``"inflated:16"``."""
    if isinstance(text, EstimatorSpec):
        return text
    kind, _, arg = str(text).strip().partition(":")
    kind = kind.strip().lower()
    try:
        if kind == "mvue" and not arg:
            return EstimatorSpec.mvue()
        if kind == "biased":
            return EstimatorSpec.biased([float(a) for a in arg.split(",")])
        if kind == "inflated":
            return EstimatorSpec.inflated(float(arg))
    except ValueError:
        pass
    raise ValidationError(f"cannot parse estimator {text!r}; use mvue, biased:<b1,b2,...> or inflated:<c>")


def _gullibility(plan: ExperimentPlan, params: _Params) -> list:
    family = params.family()
    trials = params.trials()
    theta = params.theta("theta", family)
    theta_prime = params.theta("theta_prime", family)
    theta0 = params.theta("theta0", family)
    m = params.positive_int("m", 50)
    rho = params.floats("rho", [0.05])[0]
    weights = params.floats("weights", [1.0] + [0.0] * (family.r - 1))
    panel = [parse_estimator(s) for s in params.get("panel", ["mvue"])]
    cal_trials = params.positive_int("calibration_trials", trials)
    values = ValuePair.difference(weights)
    code = plan.experiment_id.code

    eta = calibrate_eta(values, family, theta0, m, rho, cal_trials, _rng.derive(plan.master_seed, code, 0))
    points = [CurvePoint(0.0, eta, 0.0, cal_trials, series="eta")]
    for i, spec in enumerate(panel):
        seed = _rng.derive(plan.master_seed, code, 1, i)
        probe = distinguishability_probe(family, theta, theta_prime, spec, values, eta, m, trials, seed)
        hw = max(Z99 * math.sqrt(0.5 / trials), 1.0 / trials)  # conservative: p(1-p) <= 1/4 on each side
        points.append(CurvePoint(float(i), probe, hw, trials, series=spec.label))
    return points


def _query_from(params: _Params, family: ModelFamily, epsilon: float) -> FeasibleQuery:
    m = params.positive_int("m", 100)
    info_point = params.get("info_point", "theta_tilde")
    config = AuditConfig(family, epsilon, m, info_point=info_point)
    shared = [int(s) for s in params.get("shared_coords", [])]
    reference = params.theta("reference", family)
    return FeasibleQuery(tuple(reference), config, tuple(shared))


def _diversity_sweep(plan: ExperimentPlan, params: _Params) -> list:
    family = params.family()
    eps = params.probabilities("epsilon", [0.05])[0]
    query = _query_from(params, family, eps)
    theta_star = params.theta("theta_star", family)
    omega = [int(o) for o in params.require("omega")]
    kappas = sorted(params.floats("kappas"))
    stats = statistic_path(theta_star, query, omega, kappas)
    return [CurvePoint(k, float(s), 0.0, 0, series="statistic") for k, s in zip(kappas, stats)]


def _cost_sweep(plan: ExperimentPlan, params: _Params) -> list:
    family = params.family()
    target = params.floats("target")[0]
    omega = [int(o) for o in params.get("omega", range(1, family.r))]
    reward = RewardSpec("mean_only", target=target, omega=tuple(omega))
    axes = params.require("axes")
    points = []
    for eps in sorted(params.probabilities("epsilons")):
        report = cost_of_regulation(reward, _query_from(params, family, eps), axes)
        points.append(CurvePoint(eps, report.cost, 0.0, report.grid_points, series="cost"))
    return points


_RUNNERS = {
    Experiment.FPR_CALIBRATION: lambda plan, p: _rate_experiment(plan, p, alternative=False),
    Experiment.POWER_CURVE: lambda plan, p: _rate_experiment(plan, p, alternative=True),
    Experiment.UNBIASEDNESS: _unbiasedness,
    Experiment.Z_TEST_EQUIVALENCE: _z_test_equivalence,
    Experiment.GULLIBILITY_PANEL: _gullibility,
    Experiment.DIVERSITY_SWEEP: _diversity_sweep,
    Experiment.COST_SWEEP: _cost_sweep,
}


def run_experiment(plan: ExperimentPlan) -> list:
    """Run a plan and return its curve points sorted by ``(series, abscissa)``.

    Identical plans give bit-identical output for any ``workers`` setting.
    """
    params = _Params(plan)
    if plan.experiment_id in _STOCHASTIC:
        params.trials()
    if isinstance(plan.workers, bool) or int(plan.workers) != plan.workers or plan.workers < 1:
        raise ValidationError(f"workers must be a positive integer, got {plan.workers!r}", field="workers")
    points = _RUNNERS[plan.experiment_id](plan, params)
    return sorted(points, key=lambda pt: (pt.series, pt.abscissa))


# -- claims -------------------------------------------------------------------

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv}
_CMPOPS = {
    ast.Lt: operator.lt,
    ast.LtE: operator.le,
    ast.Gt: operator.gt,
    ast.GtE: operator.ge,
    ast.Eq: operator.eq,
    ast.NotEq: operator.ne,
}
_FUNCS = {"abs": abs, "min": min, "max": max, "sqrt": math.sqrt}
_NAMES = ("abscissa", "estimate", "half_width", "trials", "stderr")


def _compile_claim(expr: str, what: str):
    if not expr or not expr.strip():
        raise ValidationError(f"{what} expression is empty", field=what)
    try:
        tree = ast.parse(expr.strip(), mode="eval")
    except SyntaxError as exc:
        raise ValidationError(f"cannot parse {what} {expr!r}: {exc.msg}", field=what) from None

    def ev(node, env):
        if isinstance(node, ast.Expression):
            return ev(node.body, env)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return node.value
        if isinstance(node, ast.Name):
            if node.id not in env:
                raise ValidationError(f"unknown name {node.id!r} in {what}", field=what)
            return env[node.id]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left, env), ev(node.right, env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -ev(node.operand, env)
        if isinstance(node, ast.BoolOp):
            vals = [ev(v, env) for v in node.values]
            return all(vals) if isinstance(node.op, ast.And) else any(vals)
        if isinstance(node, ast.Compare):
            left = ev(node.left, env)
            for op, comp in zip(node.ops, node.comparators):
                if type(op) not in _CMPOPS:
                    break
                right = ev(comp, env)
                if not _CMPOPS[type(op)](left, right):
                    return False
                left = right
            else:
                return True
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name) and node.func.id in _FUNCS:
            return _FUNCS[node.func.id](*[ev(a, env) for a in node.args])
        raise ValidationError(f"unsupported construct {ast.dump(node)[:40]} in {what}", field=what)

    def evaluate(env):
        return ev(tree, env)

    # dry run on a dummy point so malformed claims fail before any data is judged
    evaluate({n: 0.5 for n in _NAMES})
    return evaluate


@dataclass(frozen=True)
class ClaimResult:
    claim: str
    where: Optional[str]
    passed: bool
    violations: list = field(default_factory=list)
    checked: int = 0

    def to_dict(self) -> dict:
        return {
            "claim": self.claim,
            "where": self.where,
            "passed": self.passed,
            "checked": self.checked,
            "violations": self.violations,
        }


def summarize(points, claim: str, where: Optional[str] = None, series: Optional[str] = None) -> ClaimResult:
    """Evaluate a bound such as ``"abs(estimate - 0.05) <= 0.015"`` on every point.

    Names available: ``abscissa``, ``estimate``, ``half_width``, ``trials``,
    ``stderr``.  ``where`` restricts the points checked (``"abscissa >= 500"``)
    and ``series`` restricts to one curve.  Violations are listed as
    ``(series, abscissa)`` pairs.
    """
    points = list(points)
    if not points:
        raise ValidationError("no curve points to summarize", field="points")
    check = _compile_claim(claim, "claim")
    keep = _compile_claim(where, "where") if where is not None else None
    violations = []
    checked = 0
    for pt in points:
        if series is not None and pt.series != series:
            continue
        env = {n: getattr(pt, n) for n in _NAMES}
        if env["stderr"] is None:
            env["stderr"] = 0.0
        if keep is not None and not keep(env):
            continue
        checked += 1
        if not check(env):
            violations.append([pt.series, pt.abscissa])
    return ClaimResult(claim, where, not violations, violations, checked)
