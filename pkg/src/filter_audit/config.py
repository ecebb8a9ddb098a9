"""Config files: ``key = value`` lines under ``[section]`` headers.

Vectors are comma-separated reals; lists of vectors (``thetas``, ``axes``)
and estimator panels separate entries with ``;``.  Coordinates in config
files are 1-based (``omega = 2`` is the variance of a Gaussian).  Grid axes
accept either an explicit list or ``start:stop:count``.

Every key is checked against a fixed schema; unknown sections or keys are
errors, as are out-of-range values.
"""

from __future__ import annotations

import ast
import configparser
import io
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .audit import AuditConfig, CounterfactualPair, Estimator, InfoPoint
from .decisions import AffineMap, ValuePair
from .errors import ConfigParseError, DomainError, ValidationError
from .families import FamilyId, ModelFamily, get_family
from .montecarlo import Experiment, ExperimentPlan, parse_estimator
from .platforms import AffineShift, Constant, Lookup, PlatformSpec
from .regcost import FeasibleQuery, RewardKind, RewardSpec

COMMANDS = ("audit", "audit-batch", "mc", "cost", "diversity", "decision-demo")

_SCHEMA = {
    "run": {"seed", "workers"},
    "model": {"family", "sigma2"},
    "audit": {"epsilon", "m", "estimator", "info_point", "oracle_theta", "alpha", "symmetrized"},
    "platform": {"mapping", "theta", "base", "inflation", "inflation_coords"},
    "platform.table": None,  # free-form token keys
    "pairs": None,  # free-form pair labels
    "mc": {
        "experiment", "trials", "theta", "theta_prime", "epsilons", "ms", "info_point", "estimator",
        "thetas", "m", "max_m", "theta0", "rho", "weights", "panel", "calibration_trials", "theta_star",
        "reference", "omega", "kappas", "epsilon", "shared_coords", "target", "axes",
    },
    "cost": {"epsilon", "m", "info_point", "reference", "shared_coords", "theta_star"},
    "reward": {"kind", "target", "omega"},
    "reward.table": None,
    "grid": None,  # axis1, axis2, ...
    "diversity": {"z0", "z1", "direction", "theta_star", "reference", "omega", "kappa_max", "points",
                  "epsilon", "m", "shared_coords", "info_point"},
    "decision": {"theta", "theta_prime", "theta0", "m", "rho", "trials", "calibration_trials",
                 "w0", "c0", "w1", "c1", "panel", "records"},
}
_CLAIM_KEYS = {"bound", "where", "series"}

_REQUIRED = {
    "audit": ("audit", "platform", "pairs"),
    "audit-batch": ("audit", "platform", "pairs"),
    "mc": ("mc",),
    "cost": ("cost", "reward", "grid"),
    "diversity": ("diversity",),
    "decision-demo": ("decision",),
}


@dataclass
class RunSpecs:
    """Validated specs extracted from one config document."""

    command: Optional[str] = None
    seed: int = 0
    workers: int = 1
    family: Optional[ModelFamily] = None
    audit: Optional[AuditConfig] = None
    alpha: float = 0.0
    symmetrized: bool = False
    platform: Optional[PlatformSpec] = None
    pairs: list = field(default_factory=list)
    plan: Optional[ExperimentPlan] = None
    claims: list = field(default_factory=list)  # (name, bound, where, series)
    reward: Optional[RewardSpec] = None
    query: Optional[FeasibleQuery] = None
    axes: list = field(default_factory=list)
    theta_star: Optional[tuple] = None
    diversity: dict = field(default_factory=dict)
    decision: dict = field(default_factory=dict)


# -- value parsers --------------------------------------------------------------


class _Section:
    def __init__(self, name: str, items: dict):
        self.name = name
        self.items = items

    def _err(self, key, constraint):
        return ValidationError(f"[{self.name}] {key}: {constraint}", field=f"{self.name}.{key}")

    def has(self, key) -> bool:
        return key in self.items

    def raw(self, key, default=None):
        return self.items.get(key, default)

    def real(self, key, default=None, lo=None, hi=None, what=None) -> Optional[float]:
        text = self.items.get(key)
        if text is None:
            return default
        try:
            v = float(text)
        except ValueError:
            raise self._err(key, f"expected a real number, got {text!r}") from None
        if math.isnan(v) or (lo is not None and v < lo) or (hi is not None and v > hi):
            raise self._err(key, what or f"must lie in [{lo}, {hi}]")
        return v

    def probability(self, key, default=None) -> Optional[float]:
        return self.real(key, default, 0.0, 1.0, f"{key} must lie in [0,1]")

    def integer(self, key, default=None, lo=None) -> Optional[int]:
        text = self.items.get(key)
        if text is None:
            return default
        try:
            v = int(text)
        except ValueError:
            raise self._err(key, f"expected an integer, got {text!r}") from None
        if lo is not None and v < lo:
            raise self._err(key, f"must be >= {lo}")
        return v

    def boolean(self, key, default=False) -> bool:
        text = self.items.get(key)
        if text is None:
            return default
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise self._err(key, f"expected true/false, got {text!r}")

    def vector(self, key, default=None) -> Optional[list]:
        text = self.items.get(key)
        if text is None:
            return default
        try:
            return [float(t) for t in text.split(",")]
        except ValueError:
            raise self._err(key, f"expected comma-separated reals, got {text!r}") from None

    def coords(self, key, r: int, default=()) -> tuple:
        """1-based coordinate list in the file, 0-based in the returned tuple."""
        text = self.items.get(key)
        if text is None:
            return tuple(default)
        try:
            vals = [int(t) for t in text.split(",") if t.strip()]
        except ValueError:
            raise self._err(key, f"expected comma-separated coordinate numbers, got {text!r}") from None
        for v in vals:
            if not 1 <= v <= r:
                raise self._err(key, f"coordinate {v} is outside 1..{r}")
        return tuple(v - 1 for v in vals)

    def vectors(self, key) -> Optional[list]:
        text = self.items.get(key)
        if text is None:
            return None
        try:
            return [[float(t) for t in chunk.split(",")] for chunk in text.split(";") if chunk.strip()]
        except ValueError:
            raise self._err(key, f"expected ';'-separated vectors, got {text!r}") from None

    def axis(self, key) -> list:
        text = self.items[key].strip()
        if ":" in text:
            parts = text.split(":")
            try:
                start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            except (ValueError, IndexError):
                raise self._err(key, f"expected start:stop:count, got {text!r}") from None
            if len(parts) != 3 or count < 1:
                raise self._err(key, f"expected start:stop:count with count >= 1, got {text!r}")
            return [float(v) for v in np.linspace(start, stop, count)]
        v = self.vector(key)
        return v

    def choice(self, key, enum_cls, default=None):
        text = self.items.get(key)
        if text is None:
            return default
        try:
            return enum_cls(text.strip().lower())
        except ValueError:
            allowed = ", ".join(e.value for e in enum_cls)
            raise self._err(key, f"must be one of {allowed}, got {text!r}") from None


def _theta(sec: _Section, key: str, family: ModelFamily, required=True, closed=False):
    v = sec.vector(key)
    if v is None:
        if required:
            raise ValidationError(f"[{sec.name}] missing required key {key!r}", field=f"{sec.name}.{key}")
        return None
    try:
        return tuple(float(t) for t in family.check(v, closed=closed))
    except DomainError as exc:
        raise ValidationError(f"[{sec.name}] {key}: {exc}", field=f"{sec.name}.{key}") from None


def _guard(sec_name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (DomainError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"[{sec_name}] {exc}", field=sec_name) from None


# -- document level -------------------------------------------------------------


def read_document(text: str) -> configparser.ConfigParser:
    cp = configparser.ConfigParser(
        delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=None,
        interpolation=None, strict=True, empty_lines_in_values=False,
    )
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError("key outside any [section]", exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigParseError(f"duplicate section [{exc.section}]", exc.lineno) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigParseError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        try:
            line = ast.literal_eval(line)  # configparser reports the repr of the line
        except (ValueError, SyntaxError):
            pass
        raise ConfigParseError(f"cannot parse {line.strip()!r}; expected 'key = value'", lineno) from None
    return cp


def apply_overrides(cp: configparser.ConfigParser, overrides) -> None:
    """Apply ``section.key=value`` overrides in place."""
    for item in overrides or ():
        target, sep, value = item.partition("=")
        section, dot, key = target.strip().rpartition(".")
        if not sep or not dot or not key:
            raise ValidationError(f"override {item!r} must look like section.key=value", field=item)
        if not cp.has_section(section):
            cp.add_section(section)
        cp.set(section, key, value.strip())


def document_text(cp: configparser.ConfigParser) -> str:
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def parse_config(text: str, command: Optional[str] = None, overrides=()) -> RunSpecs:
    """Parse and validate a config document for ``command``.

    Raises :class:`ConfigParseError` (with line number) for malformed text
    and :class:`ValidationError` naming the key and constraint otherwise.
    """
    cp = read_document(text)
    apply_overrides(cp, overrides)
    return specs_from(cp, command)


def specs_from(cp: configparser.ConfigParser, command: Optional[str] = None) -> RunSpecs:
    if command is not None and command not in COMMANDS:
        raise ValidationError(f"unknown command {command!r}; expected one of {', '.join(COMMANDS)}", field="command")
    sections = {}
    for name in cp.sections():
        if name.startswith("claim."):
            allowed = _CLAIM_KEYS
        elif name in _SCHEMA:
            allowed = _SCHEMA[name]
        else:
            raise ValidationError(f"unknown section [{name}]", field=name)
        items = dict(cp.items(name))
        if allowed is not None:
            for key in items:
                if key not in allowed:
                    raise ValidationError(f"unknown key {key!r} in [{name}]", field=f"{name}.{key}")
        sections[name] = _Section(name, items)
    if command is not None:
        for req in _REQUIRED[command]:
            if req not in sections:
                raise ValidationError(f"command {command!r} needs a [{req}] section", field=req)

    specs = RunSpecs(command=command)
    run = sections.get("run", _Section("run", {}))
    specs.seed = run.integer("seed", 0, lo=0)
    specs.workers = run.integer("workers", 1, lo=1)

    model = sections.get("model", _Section("model", {}))
    fam_id = model.choice("family", FamilyId, FamilyId.GAUSSIAN_1D)
    kwargs = {}
    if model.has("sigma2"):
        if fam_id is not FamilyId.GAUSSIAN_KNOWN_VAR:
            raise ValidationError("[model] sigma2 only applies to family gaussian_known_var", field="model.sigma2")
        kwargs["sigma2"] = model.real("sigma2", lo=0.0, what="sigma2 must be positive")
    family = _guard("model", get_family, fam_id, **kwargs)
    specs.family = family

    if "audit" in sections:
        _parse_audit(specs, sections, family)
    if "platform" in sections:
        _parse_platform(specs, sections, family)
    if "pairs" in sections:
        for label, value in sections["pairs"].items.items():
            toks = [t.strip() for t in value.split(",")]
            if len(toks) != 2 or not all(toks):
                raise ValidationError(f"[pairs] {label}: expected 'x, x_prime', got {value!r}", field=f"pairs.{label}")
            specs.pairs.append(CounterfactualPair(toks[0], toks[1], label))
        if not specs.pairs:
            raise ValidationError("[pairs] needs at least one pair", field="pairs")
    if command == "audit" and len(specs.pairs) != 1:
        raise ValidationError(f"command 'audit' takes exactly one pair, got {len(specs.pairs)}", field="pairs")
    if "mc" in sections:
        _parse_mc(specs, sections, family)
    if "cost" in sections:
        _parse_cost(specs, sections, family)
    if "diversity" in sections:
        _parse_diversity(specs, sections["diversity"], family)
    if "decision" in sections:
        _parse_decision(specs, sections["decision"], family)
    return specs


def _parse_audit(specs: RunSpecs, sections, family):
    sec = sections["audit"]
    eps = sec.probability("epsilon", 0.05)
    m = sec.integer("m", 100, lo=1)
    oracle = _theta(sec, "oracle_theta", family, required=False)
    info = sec.choice("info_point", InfoPoint, InfoPoint.AT_THETA_TILDE)
    est = sec.choice("estimator", Estimator, Estimator.MVUE)
    specs.audit = _guard("audit", AuditConfig, family, eps, m, est, info, oracle)
    specs.alpha = sec.probability("alpha", 0.0)
    specs.symmetrized = sec.boolean("symmetrized", False)


def _parse_platform(specs: RunSpecs, sections, family):
    sec = sections["platform"]
    table = sections.get("platform.table", _Section("platform.table", {}))
    kind = (sec.raw("mapping") or "").strip().lower()
    rows = {}
    for token, _ in table.items.items():
        rows[token] = table.vector(token)
    if kind == "constant":
        mapping = Constant(_theta(sec, "theta", family, closed=True))
    elif kind == "lookup":
        if not rows:
            raise ValidationError("[platform.table] lookup mapping needs at least one token", field="platform.table")
        mapping = Lookup(rows)
    elif kind == "affine":
        base = sec.vector("base")
        if base is None:
            raise ValidationError("[platform] missing required key 'base'", field="platform.base")
        mapping = _guard("platform.table", AffineShift, base, rows)
    else:
        raise ValidationError(
            f"[platform] mapping: must be one of constant, lookup, affine, got {sec.raw('mapping')!r}",
            field="platform.mapping",
        )
    inflation = sec.real("inflation", None, lo=0.0, what="inflation must be nonnegative")
    coords = sec.coords("inflation_coords", family.r)
    specs.platform = _guard("platform", PlatformSpec, family, mapping, inflation, coords)


def _parse_mc(specs: RunSpecs, sections, family):
    sec = sections["mc"]
    exp = sec.choice("experiment", Experiment)
    if exp is None:
        raise ValidationError("[mc] missing required key 'experiment'", field="mc.experiment")
    params = {"family": family.family_id.value}
    if hasattr(family, "sigma2"):
        params["family_sigma2"] = family.sigma2
    int_keys = {"trials", "m", "max_m", "calibration_trials"}
    for key in sec.items:
        if key == "experiment":
            continue
        if key in int_keys:
            params[key] = sec.integer(key, lo=1)
        elif key in ("info_point", "estimator"):
            params[key] = sec.raw(key).strip().lower()
        elif key == "thetas":
            params[key] = sec.vectors(key)
        elif key == "axes":
            params[key] = sec.vectors(key)
        elif key == "panel":
            params[key] = [p.strip() for p in sec.raw(key).split(";") if p.strip()]
            for p in params[key]:
                parse_estimator(p)
        elif key in ("omega", "shared_coords"):
            params[key] = list(sec.coords(key, family.r))
        elif key == "ms":
            params[key] = [int(v) for v in sec.vector(key)]
        else:
            params[key] = sec.vector(key)
    if exp is Experiment.Z_TEST_EQUIVALENCE:
        params.pop("family", None)
        params.pop("family_sigma2", None)
    if "trials" in params and params["trials"] < 100 and exp in (
        Experiment.FPR_CALIBRATION, Experiment.POWER_CURVE, Experiment.UNBIASEDNESS,
        Experiment.Z_TEST_EQUIVALENCE, Experiment.GULLIBILITY_PANEL,
    ):
        raise ValidationError(f"[mc] trials: must be >= 100, got {params['trials']}", field="mc.trials")
    specs.plan = ExperimentPlan(exp, params, specs.seed, specs.workers)
    for name in sorted(s for s in sections if s.startswith("claim.")):
        csec = sections[name]
        bound = csec.raw("bound")
        if not bound or not bound.strip():
            raise ValidationError(f"[{name}] bound: expression is empty", field=f"{name}.bound")
        specs.claims.append((name[len("claim."):], bound.strip(), csec.raw("where"), csec.raw("series")))


def _query(sec: _Section, family, default_info=InfoPoint.AT_THETA_TILDE) -> FeasibleQuery:
    eps = sec.probability("epsilon", 0.05)
    m = sec.integer("m", 100, lo=1)
    info = sec.choice("info_point", InfoPoint, default_info)
    config = _guard(sec.name, AuditConfig, family, eps, m, info_point=info)
    reference = _theta(sec, "reference", family)
    return FeasibleQuery(reference, config, sec.coords("shared_coords", family.r))


def _parse_cost(specs: RunSpecs, sections, family):
    sec = sections["cost"]
    specs.query = _query(sec, family)
    specs.theta_star = _theta(sec, "theta_star", family, required=False)
    rsec = sections["reward"]
    kind = rsec.choice("kind", RewardKind, RewardKind.MEAN_ONLY)
    omega = rsec.coords("omega", family.r, default=range(1, family.r) if kind is RewardKind.MEAN_ONLY else ())
    if kind is RewardKind.MEAN_ONLY:
        target = rsec.real("target")
        if target is None:
            raise ValidationError("[reward] missing required key 'target'", field="reward.target")
        specs.reward = RewardSpec(kind, target=target, omega=omega)
    else:
        tsec = sections.get("reward.table")
        if tsec is None or not tsec.items:
            raise ValidationError("[reward.table] general_grid reward needs a table", field="reward.table")
        table = {}
        for key in tsec.items:
            try:
                point = tuple(float(t) for t in key.split(","))
            except ValueError:
                raise ValidationError(f"[reward.table] key {key!r} is not a parameter vector", field=f"reward.table.{key}") from None
            table[point] = tsec.real(key)
        specs.reward = RewardSpec(kind, table=table, omega=omega)
    gsec = sections["grid"]
    axes = []
    for i in range(1, family.r + 1):
        key = f"axis{i}"
        if not gsec.has(key):
            raise ValidationError(f"[grid] missing required key {key!r}", field=f"grid.{key}")
        axes.append(gsec.axis(key))
    extra = sorted(set(gsec.items) - {f"axis{i}" for i in range(1, family.r + 1)})
    if extra:
        raise ValidationError(f"unknown key {extra[0]!r} in [grid]", field=f"grid.{extra[0]}")
    specs.axes = axes


def _parse_diversity(specs: RunSpecs, sec: _Section, family):
    d = {
        "z0": _theta(sec, "z0", family),
        "z1": _theta(sec, "z1", family),
        "direction": sec.vector("direction"),
    }
    if d["direction"] is None:
        raise ValidationError("[diversity] missing required key 'direction'", field="diversity.direction")
    if len(d["direction"]) != family.r:
        raise ValidationError(f"[diversity] direction: must have length {family.r}", field="diversity.direction")
    if sec.has("theta_star"):
        d["theta_star"] = _theta(sec, "theta_star", family)
        d["query"] = _query(sec, family)
        d["omega"] = sec.coords("omega", family.r, default=range(1, family.r))
        d["kappa_max"] = sec.real("kappa_max", 10.0, lo=0.0, what="kappa_max must be nonnegative")
        d["points"] = sec.integer("points", 100, lo=2)
    specs.diversity = d


def _parse_decision(specs: RunSpecs, sec: _Section, family):
    r = family.r
    w1 = sec.vector("w1", [1.0] + [0.0] * (r - 1))
    w0 = sec.vector("w0", [0.0] * r)
    if len(w1) != r or len(w0) != r:
        raise ValidationError(f"[decision] w0/w1: weights must have length {r}", field="decision.w1")
    values = ValuePair(AffineMap(w0, sec.real("c0", 0.0)), AffineMap(w1, sec.real("c1", 0.0)))
    panel_text = sec.raw("panel") or "mvue"
    panel = [parse_estimator(p.strip()) for p in panel_text.split(";") if p.strip()]
    rho = sec.real("rho", 0.05, lo=0.0, hi=1.0, what="rho must lie in (0,1)")
    if not 0.0 < rho < 1.0:
        raise ValidationError("[decision] rho: rho must lie in (0,1)", field="decision.rho")
    trials = sec.integer("trials", 10_000, lo=1)
    specs.decision = {
        "theta": _theta(sec, "theta", family),
        "theta_prime": _theta(sec, "theta_prime", family),
        "theta0": _theta(sec, "theta0", family),
        "m": sec.integer("m", 50, lo=family.min_m),
        "rho": rho,
        "trials": trials,
        "calibration_trials": sec.integer("calibration_trials", trials, lo=1),
        "values": values,
        "panel": panel,
        "records": sec.integer("records", 20, lo=0),
    }
