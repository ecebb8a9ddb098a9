"""User model: beliefs formed from a feed, affine values, binary decisions.

A hypothetical user turns a feed into a belief ``theta^ = L(Z)`` and picks
``A1`` when ``v1(theta^) - v0(theta^)`` exceeds a threshold ``eta``.  With
the MVUE as ``L`` and ``eta`` set so the rule has false-positive rate
``rho`` on the boundary ``v1 = v0``, this is the most feed-sensitive user
among the ones modeled here; :func:`distinguishability_probe` measures how
far the counterfactual swap moves a given user's decisions.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _rng
from .errors import DomainError
from .families import Feed, ModelFamily

_BLOCK = 2000


class EstimatorKind(str, enum.Enum):
    MVUE = "mvue"
    BIASED = "biased"
    INFLATED = "inflated"


class Choice(str, enum.Enum):
    A0 = "A0"
    A1 = "A1"


@dataclass(frozen=True)
class EstimatorSpec:
    """How a user ingests a feed.

    ``BIASED`` adds a fixed ``offset`` to the MVUE.  ``INFLATED`` adds
    zero-mean Gaussian noise with variance ``(multiplier - 1) * Var(MVUE)``,
    the MVUE variance being evaluated at the user's own (clamped) estimate.
    Noisy beliefs are not projected back into the parameter space.
    """

    kind: EstimatorKind = EstimatorKind.MVUE
    offset: Optional[tuple] = None
    multiplier: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", EstimatorKind(self.kind))
        if self.kind is EstimatorKind.BIASED:
            if self.offset is None:
                raise DomainError("a biased estimator needs an offset vector")
            object.__setattr__(self, "offset", tuple(float(b) for b in np.atleast_1d(self.offset)))
        if self.kind is EstimatorKind.INFLATED and not self.multiplier >= 1.0:
            raise DomainError(f"variance multiplier must be >= 1, got {self.multiplier!r}")

    @classmethod
    def mvue(cls):
        return cls(EstimatorKind.MVUE)

    @classmethod
    def biased(cls, offset):
        return cls(EstimatorKind.BIASED, offset=offset)

    @classmethod
    def inflated(cls, multiplier: float):
        return cls(EstimatorKind.INFLATED, multiplier=float(multiplier))

    @property
    def label(self) -> str:
        if self.kind is EstimatorKind.BIASED:
            return "biased(" + ",".join(f"{b:g}" for b in self.offset) + ")"
        if self.kind is EstimatorKind.INFLATED:
            return f"inflated({self.multiplier:g})"
        return "mvue"

    def beliefs(self, family: ModelFamily, x: np.ndarray, rng: Optional[np.random.Generator]) -> np.ndarray:
        """Beliefs for a batch of scalar feeds shaped ``(..., m)``."""
        est = family.mvue_batch(x)
        if self.kind is EstimatorKind.BIASED:
            offset = np.asarray(self.offset)
            if offset.shape != (family.r,):
                raise DomainError(f"offset has length {offset.size}, family has r={family.r}")
            return est + offset
        if self.kind is EstimatorKind.INFLATED and self.multiplier > 1.0:
            var = family.mvue_variance(family.clamp(est), np.shape(x)[-1])
            noise = rng.standard_normal(est.shape)
            return est + np.sqrt((self.multiplier - 1.0) * var) * noise
        return est


@dataclass(frozen=True)
class AffineMap:
    weights: tuple
    intercept: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in np.atleast_1d(self.weights)))
        object.__setattr__(self, "intercept", float(self.intercept))

    def __call__(self, theta) -> np.ndarray:
        return np.asarray(theta, dtype=float) @ np.asarray(self.weights) + self.intercept


@dataclass(frozen=True)
class ValuePair:
    v0: AffineMap
    v1: AffineMap

    @classmethod
    def difference(cls, weights, intercept: float = 0.0) -> "ValuePair":
        """Values with ``v1 - v0 = w . theta + c`` and ``v0 = 0``."""
        w = tuple(np.atleast_1d(weights).astype(float))
        return cls(AffineMap(tuple(0.0 for _ in w), 0.0), AffineMap(w, intercept))

    def score(self, theta) -> np.ndarray:
        return self.v1(theta) - self.v0(theta)

    def within_premises(self, family: ModelFamily) -> bool:
        """Whether ``v1 - v0`` reads only the mean coordinate.

        For the shipped families that is the case where the per-item
        sufficient statistic carries ``v1 - v0`` directly, so the UMP rule
        applies; other value pairs still run but are flagged in reports.
        """
        w = np.asarray(self.v1.weights) - np.asarray(self.v0.weights)
        if w.shape != (family.r,):
            return False
        return bool(np.all(w[1:] == 0.0))


@dataclass(frozen=True)
class DecisionRecord:
    query_id: str
    choice: Choice
    score: float
    eta: float

    def to_dict(self) -> dict:
        return {"query_id": self.query_id, "choice": self.choice.value, "score": self.score, "eta": self.eta}


def form_belief(spec: EstimatorSpec, family: ModelFamily, feed: Feed, noise_seed=None) -> np.ndarray:
    """``theta^ = L(Z)`` for one feed."""
    rng = _rng.make_rng(noise_seed) if spec.kind is EstimatorKind.INFLATED else None
    return spec.beliefs(family, feed.scalars(), rng)


def decide(values: ValuePair, belief, eta: float, query_id: str = "") -> DecisionRecord:
    """Choose ``A1`` iff ``v1(belief) - v0(belief) > eta`` (ties go to ``A0``)."""
    score = float(values.score(belief))
    return DecisionRecord(query_id, Choice.A1 if score > eta else Choice.A0, score, float(eta))


def _check_rho(rho: float):
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0,1), got {rho!r}")


def _blocks(trials: int):
    start = 0
    while start < trials:
        yield start // _BLOCK, min(_BLOCK, trials - start)
        start += _BLOCK


def simulate_scores(values, family, theta, m, trials, seed, spec: EstimatorSpec = EstimatorSpec()) -> np.ndarray:
    """Scores ``v1(L(Z)) - v0(L(Z))`` over ``trials`` feeds drawn at ``theta``.

    Trials run in fixed-size blocks, each with its own derived stream, so the
    result depends only on ``seed`` and ``trials``.
    """
    theta = family.check(theta, closed=True)
    root = _rng.as_seed_sequence(seed)
    out = []
    for b, size in _blocks(trials):
        feed_ss, noise_ss = _rng.split(np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (b,)), 2)
        x = family.draw(theta, (size, m), np.random.default_rng(feed_ss))
        beliefs = spec.beliefs(family, x, np.random.default_rng(noise_ss))
        out.append(values.score(beliefs))
    return np.concatenate(out)


def calibrate_eta(values: ValuePair, family: ModelFamily, theta0, m: int, rho: float, trials: int, seed=None) -> float:
    """Empirical ``(1 - rho)``-quantile of the MVUE user's score at ``theta0``.

    ``theta0`` must sit on the boundary ``v1(theta0) = v0(theta0)``.
    """
    _check_rho(rho)
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    gap = float(values.score(family.check(theta0, closed=True)))
    scale = max(1.0, float(np.abs(values.v1(theta0))), float(np.abs(values.v0(theta0))))
    if abs(gap) > 1e-9 * scale:
        raise DomainError(f"theta0 is not on the G0 boundary: v1 - v0 = {gap!r}")
    scores = simulate_scores(values, family, theta0, m, trials, seed)
    return float(np.quantile(scores, 1.0 - rho, method="inverted_cdf"))


def decision_rate(values, family, theta, spec, eta, m, trials, seed) -> float:
    """Fraction of ``trials`` feeds at ``theta`` on which the user picks ``A1``."""
    return float(np.mean(simulate_scores(values, family, theta, m, trials, seed, spec) > eta))


def distinguishability_probe(
    family: ModelFamily,
    theta,
    theta_prime,
    estimator: EstimatorSpec,
    values: ValuePair,
    eta: float,
    m: int,
    trials: int,
    seed=None,
) -> float:
    """``|P(A1 | feeds at theta) - P(A1 | feeds at theta')|`` by Monte Carlo."""
    if trials < 1:
        raise DomainError(f"trials must be positive, got {trials}")
    s, sp = _rng.split(seed, 2)
    p = decision_rate(values, family, theta, estimator, eta, m, trials, s)
    pp = decision_rate(values, family, theta_prime, estimator, eta, m, trials, sp)
    return abs(p - pp)
