"""Black-box counterfactual audit of a filtering algorithm.

For one counterfactual pair ``(x, x')`` the auditor queries the platform
for two feeds, estimates ``theta~ = L(F(x))`` and ``theta~' = L(F(x'))``
and rejects compliance (H1) when

    (theta~ - theta~')^T I(P) (theta~ - theta~') >= (2/m) chi2_r(1 - eps)

where the information point ``P`` is ``theta~`` by default, the midpoint for
the symmetric variant, or a supplied true parameter in verification mode.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from . import _rng
from .errors import AuditError, DomainError, ProtocolError, SingularityError
from .families import Feed, ModelFamily
from .special import chi2_isf


class Estimator(str, enum.Enum):
    MVUE = "mvue"
    MLE = "mle"


class InfoPoint(str, enum.Enum):
    AT_THETA_TILDE = "theta_tilde"
    AT_MIDPOINT = "midpoint"
    AT_ORACLE_THETA = "oracle"


class Hypothesis(str, enum.Enum):
    H0 = "H0"
    H1 = "H1"


class FeedOracle(Protocol):
    """What the auditor may do with a platform: ask for a feed, nothing else."""

    concurrent_safe: bool

    def __call__(self, token: str, m: int, seed) -> Feed: ...


@dataclass(frozen=True)
class AuditConfig:
    family: ModelFamily
    epsilon: float = 0.05
    m: int = 100
    estimator: Estimator = Estimator.MVUE
    info_point: InfoPoint = InfoPoint.AT_THETA_TILDE
    oracle_theta: Optional[tuple] = None

    def __post_init__(self):
        eps = float(self.epsilon)
        if not 0.0 <= eps <= 1.0:
            raise DomainError(f"epsilon must lie in [0,1], got {self.epsilon!r}")
        object.__setattr__(self, "epsilon", eps)
        if isinstance(self.m, bool) or int(self.m) != self.m or self.m < 1:
            raise DomainError(f"m must be a positive integer, got {self.m!r}")
        object.__setattr__(self, "m", int(self.m))
        object.__setattr__(self, "estimator", Estimator(self.estimator))
        object.__setattr__(self, "info_point", InfoPoint(self.info_point))
        if self.oracle_theta is not None:
            theta = self.family.check(self.oracle_theta)
            object.__setattr__(self, "oracle_theta", tuple(float(t) for t in theta))
        elif self.info_point is InfoPoint.AT_ORACLE_THETA:
            raise DomainError("info_point 'oracle' requires oracle_theta (verification mode only)")

    @property
    def threshold(self) -> float:
        return audit_threshold(self.family.r, self.m, self.epsilon)

    def estimate_batch(self, x: np.ndarray) -> np.ndarray:
        if self.estimator is Estimator.MVUE:
            return self.family.mvue_batch(x)
        return self.family.mle_batch(x)

    def to_dict(self) -> dict:
        return {
            "family": self.family.family_id.value,
            "epsilon": self.epsilon,
            "m": self.m,
            "estimator": self.estimator.value,
            "info_point": self.info_point.value,
            "oracle_theta": list(self.oracle_theta) if self.oracle_theta is not None else None,
        }


@dataclass(frozen=True)
class CounterfactualPair:
    x: str
    x_prime: str
    label: str = ""

    def swapped(self) -> "CounterfactualPair":
        return CounterfactualPair(self.x_prime, self.x, self.label)


@dataclass(frozen=True)
class AuditVerdict:
    hypothesis: Hypothesis
    statistic: float
    threshold: float
    theta_tilde: tuple
    theta_tilde_prime: tuple
    config: AuditConfig
    label: str = ""

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "hypothesis": self.hypothesis.value,
            "statistic": self.statistic,
            "threshold": self.threshold,
            "theta_tilde": list(self.theta_tilde),
            "theta_tilde_prime": list(self.theta_tilde_prime),
            "config": self.config.to_dict(),
        }


@dataclass(frozen=True)
class BatchVerdict:
    per_pair: list
    h1_count: int
    alpha: float
    passed: bool

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "h1_count": self.h1_count,
            "alpha": self.alpha,
            "pairs": len(self.per_pair),
            "failing_pairs": [v.label for v in self.per_pair if v.hypothesis is Hypothesis.H1],
            "per_pair": [v.to_dict() for v in self.per_pair],
        }


def audit_threshold(r: int, m: int, epsilon: float) -> float:
    """``(2/m) chi2_r(1 - eps)``; infinite at ``eps = 0``, zero at ``eps = 1``."""
    if epsilon <= 0.0:
        return math.inf
    return 2.0 / m * chi2_isf(r, epsilon)


def audit_statistics(config: AuditConfig, theta_tilde, theta_tilde_prime) -> np.ndarray:
    """Fisher-weighted squared distance, vectorized over leading axes.

    Estimates are clamped inward before the information matrix is formed;
    a non-finite estimate raises :class:`AuditError`.
    """
    family = config.family
    tt = np.asarray(theta_tilde, dtype=float)
    ttp = np.asarray(theta_tilde_prime, dtype=float)
    for est in (tt, ttp):
        if not np.all(np.isfinite(est)):
            bad = est if est.ndim == 1 else est[~np.all(np.isfinite(est), axis=-1)][0]
            raise AuditError(f"estimator produced a non-finite estimate {bad.tolist()}", estimate=bad)

    if config.info_point is InfoPoint.AT_THETA_TILDE:
        point = family.clamp(tt)
    elif config.info_point is InfoPoint.AT_MIDPOINT:
        point = family.clamp(0.5 * (tt + ttp))
    else:
        point = np.broadcast_to(np.asarray(config.oracle_theta, dtype=float), tt.shape)

    info = family.fisher_batch(point)
    if not np.all(np.isfinite(info)):
        raise AuditError("Fisher information is not finite at the clamped estimate", estimate=point)
    delta = tt - ttp
    stat = np.einsum("...i,...ij,...j->...", delta, info, delta)
    return np.maximum(stat, 0.0)


def decide(statistic: float, threshold: float) -> Hypothesis:
    return Hypothesis.H1 if statistic >= threshold else Hypothesis.H0


def audit_estimates(config: AuditConfig, theta_tilde, theta_tilde_prime, label: str = "") -> AuditVerdict:
    """Run the audit decision on already-computed estimates."""
    stat = float(audit_statistics(config, theta_tilde, theta_tilde_prime))
    thr = config.threshold
    return AuditVerdict(
        hypothesis=decide(stat, thr),
        statistic=stat,
        threshold=thr,
        theta_tilde=tuple(float(t) for t in np.ravel(theta_tilde)),
        theta_tilde_prime=tuple(float(t) for t in np.ravel(theta_tilde_prime)),
        config=config,
        label=label,
    )


def _query(blackbox, token: str, m: int, seed) -> np.ndarray:
    feed = blackbox(token, m, seed)
    if not isinstance(feed, Feed):
        raise ProtocolError(f"black box returned {type(feed).__name__} for {token!r}, expected a Feed")
    if feed.m != m:
        raise ProtocolError(f"black box returned {feed.m} items for {token!r}, requested m={m}")
    return feed.scalars()


def audit_pair(config: AuditConfig, blackbox: FeedOracle, pair: CounterfactualPair, seed=None) -> AuditVerdict:
    """Audit one counterfactual pair with two fresh feeds from the black box.

    ``seed`` fixes the two feed requests; ``None`` draws fresh entropy.
    """
    seed_x, seed_xp = _rng.split(seed, 2)
    z = _query(blackbox, pair.x, config.m, seed_x)
    zp = _query(blackbox, pair.x_prime, config.m, seed_xp)
    try:
        tt = config.estimate_batch(z)
        ttp = config.estimate_batch(zp)
        return audit_estimates(config, tt, ttp, label=pair.label)
    except SingularityError as exc:
        raise AuditError(str(exc)) from exc


def audit_symmetrized(config: AuditConfig, blackbox: FeedOracle, pair: CounterfactualPair, seed=None) -> AuditVerdict:
    """H1 when either ordering of the pair rejects.

    Each direction draws its own fresh feeds.  The returned statistic,
    threshold and estimates come from the direction with the larger
    statistic.
    """
    s_fwd, s_rev = _rng.split(seed, 2)
    forward = audit_pair(config, blackbox, pair, s_fwd)
    reverse = audit_pair(config, blackbox, pair.swapped(), s_rev)
    chosen = forward if forward.statistic >= reverse.statistic else reverse
    either = Hypothesis.H1 if Hypothesis.H1 in (forward.hypothesis, reverse.hypothesis) else Hypothesis.H0
    return AuditVerdict(
        hypothesis=either,
        statistic=chosen.statistic,
        threshold=chosen.threshold,
        theta_tilde=chosen.theta_tilde,
        theta_tilde_prime=chosen.theta_tilde_prime,
        config=config,
        label=pair.label,
    )


def batch_passes(h1_count: int, alpha: float, n_pairs: int) -> bool:
    # tolerance absorbs binary rounding in alpha * |S| (0.29 * 100 < 29)
    return h1_count <= alpha * n_pairs + 1e-9


def audit_batch(
    config: AuditConfig,
    blackbox: FeedOracle,
    pairs: Sequence[CounterfactualPair],
    alpha: float = 0.0,
    seed=None,
    workers: int = 1,
    symmetrized: bool = False,
) -> BatchVerdict:
    """Audit every pair; the platform fails when H1 count exceeds ``alpha * |S|``.

    All pairs are evaluated even after the allowance is exhausted, so the
    report lists every failing pair.  Pairs run concurrently only when the
    black box declares ``concurrent_safe``.
    """
    pairs = list(pairs)
    if not pairs:
        raise DomainError("audit_batch needs at least one counterfactual pair")
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha must lie in [0,1], got {alpha!r}")
    seeds = _rng.split(seed, len(pairs))
    run = audit_symmetrized if symmetrized else audit_pair

    def one(i: int) -> AuditVerdict:
        try:
            return run(config, blackbox, pairs[i], seeds[i])
        except (AuditError, ProtocolError) as exc:
            exc.pair_label = pairs[i].label or f"{pairs[i].x}/{pairs[i].x_prime}"
            exc.args = (f"pair {exc.pair_label!r}: {exc.args[0] if exc.args else exc}",) + exc.args[1:]
            raise

    if workers > 1 and getattr(blackbox, "concurrent_safe", False):
        with ThreadPoolExecutor(max_workers=workers) as pool:
            verdicts = list(pool.map(one, range(len(pairs))))
    else:
        verdicts = [one(i) for i in range(len(pairs))]

    h1 = sum(v.hypothesis is Hypothesis.H1 for v in verdicts)
    return BatchVerdict(per_pair=verdicts, h1_count=h1, alpha=float(alpha), passed=batch_passes(h1, alpha, len(pairs)))
