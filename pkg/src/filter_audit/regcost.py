"""Cost of regulation and content diversity over parameter space.

The platform's reward is evaluated at the estimate a feed induces, so the
optimization runs directly over ``theta``.  A candidate is feasible when
the audit statistic against the counterfactual side's estimate falls
strictly below the threshold.

When the platform controls both feeds it can give them the same diversity.
``FeasibleQuery.shared_coords`` models this: the counterfactual estimate
takes the candidate's values on those coordinates before the statistic is
formed, exactly as both feeds are inflated together in the zero-cost
construction.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .audit import AuditConfig, audit_statistics
from .errors import DomainError, WitnessNotFoundError

KAPPA_CAP = 1e9


class RewardKind(str, enum.Enum):
    MEAN_ONLY = "mean_only"
    GENERAL_GRID = "general_grid"


@dataclass(frozen=True)
class RewardSpec:
    """Reward over parameters.

    ``MEAN_ONLY`` is ``-(theta_1 - target)^2`` and ignores every other
    coordinate.  ``GENERAL_GRID`` looks the reward up in ``table`` keyed by
    parameter tuples.  ``omega`` lists (0-based) coordinates the reward is
    declared not to depend on.
    """

    kind: RewardKind
    target: float = 0.0
    table: Optional[Mapping[tuple, float]] = None
    omega: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", RewardKind(self.kind))
        object.__setattr__(self, "omega", tuple(sorted(int(i) for i in self.omega)))
        if self.kind is RewardKind.GENERAL_GRID:
            if not self.table:
                raise DomainError("a general_grid reward needs a nonempty table")
            table = {tuple(float(t) for t in k): float(v) for k, v in self.table.items()}
            object.__setattr__(self, "table", table)

    @classmethod
    def mean_only(cls, target: float, r: int = 2) -> "RewardSpec":
        return cls(RewardKind.MEAN_ONLY, target=float(target), omega=tuple(range(1, r)))

    def __call__(self, theta) -> float:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if self.kind is RewardKind.MEAN_ONLY:
            return -float((theta[0] - self.target) ** 2)
        key = tuple(float(t) for t in theta)
        try:
            return self.table[key]
        except KeyError:
            raise DomainError(f"reward table has no entry for {list(key)}") from None


@dataclass(frozen=True)
class FeasibleQuery:
    reference: tuple
    config: AuditConfig
    shared_coords: tuple = ()

    def __post_init__(self):
        ref = self.config.family.check(self.reference, closed=True)
        object.__setattr__(self, "reference", tuple(float(t) for t in ref))
        shared = tuple(sorted(int(i) for i in self.shared_coords))
        for i in shared:
            if not 0 <= i < self.config.family.r:
                raise DomainError(f"shared coordinate {i + 1} is outside 1..{self.config.family.r}")
        object.__setattr__(self, "shared_coords", shared)

    @property
    def threshold(self) -> float:
        return self.config.threshold

    def counterpart(self, theta) -> np.ndarray:
        ref = np.array(self.reference)
        if self.shared_coords:
            idx = list(self.shared_coords)
            ref = np.broadcast_to(ref, np.shape(theta)).copy()
            ref[..., idx] = np.asarray(theta, dtype=float)[..., idx]
        return ref


@dataclass(frozen=True)
class RegCostReport:
    unconstrained_opt: tuple  # (theta, reward)
    constrained_opt: Optional[tuple]
    cost: float
    witness_kappa: Optional[float] = None
    infeasible: bool = False
    grid_points: int = 0
    assumptions: tuple = (
        "the family can realize any interior parameter with some feed (richness assumed, not verified)",
    )

    def to_dict(self) -> dict:
        def opt(o):
            if o is None:
                return None
            return {"theta": list(o[0]), "reward": o[1]}

        return {
            "unconstrained_opt": opt(self.unconstrained_opt),
            "constrained_opt": opt(self.constrained_opt),
            "cost": "inf" if math.isinf(self.cost) else self.cost,
            "infeasible": self.infeasible,
            "witness_kappa": self.witness_kappa,
            "grid_points": self.grid_points,
            "assumptions": list(self.assumptions),
        }


def feasibility_statistic(theta, query: FeasibleQuery) -> np.ndarray:
    """Audit statistic of candidate(s) ``theta`` against the query's counterpart."""
    family = query.config.family
    theta = np.asarray(theta, dtype=float)
    flat = theta.reshape(-1, family.r)
    for row in flat:
        family.require_interior(row)
    return audit_statistics(query.config, theta, query.counterpart(theta))


def is_feasible(theta, query: FeasibleQuery) -> bool:
    """Parameter-level pass predicate: statistic strictly below threshold."""
    return bool(feasibility_statistic(theta, query) < query.threshold)


def _grid_points(axes: Sequence[Sequence[float]]) -> np.ndarray:
    pts = np.array(list(itertools.product(*[sorted(float(a) for a in ax) for ax in axes])), dtype=float)
    return pts  # lexicographic order


def cost_of_regulation(reward: RewardSpec, query: FeasibleQuery, axes: Sequence[Sequence[float]]) -> RegCostReport:
    """Grid maximization of reward with and without the audit constraint.

    ``axes`` holds the grid values per coordinate; ties resolve to the
    lexicographically smallest parameter.  An empty feasible set reports
    ``cost = inf`` and ``infeasible=True`` instead of raising.
    """
    family = query.config.family
    if len(axes) != family.r:
        raise DomainError(f"grid has {len(axes)} axes, family has r={family.r}")
    pts = _grid_points(axes)
    interior = np.array([family.is_interior(p) for p in pts])
    pts = pts[interior]
    if len(pts) == 0:
        raise DomainError("grid has no interior parameter points")
    rewards = np.array([reward(p) for p in pts])
    stats = audit_statistics(query.config, pts, query.counterpart(pts))
    feasible = stats < query.threshold

    i_best = int(np.argmax(rewards))  # first maximum = lexicographically smallest
    best = (tuple(pts[i_best].tolist()), float(rewards[i_best]))
    if not feasible.any():
        return RegCostReport(best, None, math.inf, infeasible=True, grid_points=len(pts))
    masked = np.where(feasible, rewards, -np.inf)
    j_best = int(np.argmax(masked))
    constrained = (tuple(pts[j_best].tolist()), float(rewards[j_best]))
    return RegCostReport(best, constrained, best[1] - constrained[1], grid_points=len(pts))


def omega_direction(r: int, omega: Sequence[int]) -> np.ndarray:
    d = np.zeros(r)
    d[list(omega)] = 1.0
    return d


def zero_cost_witness(reward: RewardSpec, query: FeasibleQuery, theta_star, tol: float = 1e-9):
    """Smallest inflation ``kappa`` along the reward-irrelevant coordinates that passes.

    Walks ``theta_star + kappa * e_omega`` with doubling from ``kappa = 1``
    until feasible, then bisects to ``tol``.  Returns ``(kappa, theta)``;
    ``kappa = 0`` when ``theta_star`` already passes.
    """
    family = query.config.family
    if not reward.omega:
        raise DomainError("the reward must ignore at least one coordinate (omega is empty)")
    theta_star = family.check(theta_star)
    direction = omega_direction(family.r, reward.omega)
    base_reward = reward(theta_star)

    def point(k: float) -> np.ndarray:
        return theta_star + k * direction

    def ok(k: float) -> bool:
        p = point(k)
        return family.is_interior(p) and is_feasible(p, query)

    if ok(0.0):
        return 0.0, theta_star
    lo, hi = 0.0, 1.0
    while not ok(hi):
        lo, hi = hi, 2.0 * hi
        if hi > KAPPA_CAP:
            raise WitnessNotFoundError(
                f"no inflation up to {KAPPA_CAP:g} along coordinates "
                f"{[i + 1 for i in reward.omega]} makes {theta_star.tolist()} feasible"
            )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    witness = point(hi)
    if reward(witness) != base_reward:
        raise DomainError(
            f"reward changed along the inflation direction ({base_reward!r} -> {reward(witness)!r}); "
            "omega does not describe coordinates the reward ignores"
        )
    return hi, witness


def statistic_path(theta_star, query: FeasibleQuery, omega: Sequence[int], kappas) -> np.ndarray:
    """Audit statistic along ``theta_star + kappa * e_omega`` for each kappa."""
    family = query.config.family
    theta_star = family.check(theta_star)
    pts = theta_star + np.outer(np.asarray(kappas, dtype=float), omega_direction(family.r, omega))
    return feasibility_statistic(pts, query)


def diversity_compare(family, z0_params, z1_params, v) -> float:
    """``v^T (I(z1) - I(z0)) v``; positive when the ``z0`` feed is more diverse along ``v``."""
    i0 = family.fisher(z0_params)
    i1 = family.fisher(z1_params)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (family.r,):
        raise DomainError(f"direction has length {v.size}, family has r={family.r}")
    return float(v @ (i1 - i0) @ v)
