"""Simulated filtering algorithms used as audit targets.

A platform maps an opaque input token to a parameter ``theta(x)`` and
serves feeds sampled from ``p(.; theta(x))``.  The object handed to the
auditor only generates feeds; the mapping stays in the spec, which is
what reports read via :func:`describe_platform`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DomainError, ProtocolError
from .families import Feed, ModelFamily


class UnknownTokenError(ProtocolError):
    """The platform has no mapping for the requested input token."""


def _vec(theta) -> tuple:
    return tuple(float(t) for t in np.atleast_1d(np.asarray(theta, dtype=float)))


@dataclass(frozen=True)
class Constant:
    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", _vec(self.theta))

    def resolve(self, token: str) -> tuple:
        return self.theta


@dataclass(frozen=True)
class Lookup:
    table: Mapping[str, tuple]

    def __post_init__(self):
        object.__setattr__(self, "table", {str(k): _vec(v) for k, v in self.table.items()})

    def resolve(self, token: str) -> tuple:
        try:
            return self.table[token]
        except KeyError:
            raise UnknownTokenError(f"platform has no mapping for input token {token!r}") from None


@dataclass(frozen=True)
class AffineShift:
    """``theta(x) = base + delta[x]``; tokens without a delta map to ``base``."""

    base: tuple
    deltas: Mapping[str, tuple] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "base", _vec(self.base))
        object.__setattr__(self, "deltas", {str(k): _vec(v) for k, v in self.deltas.items()})
        for token, d in self.deltas.items():
            if len(d) != len(self.base):
                raise DomainError(f"delta for {token!r} has length {len(d)}, base has {len(self.base)}")

    def resolve(self, token: str) -> tuple:
        d = self.deltas.get(token)
        if d is None:
            return self.base
        return tuple(b + x for b, x in zip(self.base, d))


@dataclass(frozen=True)
class PlatformSpec:
    """Family, token mapping and optional diversity inflation.

    ``inflation`` adds ``kappa`` to every coordinate listed in
    ``inflation_coords`` (0-based) for every token, leaving the other
    coordinates untouched.
    """

    family: ModelFamily
    mapping: object
    inflation: Optional[float] = None
    inflation_coords: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "inflation_coords", tuple(int(i) for i in self.inflation_coords))
        if self.inflation is not None:
            if not self.inflation >= 0:
                raise DomainError(f"inflation must be nonnegative, got {self.inflation!r}")
            if not self.inflation_coords:
                raise DomainError("inflation needs at least one coordinate to inflate")
            for i in self.inflation_coords:
                if not 0 <= i < self.family.r:
                    raise DomainError(f"inflation coordinate {i + 1} is outside 1..{self.family.r}")
        for token in self.known_tokens():
            self.theta_for(token)

    def known_tokens(self) -> list:
        if isinstance(self.mapping, Lookup):
            return list(self.mapping.table)
        if isinstance(self.mapping, AffineShift):
            return list(self.mapping.deltas)
        return []

    def theta_for(self, token: str) -> np.ndarray:
        theta = np.array(self.mapping.resolve(token), dtype=float)
        if self.inflation:
            theta[list(self.inflation_coords)] += self.inflation
        try:
            return self.family.check(theta, closed=True)
        except DomainError as exc:
            raise DomainError(f"token {token!r} maps outside the parameter space: {exc}") from None


class SimulatedPlatform:
    """Feed oracle built from a :class:`PlatformSpec`.

    Feeds are a pure function of ``(token, m, seed)``.
    """

    __slots__ = ("_serve",)
    concurrent_safe = True

    def __init__(self, spec: PlatformSpec):
        family = spec.family
        theta_for = spec.theta_for

        def serve(token, m, seed):
            return family.sample(theta_for(str(token)), m, seed)

        object.__setattr__(self, "_serve", serve)

    def __call__(self, token: str, m: int, seed=None) -> Feed:
        return self._serve(token, m, seed)

    def __setattr__(self, name, value):
        raise AttributeError("simulated platforms are immutable")

    def __repr__(self):
        return "SimulatedPlatform(<black box>)"


def make_platform(spec: PlatformSpec) -> SimulatedPlatform:
    return SimulatedPlatform(spec)


def _fmt(theta) -> str:
    return "(" + ",".join(f"{t:g}" for t in theta) + ")"


def describe_platform(spec: PlatformSpec) -> str:
    """Human-readable summary with the true parameter per known token."""
    lines = []
    if isinstance(spec.mapping, Constant):
        lines.append(f"compliant: all inputs map to {_fmt(spec.theta_for(''))}")
    elif isinstance(spec.mapping, Lookup):
        for token in spec.known_tokens():
            lines.append(f"  {token} -> {_fmt(spec.theta_for(token))}")
    else:
        base = np.array(spec.mapping.base)
        if spec.inflation:
            base[list(spec.inflation_coords)] += spec.inflation
        lines.append(f"affine platform: other inputs -> {_fmt(base)}")
        for token in spec.known_tokens():
            lines.append(f"  {token} -> {_fmt(spec.theta_for(token))}")
    if spec.inflation:
        coords = ", ".join(str(i + 1) for i in spec.inflation_coords)
        noun = "coordinate" if len(spec.inflation_coords) == 1 else "coordinates"
        lines.append(f"diversity inflation: +{spec.inflation:g} on {noun} {coords}")
    return "\n".join(lines)
