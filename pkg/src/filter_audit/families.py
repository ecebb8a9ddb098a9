"""Generative feed models: exponential families with exact estimators.

A platform's feed is ``m`` i.i.d. content vectors drawn from ``p(.; theta)``.
Each family here has scalar content (``n = 1``) and bundles sampling, the
log-density, the minimum-variance unbiased estimator, the MLE and the
closed-form Fisher information.

Batch internals work on arrays shaped ``(..., m)`` for samples and
``(..., r)`` for parameters so the Monte Carlo harness can vectorize over
trials; the public functions at the bottom take a :class:`Feed`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import _rng
from .errors import DomainError, InsufficientDataError, SingularityError
from .special import chi2_quantile

__all__ = [
    "Bernoulli",
    "FamilyId",
    "Feed",
    "Gaussian1D",
    "GaussianKnownVar",
    "ModelFamily",
    "Poisson",
    "chi2_quantile",
    "fisher_information",
    "get_family",
    "log_density",
    "mle",
    "mvue",
    "sample_feed",
]

CLAMP = 1e-9
_SYM_RTOL = 1e-12


class FamilyId(str, enum.Enum):
    GAUSSIAN_1D = "gaussian1d"
    GAUSSIAN_KNOWN_VAR = "gaussian_known_var"
    BERNOULLI = "bernoulli"
    POISSON = "poisson"


@dataclass(frozen=True)
class Feed:
    """An ordered collection of ``m`` content vectors of length ``n``."""

    items: np.ndarray

    def __post_init__(self):
        items = np.asarray(self.items, dtype=float)
        if items.ndim == 1:
            items = items[:, None]
        if items.ndim != 2:
            raise ValueError(f"feed items must be a list of vectors, got shape {items.shape}")
        if items.shape[0] < 1:
            raise ValueError("a feed needs at least one item")
        items.setflags(write=False)
        object.__setattr__(self, "items", items)

    @classmethod
    def of(cls, values) -> "Feed":
        return cls(np.asarray(values, dtype=float))

    @property
    def m(self) -> int:
        return self.items.shape[0]

    @property
    def n(self) -> int:
        return self.items.shape[1]

    def scalars(self) -> np.ndarray:
        if self.n != 1:
            raise DomainError(f"scalar family needs content dimension 1, feed has n={self.n}")
        return self.items[:, 0]

    def __len__(self):
        return self.m


class ModelFamily:
    """One exponential family ``{p(.; theta) : theta in Theta}``."""

    family_id: FamilyId
    r: int
    coordinate_names: tuple[str, ...]
    regularity_notes: str
    min_m: int = 1

    # -- parameter space ---------------------------------------------------
    def _constraints(self, theta: np.ndarray):
        """Yield ``(ok_interior, ok_closure, description)`` per constraint."""
        raise NotImplementedError

    def check(self, theta, *, closed: bool = False) -> np.ndarray:
        """Validate ``theta`` and return it as a float array of shape ``(r,)``.

        ``closed=True`` admits boundary points (used for sampling, where a
        zero-variance or degenerate feed is still well defined).
        """
        arr = np.atleast_1d(np.asarray(theta, dtype=float))
        if arr.shape != (self.r,):
            raise DomainError(f"{self.family_id.value} expects a parameter of length {self.r}, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise DomainError(f"parameter {arr.tolist()} is not finite")
        for interior, closure, text in self._constraints(arr):
            if not (closure if closed else interior):
                raise DomainError(f"parameter {arr.tolist()} violates {text}")
        return arr

    def is_interior(self, theta) -> bool:
        try:
            self.check(theta)
        except DomainError:
            return False
        return True

    def clamp(self, theta: np.ndarray) -> np.ndarray:
        """Move boundary estimates inward by :data:`CLAMP`."""
        return np.asarray(theta, dtype=float)

    # -- sampling ----------------------------------------------------------
    def draw(self, theta: np.ndarray, size, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample(self, theta, m: int, seed=None) -> Feed:
        theta = self.check(theta, closed=True)
        if int(m) != m or m < 1:
            raise DomainError(f"feed length m must be a positive integer, got {m!r}")
        return Feed(self.draw(theta, (int(m),), _rng.make_rng(seed)))

    # -- estimators (batched over leading axes) ----------------------------
    def _check_m(self, m: int):
        if m < self.min_m:
            raise InsufficientDataError(
                f"{self.family_id.value} estimators need at least {self.min_m} items, got {m}"
            )

    def mvue_batch(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        self._check_m(x.shape[-1])
        return x.mean(axis=-1, keepdims=True)

    def mle_batch(self, x: np.ndarray) -> np.ndarray:
        return self.mvue_batch(x)

    def mvue_variance(self, theta, m: int) -> np.ndarray:
        """Exact per-coordinate variance of the MVUE at ``theta`` for feeds of length ``m``."""
        raise NotImplementedError

    # -- information and density ------------------------------------------
    def fisher_batch(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def require_interior(self, theta, what: str = "Fisher information") -> np.ndarray:
        """Like :meth:`check`, but boundary points raise :class:`SingularityError`."""
        arr = self.check(theta, closed=True)
        if not self.is_interior(arr):
            raise SingularityError(
                f"{what} of {self.family_id.value} is undefined at boundary parameter {arr.tolist()}"
            )
        return arr

    def fisher(self, theta) -> np.ndarray:
        return self.fisher_batch(self.require_interior(theta))

    def log_density(self, theta, z) -> float:
        raise NotImplementedError

    def log_density_batch(self, theta: np.ndarray, z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"

    def __eq__(self, other):
        return type(self) is type(other) and self.__dict__ == other.__dict__

    def __hash__(self):
        return hash((type(self), tuple(sorted(self.__dict__.items()))))


def _diag(*entries: np.ndarray) -> np.ndarray:
    entries = np.broadcast_arrays(*entries)
    out = np.zeros(entries[0].shape + (len(entries), len(entries)))
    for i, e in enumerate(entries):
        out[..., i, i] = e
    return out


class Gaussian1D(ModelFamily):
    """``N(mu, sigma2)`` with both coordinates unknown; ``theta = (mu, sigma2)``."""

    family_id = FamilyId.GAUSSIAN_1D
    r = 2
    coordinate_names = ("mean", "variance")
    min_m = 2
    regularity_notes = (
        "Theta = R x (0, inf) is open and convex (conditions 1, 9; compactness only locally); "
        "identifiable; support R independent of theta; log-density smooth in theta with "
        "dominated second derivatives; score has mean zero and the Fisher matrix "
        "diag(1/sigma2, 1/(2 sigma2^2)) is positive definite; continuous (Lebesgue density); "
        "unbiased estimators with finite first moment exist."
    )

    def _constraints(self, theta):
        yield theta[1] > 0, theta[1] >= 0, "variance > 0"

    def clamp(self, theta):
        theta = np.array(theta, dtype=float)
        theta[..., 1] = np.maximum(theta[..., 1], CLAMP)
        return theta

    def draw(self, theta, size, rng):
        return theta[0] + math.sqrt(theta[1]) * rng.standard_normal(size)

    def mvue_batch(self, x):
        x = np.asarray(x, dtype=float)
        self._check_m(x.shape[-1])
        mean = x.mean(axis=-1)
        var = x.var(axis=-1, ddof=1)
        return np.stack([mean, var], axis=-1)

    def mle_batch(self, x):
        x = np.asarray(x, dtype=float)
        self._check_m(x.shape[-1])
        return np.stack([x.mean(axis=-1), x.var(axis=-1, ddof=0)], axis=-1)

    def mvue_variance(self, theta, m):
        s2 = np.asarray(theta, dtype=float)[..., 1]
        return np.stack([s2 / m, 2.0 * s2**2 / (m - 1)], axis=-1)

    def fisher_batch(self, theta):
        s2 = np.asarray(theta, dtype=float)[..., 1]
        return _diag(1.0 / s2, 0.5 / s2**2)

    def log_density_batch(self, theta, z):
        theta = np.asarray(theta, dtype=float)
        mu, s2 = theta[..., 0], theta[..., 1]
        return -0.5 * np.log(2.0 * np.pi * s2) - (np.asarray(z) - mu) ** 2 / (2.0 * s2)

    def log_density(self, theta, z):
        theta = self.require_interior(theta, "log-density")
        return float(self.log_density_batch(theta, float(np.ravel(z)[0])))


class GaussianKnownVar(ModelFamily):
    """``N(mu, sigma2)`` with ``sigma2`` fixed and known; ``theta = (mu,)``."""

    family_id = FamilyId.GAUSSIAN_KNOWN_VAR
    r = 1
    coordinate_names = ("mean",)
    regularity_notes = (
        "Theta = R is open and convex; identifiable; common support R; smooth log-density "
        "with constant second derivative -1/sigma0^2; Fisher information 1/sigma0^2 > 0; "
        "continuous; the sample mean is unbiased with finite first moment."
    )

    def __init__(self, sigma2: float = 1.0):
        if not (sigma2 > 0 and math.isfinite(sigma2)):
            raise DomainError(f"known variance must be positive and finite, got {sigma2!r}")
        self.sigma2 = float(sigma2)

    def _constraints(self, theta):
        return ()

    def draw(self, theta, size, rng):
        return theta[0] + math.sqrt(self.sigma2) * rng.standard_normal(size)

    def mvue_variance(self, theta, m):
        return np.full(np.shape(theta), self.sigma2 / m)

    def fisher_batch(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.full(theta.shape[:-1] + (1, 1), 1.0 / self.sigma2)

    def log_density_batch(self, theta, z):
        mu = np.asarray(theta, dtype=float)[..., 0]
        return -0.5 * np.log(2.0 * np.pi * self.sigma2) - (np.asarray(z) - mu) ** 2 / (2.0 * self.sigma2)

    def log_density(self, theta, z):
        theta = self.require_interior(theta, "log-density")
        return float(self.log_density_batch(theta, float(np.ravel(z)[0])))

    def __repr__(self):
        return f"GaussianKnownVar(sigma2={self.sigma2!r})"


class Bernoulli(ModelFamily):
    """Binary content with rate ``p``; ``theta = (p,)``."""

    family_id = FamilyId.BERNOULLI
    r = 1
    coordinate_names = ("rate",)
    regularity_notes = (
        "Theta = (0, 1) is open and convex; identifiable; common support {0, 1}; smooth "
        "log-density; Fisher information 1/(p(1-p)) > 0; lattice distribution on the integers "
        "(condition 7); the sample mean is unbiased."
    )

    def _constraints(self, theta):
        p = theta[0]
        yield 0 < p < 1, 0 <= p <= 1, "0 < rate < 1"

    def clamp(self, theta):
        return np.clip(np.asarray(theta, dtype=float), CLAMP, 1.0 - CLAMP)

    def draw(self, theta, size, rng):
        return (rng.random(size) < theta[0]).astype(float)

    def mvue_variance(self, theta, m):
        p = np.asarray(theta, dtype=float)
        return p * (1.0 - p) / m

    def fisher_batch(self, theta):
        p = np.asarray(theta, dtype=float)
        return (1.0 / (p * (1.0 - p)))[..., None]

    def log_density_batch(self, theta, z):
        p = np.asarray(theta, dtype=float)[..., 0]
        z = np.asarray(z, dtype=float)
        return z * np.log(p) + (1.0 - z) * np.log1p(-p)

    def log_density(self, theta, z):
        theta = self.require_interior(theta, "log-density")
        z = float(np.ravel(z)[0])
        if z not in (0.0, 1.0):
            return -math.inf
        return float(self.log_density_batch(theta, z))


class Poisson(ModelFamily):
    """Count content with rate ``lam``; ``theta = (lam,)``."""

    family_id = FamilyId.POISSON
    r = 1
    coordinate_names = ("rate",)
    regularity_notes = (
        "Theta = (0, inf) is open and convex; identifiable; common support N; smooth "
        "log-density; Fisher information 1/lam > 0; lattice distribution on the integers "
        "(condition 7); the sample mean is unbiased."
    )

    def _constraints(self, theta):
        lam = theta[0]
        yield lam > 0, lam >= 0, "rate > 0"

    def clamp(self, theta):
        return np.maximum(np.asarray(theta, dtype=float), CLAMP)

    def draw(self, theta, size, rng):
        return rng.poisson(theta[0], size).astype(float)

    def mvue_variance(self, theta, m):
        return np.asarray(theta, dtype=float) / m

    def fisher_batch(self, theta):
        lam = np.asarray(theta, dtype=float)
        return (1.0 / lam)[..., None]

    def log_density_batch(self, theta, z):
        lam = np.asarray(theta, dtype=float)[..., 0]
        z = np.asarray(z, dtype=float)
        return z * np.log(lam) - lam - np.vectorize(math.lgamma, otypes=[float])(z + 1.0)

    def log_density(self, theta, z):
        theta = self.require_interior(theta, "log-density")
        z = float(np.ravel(z)[0])
        if z < 0 or z != int(z):
            return -math.inf
        return float(self.log_density_batch(theta, z))


_REGISTRY = {
    FamilyId.GAUSSIAN_1D: Gaussian1D,
    FamilyId.GAUSSIAN_KNOWN_VAR: GaussianKnownVar,
    FamilyId.BERNOULLI: Bernoulli,
    FamilyId.POISSON: Poisson,
}


def get_family(name, **kwargs) -> ModelFamily:
    """Look up a family by id (``"gaussian1d"``, ``"bernoulli"``, ...)."""
    if isinstance(name, ModelFamily):
        return name
    try:
        fid = name if isinstance(name, FamilyId) else FamilyId(str(name).lower())
    except ValueError:
        known = ", ".join(f.value for f in FamilyId)
        raise DomainError(f"unknown family {name!r}; expected one of {known}") from None
    return _REGISTRY[fid](**kwargs)


# -- public operations ------------------------------------------------------


def sample_feed(family: ModelFamily, theta, m: int, seed=None) -> Feed:
    """Draw a feed of ``m`` i.i.d. items; bit-identical for equal seeds."""
    return family.sample(theta, m, seed)


def mvue(family: ModelFamily, feed: Feed) -> np.ndarray:
    """Minimum-variance unbiased estimate of ``theta`` from one feed.

    Boundary values (zero spread, all-zero Bernoulli feeds) are returned as
    is; callers that need an information matrix apply ``family.clamp``.
    """
    return family.mvue_batch(feed.scalars())


def mle(family: ModelFamily, feed: Feed) -> np.ndarray:
    return family.mle_batch(feed.scalars())


def fisher_information(family: ModelFamily, theta) -> np.ndarray:
    """Closed-form Fisher matrix (per item) at an interior ``theta``."""
    return family.fisher(theta)


def log_density(family: ModelFamily, theta, z) -> float:
    return family.log_density(theta, z)


def is_valid_fisher(matrix: np.ndarray) -> bool:
    """Symmetric to 1e-12 relative and PSD to -1e-10 times the norm."""
    matrix = np.asarray(matrix, dtype=float)
    scale = max(np.linalg.norm(matrix), np.finfo(float).tiny)
    if np.max(np.abs(matrix - matrix.T)) > _SYM_RTOL * scale:
        return False
    return bool(np.linalg.eigvalsh(matrix).min() >= -1e-10 * scale)
