import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from scipy import integrate

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def chi2_pdf_reference(x: float, r: int) -> float:
    if x <= 0:
        return 0.0
    k = r / 2.0
    return math.exp((k - 1) * math.log(x) - x / 2 - k * math.log(2) - math.lgamma(k))


def chi2_cdf_by_quadrature(x: float, r: int) -> float:
    if x <= 0:
        return 0.0
    val, _ = integrate.quad(chi2_pdf_reference, 0.0, x, args=(r,), limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def chi2_quantile_by_bisection(r: int, q: float, tol: float = 1e-11) -> float:
    lo, hi = 0.0, 1.0
    while chi2_cdf_by_quadrature(hi, r) < q:
        hi *= 2.0
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if chi2_cdf_by_quadrature(mid, r) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def score_product_fisher(family, theta, samples: int, seed: int, rel_step: float = 1e-5) -> np.ndarray:
    """E[s s^T] with the score taken by central differences of the log-density."""
    theta = np.asarray(theta, dtype=float)
    rng = np.random.default_rng(seed)
    z = family.draw(theta, samples, rng)
    scores = []
    for i in range(family.r):
        h = rel_step * max(1.0, abs(theta[i]))
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        scores.append((family.log_density_batch(up, z) - family.log_density_batch(dn, z)) / (2 * h))
    s = np.stack(scores)
    return s @ s.T / samples


@pytest.fixture
def gaussian():
    from filter_audit import get_family

    return get_family("gaussian1d")


ACCEPTANCE_LINES = []


def record_criterion(number: int, title: str, passed: bool, detail: str) -> None:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
    ACCEPTANCE_LINES.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
