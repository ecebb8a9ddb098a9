import math

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from filter_audit import (
    AuditConfig,
    CounterfactualPair,
    Feed,
    Hypothesis,
    InfoPoint,
    audit_batch,
    audit_estimates,
    audit_pair,
    audit_statistics,
    audit_symmetrized,
    audit_threshold,
    get_family,
)
from filter_audit.audit import batch_passes
from filter_audit.errors import AuditError, DomainError, ProtocolError
from filter_audit.montecarlo import z_test_verdict
from filter_audit.platforms import Constant, Lookup, PlatformSpec, make_platform

G = get_family("gaussian1d")


class FixedFeeds:
    """Black box returning preset feeds per token, counting its calls."""

    concurrent_safe = False

    def __init__(self, table):
        self.table = {k: np.asarray(v, dtype=float) for k, v in table.items()}
        self.calls = 0

    def __call__(self, token, m, seed=None):
        self.calls += 1
        return Feed.of(self.table[token][:m])


def feed_with(mean, var, m):
    """Feed of size m with the given sample mean and unbiased variance."""
    base = np.tile([-1.0, 1.0], m // 2)
    base = base * math.sqrt(var * (m - 1) / m)
    return base + mean


# -- threshold and statistic -------------------------------------------------------


def test_threshold_formula():
    assert audit_threshold(2, 100, 0.05) == pytest.approx(0.02 * 5.991464547107979, rel=1e-12)
    assert audit_threshold(2, 100, 0.0) == math.inf
    assert audit_threshold(2, 100, 1.0) == 0.0


def test_identical_estimates_pass():
    for eps in (0.001, 0.05, 0.5, 0.999):
        v = audit_estimates(AuditConfig(G, eps, 100), (0.3, 2.0), (0.3, 2.0))
        assert v.statistic == 0.0
        assert v.hypothesis is Hypothesis.H0


def test_hand_computed_rejection():
    v = audit_estimates(AuditConfig(G, 0.05, 100), (0.5, 1.0), (0.0, 1.0))
    assert v.statistic == pytest.approx(0.25)
    assert v.threshold == pytest.approx(0.11983, abs=1e-5)
    assert v.hypothesis is Hypothesis.H1


def test_fewer_items_raise_the_threshold():
    v = audit_estimates(AuditConfig(G, 0.05, 10), (0.5, 1.0), (0.0, 1.0))
    assert v.threshold == pytest.approx(1.1983, abs=1e-4)
    assert v.hypothesis is Hypothesis.H0


def test_epsilon_endpoints():
    never = audit_estimates(AuditConfig(G, 0.0, 100), (5.0, 1.0), (0.0, 1.0))
    assert never.hypothesis is Hypothesis.H0
    always = audit_estimates(AuditConfig(G, 1.0, 100), (0.0, 1.0), (0.0, 1.0))
    assert always.statistic == 0.0 and always.hypothesis is Hypothesis.H1


def test_epsilon_out_of_range():
    with pytest.raises(DomainError, match=r"epsilon must lie in \[0,1\]"):
        AuditConfig(G, 1.5, 100)


def test_oracle_point_needs_theta():
    with pytest.raises(DomainError):
        AuditConfig(G, 0.05, 100, info_point=InfoPoint.AT_ORACLE_THETA)
    cfg = AuditConfig(G, 0.05, 100, info_point=InfoPoint.AT_ORACLE_THETA, oracle_theta=(0.0, 4.0))
    assert audit_statistics(cfg, (0.5, 1.0), (0.0, 1.0)) == pytest.approx(0.25 / 4)


def test_non_finite_estimate_is_an_error_not_a_rejection():
    with pytest.raises(AuditError):
        audit_estimates(AuditConfig(G, 0.05, 100), (np.nan, 1.0), (0.0, 1.0))


def test_boundary_estimate_is_clamped():
    bern = get_family("bernoulli")
    v = audit_estimates(AuditConfig(bern, 0.05, 50), (0.0,), (0.1,))
    assert math.isfinite(v.statistic)


estimates = st.tuples(st.floats(-3, 3), st.floats(0.05, 10))


@given(estimates, estimates, st.floats(1e-4, 0.999), st.floats(1e-4, 0.999), st.integers(2, 5000))
def test_verdict_monotone_in_epsilon(a, b, e1, e2, m):
    lo, hi = sorted((e1, e2))
    if audit_estimates(AuditConfig(G, lo, m), a, b).hypothesis is Hypothesis.H1:
        assert audit_estimates(AuditConfig(G, hi, m), a, b).hypothesis is Hypothesis.H1


@given(estimates, estimates)
def test_midpoint_statistic_is_symmetric(a, b):
    cfg = AuditConfig(G, 0.05, 100, info_point=InfoPoint.AT_MIDPOINT)
    s1 = float(audit_statistics(cfg, a, b))
    s2 = float(audit_statistics(cfg, b, a))
    assert abs(s1 - s2) <= 1e-12 * max(1.0, s1)


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 10), st.integers(2, 10_000), st.floats(1e-4, 0.999))
def test_known_variance_matches_two_sided_z_test(xbar, xbar_p, sigma2, m, eps):
    fam = get_family("gaussian_known_var", sigma2=sigma2)
    v = audit_estimates(AuditConfig(fam, eps, m), (xbar,), (xbar_p,))
    z = abs(xbar - xbar_p) / math.sqrt(2 * sigma2 / m)
    # skip instances within float noise of the critical value
    from statistics import NormalDist

    crit = NormalDist().inv_cdf(1 - eps / 2)
    assume(abs(z - crit) > 1e-9 * crit)
    assert (v.hypothesis is Hypothesis.H1) == z_test_verdict(xbar, xbar_p, sigma2, m, eps)


# -- black-box audits ----------------------------------------------------------------


def test_identical_feeds_give_zero_statistic():
    box = FixedFeeds({"a": feed_with(0.2, 1.5, 100), "b": feed_with(0.2, 1.5, 100)})
    v = audit_pair(AuditConfig(G, 0.05, 100), box, CounterfactualPair("a", "b"))
    assert v.statistic == pytest.approx(0.0, abs=1e-24)
    assert v.hypothesis is Hypothesis.H0


def test_pair_reproduces_hand_example():
    box = FixedFeeds({"x": feed_with(0.5, 1.0, 100), "y": feed_with(0.0, 1.0, 100)})
    v = audit_pair(AuditConfig(G, 0.05, 100), box, CounterfactualPair("x", "y"))
    assert v.statistic == pytest.approx(0.25, rel=1e-12)
    assert v.hypothesis is Hypothesis.H1


def test_fresh_feeds_each_call():
    spec = PlatformSpec(G, Constant((0.0, 1.0)))
    box = make_platform(spec)
    cfg = AuditConfig(G, 0.05, 200)
    pair = CounterfactualPair("a", "b")
    first = audit_pair(cfg, box, pair)
    second = audit_pair(cfg, box, pair)
    assert first.theta_tilde != second.theta_tilde
    assert audit_pair(cfg, box, pair, seed=4).theta_tilde == audit_pair(cfg, box, pair, seed=4).theta_tilde


def test_black_box_protocol_violations():
    cfg = AuditConfig(G, 0.05, 10)
    short = FixedFeeds({"a": np.zeros(4), "b": np.zeros(4)})
    with pytest.raises(ProtocolError):
        audit_pair(cfg, short, CounterfactualPair("a", "b"))
    with pytest.raises(ProtocolError):
        audit_pair(cfg, lambda token, m, seed=None: [0.0] * m, CounterfactualPair("a", "b"))


def test_nan_feed_is_an_error():
    box = FixedFeeds({"a": np.full(10, np.nan), "b": np.zeros(10)})
    with pytest.raises(AuditError):
        audit_pair(AuditConfig(G, 0.05, 10), box, CounterfactualPair("a", "b"))


def test_symmetrized_disjunction():
    same = FixedFeeds({"a": feed_with(0.0, 1.0, 100), "b": feed_with(0.0, 1.0, 100)})
    assert audit_symmetrized(AuditConfig(G, 0.05, 100), same, CounterfactualPair("a", "b")).hypothesis is Hypothesis.H0
    # information taken at the low-variance side rejects, at the high-variance side it does not
    box = FixedFeeds({"a": feed_with(0.28, 1.0, 100), "b": feed_with(0.0, 1.3, 100)})
    cfg = AuditConfig(G, 0.05, 100)
    fwd = audit_pair(cfg, box, CounterfactualPair("a", "b"))
    rev = audit_pair(cfg, box, CounterfactualPair("b", "a"))
    assert fwd.hypothesis is Hypothesis.H1 and rev.hypothesis is Hypothesis.H0
    assert audit_symmetrized(cfg, box, CounterfactualPair("a", "b")).hypothesis is Hypothesis.H1
    assert audit_symmetrized(cfg, box, CounterfactualPair("b", "a")).hypothesis is Hypothesis.H1


def test_batch_threshold_arithmetic():
    assert batch_passes(3, 0.3, 10)
    assert not batch_passes(3, 0.25, 10)
    assert batch_passes(0, 0.0, 10)
    assert not batch_passes(1, 0.0, 10)


def test_batch_counts_every_failing_pair():
    table = {}
    pairs = []
    for i in range(10):
        table[f"x{i}"] = feed_with(0.0, 1.0, 100)
        table[f"y{i}"] = feed_with(1.0 if i < 3 else 0.0, 1.0, 100)
        pairs.append(CounterfactualPair(f"x{i}", f"y{i}", f"p{i}"))
    box = FixedFeeds(table)
    cfg = AuditConfig(G, 0.05, 100)
    passed = audit_batch(cfg, box, pairs, alpha=0.3)
    assert passed.h1_count == 3 and passed.passed
    failed = audit_batch(cfg, box, pairs, alpha=0.25)
    assert not failed.passed
    assert failed.to_dict()["failing_pairs"] == ["p0", "p1", "p2"]
    assert box.calls == 40  # no short-circuit


def test_zero_epsilon_batch_always_passes():
    box = make_platform(PlatformSpec(G, Lookup({"a": (0, 1), "b": (0, 1)})))
    pairs = [CounterfactualPair("a", "b", str(i)) for i in range(20)]
    batch = audit_batch(AuditConfig(G, 0.0, 50), box, pairs, alpha=0.0, seed=1)
    assert batch.passed and batch.h1_count == 0


def test_compliant_platform_passes_large_batch():
    box = make_platform(PlatformSpec(G, Constant((0.0, 1.0))))
    pairs = [CounterfactualPair(f"u{i}", f"v{i}") for i in range(200)]
    batch = audit_batch(AuditConfig(G, 0.05, 2000), box, pairs, alpha=0.1, seed=2024, workers=4)
    assert batch.passed
    assert batch.h1_count <= 20


def test_batch_parallel_matches_serial():
    box = make_platform(PlatformSpec(G, Lookup({"a": (0, 1), "b": (0.1, 1.2)})))
    pairs = [CounterfactualPair("a", "b", str(i)) for i in range(30)]
    cfg = AuditConfig(G, 0.05, 300)
    serial = audit_batch(cfg, box, pairs, seed=8, workers=1)
    parallel = audit_batch(cfg, box, pairs, seed=8, workers=6)
    assert serial.to_dict() == parallel.to_dict()


def test_batch_errors_name_the_pair():
    box = make_platform(PlatformSpec(G, Lookup({"a": (0, 1)})))
    with pytest.raises(ProtocolError, match="'bad'"):
        audit_batch(AuditConfig(G, 0.05, 20), box, [CounterfactualPair("a", "a", "ok"), CounterfactualPair("a", "zz", "bad")])
