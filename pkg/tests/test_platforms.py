import numpy as np
import pytest
from hypothesis import given, strategies as st

from filter_audit import (
    AffineShift,
    AuditConfig,
    Constant,
    CounterfactualPair,
    Hypothesis,
    Lookup,
    PlatformSpec,
    audit_pair,
    describe_platform,
    get_family,
    make_platform,
)
from filter_audit.errors import DomainError
from filter_audit.platforms import UnknownTokenError

G = get_family("gaussian1d")


def test_constant_platform_treats_inputs_alike():
    spec = PlatformSpec(G, Constant((0.0, 1.0)))
    box = make_platform(spec)
    np.testing.assert_array_equal(spec.theta_for("x"), spec.theta_for("x_prime"))
    assert box("x", 3, seed=9).items.tobytes() == box("x_prime", 3, seed=9).items.tobytes()


def test_lookup_platform_drives_rejection():
    box = make_platform(PlatformSpec(G, Lookup({"x": (0.0, 1.0), "x_prime": (0.5, 1.0)})))
    v = audit_pair(AuditConfig(G, 0.05, 100), box, CounterfactualPair("x", "x_prime"), seed=3)
    assert v.hypothesis is Hypothesis.H1


def test_affine_shift_with_inflation():
    spec = PlatformSpec(G, AffineShift((0.0, 1.0), {"x_prime": (0.5, 0.0)}), inflation=3.0, inflation_coords=(1,))
    np.testing.assert_allclose(spec.theta_for("x_prime"), [0.5, 4.0])
    np.testing.assert_allclose(spec.theta_for("x"), [0.0, 4.0])


def test_descriptions():
    assert describe_platform(PlatformSpec(G, Constant((0, 1)))) == "compliant: all inputs map to (0,1)"
    lookup = describe_platform(PlatformSpec(G, Lookup({"x": (0, 1), "y": (0.5, 1)})))
    assert len(lookup.splitlines()) == 2
    inflated = PlatformSpec(G, AffineShift((0, 1), {"y": (0.5, 0)}), inflation=3.0, inflation_coords=(1,))
    assert "+3 on coordinate 2" in describe_platform(inflated)


def test_black_box_is_opaque():
    box = make_platform(PlatformSpec(G, Lookup({"x": (0, 1)})))
    public = {n for n in dir(box) if not n.startswith("_")}
    assert public == {"concurrent_safe"}
    with pytest.raises(AttributeError):
        box.spec = None
    assert "0" not in repr(box)


def test_unknown_token():
    box = make_platform(PlatformSpec(G, Lookup({"x": (0, 1)})))
    with pytest.raises(UnknownTokenError):
        box("nobody", 5, seed=1)


def test_mapping_outside_parameter_space():
    with pytest.raises(DomainError):
        PlatformSpec(G, Lookup({"x": (0, -1)}))
    with pytest.raises(DomainError):
        PlatformSpec(G, Constant((0, 1)), inflation=1.0, inflation_coords=(5,))


def test_pooled_draws_match_mapped_parameters():
    table = {"x": (0.3, 2.0), "y": (-1.0, 0.5)}
    box = make_platform(PlatformSpec(G, Lookup(table)))
    n = 100_000
    for token, (mu, var) in table.items():
        x = box(token, n, seed=17).scalars()
        assert abs(x.mean() - mu) <= 4 * np.sqrt(var / n)
        assert abs(x.var(ddof=1) - var) <= 4 * var * np.sqrt(2 / (n - 1))


@given(
    st.tuples(st.floats(-5, 5), st.floats(0.1, 5)),
    st.tuples(st.floats(-2, 2), st.floats(0, 2)),
    st.floats(0, 100),
)
def test_inflation_touches_only_designated_coordinates(base, delta, kappa):
    plain = PlatformSpec(G, AffineShift(base, {"t": delta}))
    inflated = PlatformSpec(G, AffineShift(base, {"t": delta}), inflation=kappa, inflation_coords=(1,))
    a, b = plain.theta_for("t"), inflated.theta_for("t")
    assert a[0] == b[0]
    assert b[1] == a[1] + kappa
