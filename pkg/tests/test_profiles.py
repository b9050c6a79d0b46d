import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvstage.errors import MplusViolation, ProfileSyntaxError, UnknownIdentifierError
from lvstage.grid import Grid
from lvstage.profiles import Tabulated, as_profile, parse_profile, sample

X = np.linspace(0, math.pi, 11)


@pytest.mark.parametrize(
    "text,expected",
    [
        ("1", lambda x: np.ones_like(x)),
        ("1 + 0.5*cos(x)", lambda x: 1 + 0.5 * np.cos(x)),
        ("2 - 3 - 4", lambda x: -5 + 0 * x),
        ("8 / 4 / 2", lambda x: 1 + 0 * x),
        ("-x*2", lambda x: -2 * x),
        ("--x", lambda x: x),
        ("exp(-x/2) + 0.5", lambda x: np.exp(-x / 2) + 0.5),
        ("(1 + x) * (2 - x)", lambda x: (1 + x) * (2 - x)),
        ("1e-3*sin(2*x)", lambda x: 1e-3 * np.sin(2 * x)),
    ],
)
def test_evaluate(text, expected):
    np.testing.assert_allclose(parse_profile(text)(X), expected(X), rtol=1e-15, atol=1e-15)


@pytest.mark.parametrize(
    "text,offset",
    [("cos(", 4), ("1 +", 3), ("1 $ 2", 2), ("(1 + x", 6), ("1 x", 2), ("", 0)],
)
def test_syntax_errors_report_offset(text, offset):
    with pytest.raises(ProfileSyntaxError) as info:
        parse_profile(text)
    assert info.value.offset == offset
    assert f"offset {offset}" in str(info.value)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse_profile("1 + tan(x)")
    assert info.value.offset == 4


_atoms = st.sampled_from(["x", "1", "0.5", "2.25", "3e-1"])


def _exprs():
    return st.recursive(
        _atoms,
        lambda inner: st.one_of(
            st.tuples(inner, st.sampled_from("+-*"), inner).map(lambda t: f"{t[0]} {t[1]} {t[2]}"),
            inner.map(lambda e: f"-({e})"),
            st.tuples(st.sampled_from(["cos", "sin"]), inner).map(lambda t: f"{t[0]}({t[1]})"),
            inner.map(lambda e: f"({e})"),
        ),
        max_leaves=8,
    )


@given(_exprs())
@settings(max_examples=150, deadline=None)
def test_print_parse_round_trip(text):
    p = parse_profile(text)
    q = parse_profile(str(p))
    assert str(q) == str(p)
    np.testing.assert_array_equal(q(X), p(X))


def test_sample_modes():
    g = Grid(math.pi, 21)
    np.testing.assert_allclose(sample("1 + 0.5*cos(x)", g, "strict"), 1 + 0.5 * np.cos(g.x))
    with pytest.raises(MplusViolation) as info:
        sample("cos(x)", g, "strict")
    assert info.value.nodes[0] == 11  # cos(pi/2) rounds to +6e-17, so node 10 passes
    with pytest.raises(MplusViolation):
        sample("x", g, "strict")
    with pytest.warns(UserWarning):
        vals = sample("x", g, "relaxed")
    assert vals[0] == 0
    with pytest.raises(MplusViolation):
        sample("x - 1", g, "relaxed")


def test_constant_broadcast_and_numbers():
    g = Grid(1.0, 5)
    np.testing.assert_array_equal(sample(2.5, g), np.full(5, 2.5))
    assert str(as_profile(3)) == str(parse_profile("3"))


def test_tabulated_interpolates():
    tab = Tabulated(np.array([0.0, 1.0, 2.0]), np.array([1.0, 3.0, 2.0]))
    np.testing.assert_allclose(tab(np.array([0.5, 1.5])), [2.0, 2.5])
