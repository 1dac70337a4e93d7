"""Component expression language: parsing, evaluation, differentiation."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from horizonkit import expr as ex
from horizonkit.errors import ParseError


def test_parse_and_evaluate():
    e = ex.parse("t^2*sin(psi) + exp(-x)/2")
    assert e.variables() == {"t", "psi", "x"}
    assert e.evaluate({"t": 1.0, "psi": 0.0, "x": 0.0}) == pytest.approx(0.5)


def test_evaluates_on_arrays():
    e = ex.parse("2*t + cos(psi)")
    t = np.linspace(0, 1, 5)
    np.testing.assert_allclose(e.evaluate({"t": t, "psi": 0 * t}), 2 * t + 1)


def test_symbolic_derivative():
    e = ex.parse("t^3*cos(psi)")
    d = e.diff("psi").diff("t")
    assert d.evaluate({"t": 2.0, "psi": 0.3}) == pytest.approx(-3 * 4.0 * np.sin(0.3))
    assert ex.parse("x + 1").diff("t").evaluate({"x": 5.0}) == 0


@pytest.mark.parametrize("text", ["t+", "sinh(t)", "2**3", "(t", ""])
def test_malformed_input(text):
    with pytest.raises(ParseError):
        ex.parse(text)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=4, max_size=4), st.floats(-1, 1), st.floats(-1, 1))
def test_derivative_matches_difference_quotient(c, t, x):
    text = f"{c[0]}*t^3 + {c[1]}*t*x + {c[2]}*sin(x*t) + {c[3]}*exp(t)"
    e = ex.parse(text)
    h = 1e-5
    env = lambda s: {"t": t + s, "x": x}  # noqa: E731
    fd = (e.evaluate(env(h)) - e.evaluate(env(-h))) / (2 * h)
    assert e.diff("t").evaluate(env(0.0)) == pytest.approx(fd, abs=1e-6)
