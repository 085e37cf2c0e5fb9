import numpy as np
import pytest

from wplap.expressions import ParseError, parse_expression


def test_numbers_and_precedence():
    assert parse_expression("1 + 2*3")() == 7.0
    assert parse_expression("(1 + 2)*3")() == 9.0
    assert parse_expression("2^3^2")() == 512.0          # right-associative
    assert parse_expression("-2^2")() == -4.0            # ^ binds tighter than unary minus
    assert parse_expression("6/3/2")() == 1.0            # left-assoc division
    assert parse_expression("2*3^2")() == 18.0


def test_variables():
    e = parse_expression("t + 2*x1")
    assert e(t=1.0, x1=0.25) == 1.5
    assert e.variables == frozenset({"t", "x1"})
    with pytest.raises(ParseError):
        e(t=1.0)  # x1 missing


def test_vectorized():
    e = parse_expression("sin(t)*x1")
    t = np.linspace(0, 1, 7)
    x = np.linspace(1, 2, 7)
    np.testing.assert_allclose(e(t=t, x1=x), np.sin(t) * x)


def test_functions():
    assert parse_expression("min(2, 3)")() == 2.0
    assert parse_expression("max(2, 3)")() == 3.0
    assert parse_expression("clamp(5, 0, 1)")() == 1.0
    assert parse_expression("clamp(-5, 0, 1)")() == 0.0
    assert parse_expression("exp(0)")() == 1.0
    np.testing.assert_allclose(parse_expression("cos(t)")(t=np.pi), -1.0)


def test_diff_t_polynomial():
    e = parse_expression("t^3 - 2*t")
    d = e.diff_t()
    t = np.linspace(-2, 2, 41)
    np.testing.assert_allclose(d(t=t), 3 * t ** 2 - 2, rtol=1e-12)


def test_diff_t_branchwise():
    # derivative of the ramp min(max(t,0),1): 1 on (0,1), 0 outside
    e = parse_expression("min(max(t, 0), 1)")
    d = e.diff_t()
    assert d(t=0.5) == 1.0
    assert d(t=-1.0) == 0.0
    assert d(t=2.0) == 0.0


def test_diff_t_chain():
    e = parse_expression("sin(2*t)")
    d = e.diff_t()
    t = np.linspace(0, 3, 11)
    np.testing.assert_allclose(d(t=t), 2 * np.cos(2 * t), rtol=1e-12)


def test_parse_errors():
    with pytest.raises(ParseError):
        parse_expression("t +")
    with pytest.raises(ParseError):
        parse_expression("foo(t)")
    with pytest.raises(ParseError):
        parse_expression("min(1)")
    with pytest.raises(ParseError):
        parse_expression("t @ 2")
    with pytest.raises(ParseError):
        parse_expression("1 2")  # trailing input


def test_t_dependent_exponent_rejected():
    with pytest.raises(ParseError):
        parse_expression("2^t").diff_t()
