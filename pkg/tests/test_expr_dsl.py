from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from contact_metric import DomainError, ParseError, differentiate, evaluate, evaluate_many, parse, to_text
from contact_metric.expr_dsl import Binary, Const, Var, integral, shared_evaluation

# ---------------------------------------------------------------- parsing


def test_power_parses_to_binary_node():
    f = parse("x2^2")
    assert isinstance(f, Binary) and f.op == "^"
    assert isinstance(f.left, Var) and f.left.axis == 2
    assert isinstance(f.right, Const) and f.right.value == 2


def test_negative_reciprocal_square():
    assert evaluate(parse("-1/(x2^2)"), (1, 2, 0)) == pytest.approx(-0.25, abs=0)


def test_double_caret_reports_offset():
    with pytest.raises(ParseError) as info:
        parse("x2^^2")
    assert info.value.offset == 3
    assert "variable" in info.value.expected


@pytest.mark.parametrize("text", ["", "x4", "sin x1", "(x1", "x1 +", "2 3", "foo(x1)", "x1 $ 2"])
def test_malformed_inputs_raise(text):
    with pytest.raises(ParseError):
        parse(text)


def test_power_is_left_associative_and_binds_tighter_than_minus():
    assert evaluate("2^3^2", (0, 0, 0)) == 64.0
    assert evaluate("-x1^2", (3, 0, 0)) == -9.0


def test_constants_and_functions():
    p = (0.3, 0.7, 1.1)
    f = parse("sin(x1) + cos(x2) + tan(x3) + exp(x1) + ln(x2) + sqrt(x3) + pi + e")
    expect = (math.sin(0.3) + math.cos(0.7) + math.tan(1.1) + math.exp(0.3) + math.log(0.7)
              + math.sqrt(1.1) + math.pi + math.e)
    assert evaluate(f, p) == pytest.approx(expect, rel=1e-15)


def test_interning_shares_nodes():
    assert parse("x1*x2 + 1") is parse("(x1 * x2) + 1")


# ---------------------------------------------------------------- evaluation


def test_evaluate_examples():
    assert evaluate("x1*x3 + 1", (2, 5, 3)) == 7.0
    assert evaluate("exp(0)*x2", (1, 4, 1)) == 4.0


@pytest.mark.parametrize("text,p", [("1/x2", (0, 0, 0)), ("ln(x1)", (-1, 0, 0)), ("sqrt(x1)", (-1, 0, 0))])
def test_domain_errors(text, p):
    with pytest.raises(DomainError) as info:
        evaluate(text, p)
    assert tuple(info.value.point) == tuple(float(v) for v in p)


def test_evaluate_many_matches_pointwise():
    fields = [parse("x1*x2 - x3"), parse("sin(x2)^2")]
    P = np.random.default_rng(1).uniform(-1, 1, (7, 3))
    vals = evaluate_many(fields, P)
    assert vals.shape == (2, 7)
    for k, p in enumerate(P):
        assert vals[0, k] == evaluate(fields[0], p)
        assert vals[1, k] == evaluate(fields[1], p)


def test_shared_evaluation_gives_same_values():
    f = integral(parse("1/x2"), axis=2, base=1.0, steps=64)
    P = np.array([[0.3, 2.0, 0.1], [0.9, 2.0, 0.1], [0.3, 1.5, 0.5]])
    plain = evaluate_many([f], P)
    with shared_evaluation():
        np.testing.assert_array_equal(evaluate_many([f], P), plain)
        np.testing.assert_array_equal(evaluate_many([f], P), plain)


def test_integral_matches_closed_form_and_leibniz():
    f = integral(parse("x3/x2"), axis=2, base=1.0, steps=256)
    p = (0.0, 2.0, 3.0)
    assert evaluate(f, p) == pytest.approx(3 * math.log(2), abs=1e-9)
    assert evaluate(differentiate(f, 2), p) == pytest.approx(1.5, abs=1e-12)
    assert evaluate(differentiate(f, 3), p) == pytest.approx(math.log(2), abs=1e-9)
    assert evaluate(differentiate(f, 1), p) == 0.0


# ---------------------------------------------------------------- differentiation


def test_derivative_examples():
    assert to_text(differentiate("x2^2", 2)) == "2*x2"
    assert to_text(differentiate("x2^2 * x3", 1)) == "0"


def test_reciprocal_derivative_matches_central_difference():
    sym = evaluate(differentiate("1/x2", 2), (0, 2, 0))
    h = 1e-5
    fd = (1 / (2 + h) - 1 / (2 - h)) / (2 * h)
    assert sym == pytest.approx(-0.25, abs=1e-15)
    assert abs(sym - fd) <= 1e-8


def test_derivatives_are_cached():
    f = parse("sin(x1*x2)")
    assert differentiate(f, 1) is differentiate(f, 1)


# ---------------------------------------------------------------- randomized ASTs

_UNARY = ("sin({})", "cos({})", "exp(sin({}))", "sqrt(1 + ({})^2)", "ln(2 + cos({}))", "-({})")
_BINARY = ("({}) + ({})", "({}) - ({})", "({})*({})", "({})/(1.5 + sin({}))", "({})*sin({})")


def _leaf():
    return st.one_of(st.sampled_from(["x1", "x2", "x3"]),
                     st.integers(-3, 3).map(str),
                     st.sampled_from(["0.5", "1.25", "pi", "e"]))


def _ast(depth):
    if depth == 0:
        return _leaf()
    sub = _ast(depth - 1)
    return st.one_of(
        _leaf(),
        st.tuples(st.sampled_from(_UNARY), sub).map(lambda t: t[0].format(t[1])),
        st.tuples(st.sampled_from(_BINARY), sub, sub).map(lambda t: t[0].format(t[1], t[2])),
        st.tuples(sub, st.integers(2, 3)).map(lambda t: f"({t[0]})^{t[1]}"),
    )


def _fd(f, p, axis, h=1e-5):
    q1, q2 = np.array(p, dtype=float), np.array(p, dtype=float)
    q1[axis - 1] += h
    q2[axis - 1] -= h
    return (evaluate(f, q1) - evaluate(f, q2)) / (2 * h)


@settings(max_examples=100, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])
@given(text=_ast(6), seed=st.integers(0, 2**32 - 1))
def test_symbolic_derivative_matches_central_difference(text, seed):
    f = parse(text)
    points = np.random.default_rng(seed).uniform(-1, 1, (10, 3))
    for p in points:
        for axis in (1, 2, 3):
            sym = evaluate(differentiate(f, axis), p)
            assert abs(sym - _fd(f, p, axis)) <= 1e-6 * (1 + abs(sym)), (text, p, axis)


@settings(max_examples=100, deadline=None, derandomize=True)
@given(text=_ast(5), seed=st.integers(0, 2**32 - 1))
def test_text_round_trip(text, seed):
    f = parse(text)
    g = parse(to_text(f))
    points = np.random.default_rng(seed).uniform(-1, 1, (5, 3))
    a, b = evaluate_many([f], points)[0], evaluate_many([g], points)[0]
    np.testing.assert_allclose(b, a, rtol=1e-12, atol=1e-12)


def test_shared_session_survives_freed_nodes():
    # temporaries are freed each round, so their ids get recycled within the session
    X = np.array([[1.0, 2.0, 3.0], [0.5, 1.5, 2.5]])
    with shared_evaluation():
        for k in range(300):
            f = parse(f"x1 + {k}*x2")
            np.testing.assert_array_equal(evaluate(f, X), X[:, 0] + k * X[:, 1])
            del f
