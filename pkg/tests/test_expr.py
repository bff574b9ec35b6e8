import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specgap.expr import (
    BinOp,
    Call,
    Const,
    EvaluationError,
    Neg,
    Num,
    ParseError,
    Var,
    evaluate,
    log_evaluate,
    parse,
    unparse,
)

FUNCTIONS_1 = ("exp", "log", "sqrt", "abs")
FUNCTIONS_2 = ("min", "max", "pow")


def expressions(max_leaves: int = 12):
    """Random well-formed expression trees."""
    leaves = st.one_of(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
        st.just(Var()),
        st.sampled_from(("pi", "e")).map(Const),
    )

    def extend(children):
        return st.one_of(
            children.map(Neg),
            st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
            st.tuples(st.sampled_from(FUNCTIONS_1), children).map(lambda t: Call(t[0], (t[1],))),
            st.tuples(st.sampled_from(FUNCTIONS_2), children, children).map(
                lambda t: Call(t[0], (t[1], t[2]))),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def ev(text, r):
    return evaluate(parse(text), r)


# ---------------------------------------------------------------------------
# documented examples


def test_exp_example():
    assert ev("exp(-2*r)", 1.0) == pytest.approx(math.exp(-2), rel=1e-15)


def test_power_example():
    assert ev("(1+r^2)^1.5", 2.0) == pytest.approx(5**1.5, rel=1e-15)
    assert ev("(1+r^2)^1.5", 2.0) == pytest.approx(11.18034, abs=1e-5)


def test_unclosed_call_reports_offset():
    with pytest.raises(ParseError) as info:
        parse("exp(")
    assert info.value.offset == 4


def test_identity_and_min():
    assert ev("r", 3.5) == 3.5
    assert ev("min(r, 2)", 5.0) == 2.0


def test_log_domain_error():
    with pytest.raises(EvaluationError):
        ev("log(r-1)", 1.0)


# ---------------------------------------------------------------------------
# grammar details


@pytest.mark.parametrize("text,r,expected", [
    ("2^3^2", 0.0, 2.0**9),              # right associative
    ("-2^2", 0.0, -4.0),                 # ^ binds tighter than unary minus
    ("2^-1", 0.0, 0.5),
    ("8/4/2", 0.0, 1.0),                 # left associative
    ("10-4-3", 0.0, 3.0),
    ("1+2*3", 0.0, 7.0),
    ("pi", 0.0, math.pi),
    ("e", 0.0, math.e),
    ("max(r, 1) + pow(r, 2)", 3.0, 12.0),
    ("abs(-r)", 2.5, 2.5),
    ("sqrt(r)", 9.0, 3.0),
    ("1.5e2 + .5", 0.0, 150.5),
    ("r^(1-3)*exp(-r+4*r^2)", 1.0, math.exp(3.0)),
])
def test_precedence_and_values(text, r, expected):
    assert ev(text, r) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("text,offset", [
    ("(1+r", 4),
    ("1+r)", 3),
    ("foo(r)", 0),
    ("r r", 2),
    ("2 $ 3", 2),
    ("min(r)", 0),
    ("", 0),
])
def test_parse_errors(text, offset):
    with pytest.raises(ParseError) as info:
        parse(text)
    assert info.value.offset == offset


@pytest.mark.parametrize("text,r", [
    ("1/r", 0.0),
    ("log(r)", 0.0),
    ("sqrt(r-2)", 1.0),
    ("(-r)^0.5", 2.0),
    ("r^(-1)", 0.0),
])
def test_domain_violations_raise(text, r):
    with pytest.raises(EvaluationError):
        ev(text, r)


def test_overflow_is_allowed():
    assert ev("exp(r)", 1000.0) == math.inf


def test_vector_evaluation_matches_scalar():
    tree = parse("exp(-r)*(1+r^2)^0.5 + min(r, 3)")
    rs = np.linspace(0.1, 10, 37)
    vec = evaluate(tree, rs)
    assert np.allclose(vec, [evaluate(tree, float(x)) for x in rs], rtol=0, atol=0)


def test_constant_expression_broadcasts():
    out = evaluate(parse("2"), np.zeros(5))
    assert out.shape == (5,) and np.all(out == 2.0)


def test_log_evaluate_stays_finite_past_overflow():
    tree = parse("r^(-2)*exp(4*r^2)")
    r = 30.0
    assert evaluate(tree, r) == math.inf
    assert log_evaluate(tree, r) == pytest.approx(-2 * math.log(r) + 4 * r * r, rel=1e-15)


@pytest.mark.parametrize("text", ["exp(-r)*sqrt(r)", "(1+r^2)^2/(1+r)", "r^3*exp(r)/e", "pow(r, 2.5)"])
def test_log_evaluate_matches_log_of_value(text):
    tree = parse(text)
    rs = np.linspace(0.2, 8, 25)
    assert np.allclose(log_evaluate(tree, rs), np.log(evaluate(tree, rs)), rtol=1e-13, atol=1e-13)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=1000)
@given(expressions())
def test_round_trip_fixpoint(tree):
    text = unparse(tree)
    again = parse(text)
    assert again == tree
    assert unparse(again) == text


@settings(max_examples=200)
@given(expressions(), st.floats(min_value=0.0, max_value=50.0))
def test_evaluation_is_deterministic(tree, r):
    def once():
        try:
            return ("ok", evaluate(tree, r))
        except EvaluationError:
            return ("err", None)

    a, b = once(), once()
    assert a[0] == b[0]
    if a[0] == "ok":
        assert a[1] == b[1] or (math.isnan(a[1]) and math.isnan(b[1]))
