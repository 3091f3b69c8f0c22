import math
import threading

import pytest
from hypothesis import given, settings, strategies as st

from nedlin.expr import (
    EvalContext,
    Expression,
    ExpressionDomainError,
    UnboundVariableError,
    evaluate,
    parse,
)


def test_t_sin_t_at_half_pi():
    assert evaluate(parse("t*sin(t)"), EvalContext(bindings={"t": math.pi / 2})) == pytest.approx(math.pi / 2)


def test_exp_zero():
    assert evaluate(parse("exp(0)"), EvalContext()) == 1.0


def test_left_to_right_arithmetic():
    assert evaluate(parse("-1*(2)+3"), {}) == 1.0


def test_functions():
    ctx = {"x1": 4.0, "x2": -3.0}
    assert evaluate(parse("sqrt(x1)"), ctx) == 2.0
    assert evaluate(parse("abs(x2)"), ctx) == 3.0
    assert evaluate(parse("pow(x1, 0.5)"), ctx) == 2.0
    assert evaluate(parse("min(x1, x2, 0)"), ctx) == -3.0
    assert evaluate(parse("max(x1, x2)"), ctx) == 4.0
    assert evaluate(parse("ln(exp(x2))"), ctx) == pytest.approx(-3.0)


def test_unbound_variable():
    with pytest.raises(UnboundVariableError) as err:
        evaluate(parse("t + w"), {"t": 1.0})
    assert err.value.name == "w"


@pytest.mark.parametrize("source, sub", [("ln(t - 1)", "ln(t - 1.0)"), ("sqrt(-t)", "sqrt(-t)"), ("1/(t - 1)", "1.0 / (t - 1.0)")])
def test_domain_errors_name_the_subexpression(source, sub):
    with pytest.raises(ExpressionDomainError) as err:
        evaluate(parse(source), {"t": 1.0})
    assert err.value.subexpression == sub


def test_overflow_is_infinite():
    assert evaluate(parse("exp(t)"), {"t": 1e4}) == math.inf


def test_json_round_trip_uses_source_text():
    e = parse("-w + a*t*sin(t)")
    assert e.model_dump() == "-w + a * t * sin(t)"
    assert Expression.model_validate(e.model_dump()) == e
    assert Expression.model_validate(2) == Expression.constant(2.0)


def test_structural_equality_and_hash():
    a, b = parse("x1*(t+1)"), parse("x1 * (t + 1)")
    assert a == b and hash(a) == hash(b)
    assert a != parse("x1*t + 1")


def test_substitute_is_simultaneous():
    e = parse("x1 - x2")
    swapped = e.substitute({"x1": parse("x2"), "x2": parse("x1")})
    assert swapped == parse("x2 - x1")


def test_builders_skip_trivial_terms():
    x = Expression.variable("x1")
    zero, one = Expression.constant(0.0), Expression.constant(1.0)
    assert x + zero == x
    assert zero - x == -x
    assert (x * zero).is_zero()
    assert one * x == x
    assert x / one == x
    assert -(-x) == x
    assert (x - Expression.constant(2.0)).source == "x1 - 2.0"


def test_concurrent_evaluation_is_pure():
    e = parse("exp(-2*b*t)*sin(x1) + t*t")
    ctx = {"b": 0.3, "t": 1.7, "x1": 0.4}
    expected = evaluate(e, ctx)
    results = []

    def work():
        for _ in range(200):
            results.append(evaluate(e, ctx))

    threads = [threading.Thread(target=work) for _ in range(4)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert len(results) == 800
    assert all(r == expected for r in results)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(-50, 50, allow_nan=False),
    st.floats(-50, 50, allow_nan=False),
    st.floats(0.1, 50, allow_nan=False),
)
def test_evaluation_matches_python_arithmetic(a, b, c):
    ctx = {"a": a, "b": b, "c": c}
    assert evaluate(parse("a - b*c + a/c"), ctx) == a - b * c + a / c
    assert evaluate(parse("-(a - b)*c"), ctx) == -(a - b) * c
