import numpy as np
import pytest

from mabvp import expressions as ex


def test_parse_eval_power_of_sum():
    ast = ex.parse("(v1+v2)^2", 2)
    assert ex.evaluate(ast, [1.0, 2.0]) == 9.0


def test_parse_eval_exp_at_origin():
    ast = ex.parse("exp(v1+v2)", 2)
    assert ex.evaluate(ast, [0.0, 0.0]) == 1.0


def test_sqrt_via_fractional_power():
    ast = ex.parse("(v1+v2)^0.5", 2)
    assert ex.evaluate(ast, [1.0, 3.0]) == 2.0


def test_cube_vanishes_at_origin():
    ast = ex.parse("(v1+v2)^3", 2)
    assert ex.evaluate(ast, [0.0, 0.0]) == 0.0


def test_incomplete_expression_reports_position():
    with pytest.raises(ex.ExpressionSyntaxError) as err:
        ex.parse("v1+", 1)
    assert err.value.position == 3


def test_variable_index_out_of_range():
    with pytest.raises(ex.VariableIndexError):
        ex.parse("v3", 2)


def test_unknown_identifier():
    with pytest.raises(ex.UnknownIdentifierError):
        ex.parse("w1 + v1", 2)


def test_negative_value_raises_range_error():
    ast = ex.parse("v1 - 2*v2", 2)
    with pytest.raises(ex.EvaluationRangeError):
        ex.evaluate(ast, [0.0, 1.0])


def test_division_by_zero_raises_range_error():
    ast = ex.parse("1/v1", 1)
    with pytest.raises(ex.EvaluationRangeError):
        ex.evaluate(ast, [0.0])


def test_zero_power_conventions():
    assert ex.evaluate(ex.parse("v1^0", 1), [0.0]) == 1.0  # 0^0 = 1
    assert ex.evaluate(ex.parse("v1^2.5", 1), [0.0]) == 0.0
    with pytest.raises(ex.EvaluationRangeError):
        ex.evaluate(ex.parse("v1^(-1)", 1), [0.0])


def test_precedence_and_associativity():
    ast = ex.parse("1+2*3", 1)
    assert ex.evaluate(ast, [0.0]) == 7.0
    ast = ex.parse("2*v1^2", 1)  # ^ binds tighter than *
    assert ex.evaluate(ast, [3.0]) == 18.0
    ast = ex.parse("8-4-2", 1)  # left associative
    assert ex.evaluate(ast, [0.0]) == 2.0
    ast = ex.parse("8/4/2", 1)
    assert ex.evaluate(ast, [0.0]) == 1.0


def test_scientific_notation_literals():
    ast = ex.parse("1e-3*v1 + 2.5E2", 1)
    assert ex.evaluate(ast, [1000.0]) == 1.0 + 250.0


def test_no_implicit_multiplication():
    with pytest.raises(ex.ExpressionSyntaxError):
        ex.parse("2v1", 1)


def test_exponent_must_be_literal():
    with pytest.raises(ex.ExpressionSyntaxError):
        ex.parse("v1^v1", 1)


def _random_ast(rng, n, depth):
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return ex.Const(round(float(rng.uniform(0, 5)), 3))
        return ex.Var(int(rng.integers(1, n + 1)))
    choice = rng.random()
    if choice < 0.5:
        op = "+-*/"[int(rng.integers(0, 4))]
        return ex.Binary(op, _random_ast(rng, n, depth - 1), _random_ast(rng, n, depth - 1))
    if choice < 0.8:
        return ex.Pow(_random_ast(rng, n, depth - 1), round(float(rng.uniform(-3, 3)), 2))
    return ex.Exp(_random_ast(rng, n, depth - 1))


def test_print_parse_round_trip_structural():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 4))
        ast = _random_ast(rng, n, 4)
        assert ex.parse(ex.to_string(ast), n) == ast


def test_eval_is_deterministic():
    ast = ex.parse("exp(v1*0.3) + (v1+v2)^1.7/(1+v2)", 2)
    v = np.array([0.73, 1.19])
    first = ex.evaluate(ast, v)
    for _ in range(5):
        assert ex.evaluate(ast, v) == first


def _random_safe_ast(rng, n, depth):
    # only +, *, nonnegative-exponent powers, exp and nonnegative constants
    if depth == 0 or rng.random() < 0.3:
        if rng.random() < 0.5:
            return ex.Const(round(float(rng.uniform(0, 2)), 3))
        return ex.Var(int(rng.integers(1, n + 1)))
    choice = rng.random()
    if choice < 0.5:
        op = "+*"[int(rng.integers(0, 2))]
        return ex.Binary(op, _random_safe_ast(rng, n, depth - 1), _random_safe_ast(rng, n, depth - 1))
    if choice < 0.8:
        return ex.Pow(_random_safe_ast(rng, n, depth - 1), round(float(rng.uniform(0, 2)), 2))
    return ex.Exp(_random_safe_ast(rng, n, depth - 1))


def test_safe_subset_never_raises_on_nonnegative_input():
    rng = np.random.default_rng(11)
    for _ in range(300):
        n = int(rng.integers(1, 4))
        ast = _random_safe_ast(rng, n, 3)
        v = rng.uniform(0, 3, size=n)
        value = ex.evaluate(ast, v)
        assert value >= 0.0 and np.isfinite(value)


def test_validate_nonneg_clean_cases():
    report = ex.validate_nonneg(ex.parse("(v1+v2)^2", 2), 2, radius=10.0, samples=1000)
    assert report.ok
    assert report.h2_positive
    report = ex.validate_nonneg(ex.parse("exp(v1)", 1), 1, radius=5.0, samples=200)
    assert report.ok and report.h2_positive


def test_validate_nonneg_flags_sign_violation():
    report = ex.validate_nonneg(ex.parse("v1 - v2", 2), 2, radius=1.0, samples=200)
    assert not report.ok
    assert report.violations


def test_validate_nonneg_flags_vanishing_ray():
    # f = v1 vanishes along the v2 axis: H1 holds but H2 evidence must fail
    report = ex.validate_nonneg(ex.parse("v1", 2), 2, radius=1.0, samples=200)
    assert report.ok
    assert not report.h2_positive


def test_validate_nonneg_argument_checks():
    ast = ex.parse("v1", 1)
    with pytest.raises(ValueError):
        ex.validate_nonneg(ast, 1, radius=0.0, samples=10)
    with pytest.raises(ValueError):
        ex.validate_nonneg(ast, 1, radius=1.0, samples=0)
