"""
Tests for app.utils.funcs.

Covers:
1. Parsing and evaluation examples
2. Precedence and associativity
3. Error offsets, unknown identifiers and domain errors
4. Source round trip on generated expression trees
5. Builtins and function resolution
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.core.exceptions import DomainError, ExpressionSyntaxError, UnknownIdentifierError
from app.utils.funcs import (
    BUILTINS,
    BinOp,
    Call,
    CompiledExpression,
    Neg,
    Num,
    Var,
    evaluate_expr,
    parse,
    resolve,
    to_source,
)


@pytest.mark.parametrize(
    "src, x, expected",
    [
        ("x^3", 2.0, 8.0),
        ("x^2*sign(x)", -0.5, -0.25),
        ("exp(x)", 0.0, 1.0),
        ("abs(x)^3", -2.0, 8.0),
        ("sinh(x)", 0.0, 0.0),
        ("max(x, 0)^3", -1.0, 0.0),
        ("min(x, 1, 2*x)", 3.0, 1.0),
        ("sign(x)", 0.0, 0.0),
        ("1.5e1 + .5", 0.0, 15.5),
    ],
)
def test_evaluate_examples(src, x, expected):
    """Test 1: scalar evaluation of parsed expressions."""
    assert evaluate_expr(parse(src), x) == pytest.approx(expected)


def test_evaluate_is_vectorised():
    xs = np.linspace(-1.0, 1.0, 9)
    values = evaluate_expr(parse("x*abs(x)"), xs)
    assert values.shape == xs.shape
    assert np.allclose(values, xs * np.abs(xs))


@pytest.mark.parametrize(
    "src, expected",
    [
        ("2+3*4", 14.0),
        ("2*3+4", 10.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("(2+3)*4", 20.0),
        ("8/4/2", 1.0),
        ("1-2-3", -4.0),
    ],
)
def test_precedence(src, expected):
    """Test 2: ^ binds tightest and is right associative; unary minus sits below it."""
    assert evaluate_expr(parse(src), 0.0) == pytest.approx(expected)


def test_parse_tree_shape():
    assert parse("-x^2") == Neg(BinOp("^", Var(), Num(2.0)))
    assert parse("exp(x)+1") == BinOp("+", Call("exp", (Var(),)), Num(1.0))


@pytest.mark.parametrize(
    "src, offset",
    [("2+*3", 2), ("(x+1", 4), ("x+", 2), ("x 2", 2), ("exp x", 4)],
)
def test_syntax_error_offsets(src, offset):
    """Test 3: errors carry the offset of the offending token."""
    with pytest.raises(ExpressionSyntaxError) as info:
        parse(src)
    assert info.value.offset == offset
    assert f"(at offset {offset})" in str(info.value)


@pytest.mark.parametrize("src", ["y+1", "foo(x)", "2*log(x)"])
def test_unknown_identifiers(src):
    with pytest.raises(UnknownIdentifierError):
        parse(src)


@pytest.mark.parametrize("src", ["min(x)", "exp(x, 1)", "abs()"])
def test_arity_errors(src):
    with pytest.raises(ExpressionSyntaxError):
        parse(src)


def test_division_by_zero_is_a_domain_error():
    with pytest.raises(DomainError):
        evaluate_expr(parse("1/x"), 0.0)
    with pytest.raises(DomainError):
        evaluate_expr(parse("1/x"), np.array([1.0, 0.0]))


def test_non_finite_is_a_domain_error():
    with pytest.raises(DomainError):
        evaluate_expr(parse("exp(x)"), 1000.0)
    with pytest.raises(DomainError):
        evaluate_expr(parse("x^0.5"), -1.0)


leaves = st.one_of(
    st.just(Var()),
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False, allow_infinity=False).map(Num),
)


def extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/^"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(st.sampled_from(["exp", "abs", "sign", "sinh"]), children).map(lambda t: Call(t[0], (t[1],))),
        st.tuples(st.sampled_from(["min", "max"]), st.lists(children, min_size=2, max_size=3)).map(
            lambda t: Call(t[0], tuple(t[1]))
        ),
    )


@settings(max_examples=200)
@given(st.recursive(leaves, extend, max_leaves=12))
def test_to_source_round_trip(expr):
    """Test 4: parse(to_source(e)) == e."""
    assert parse(to_source(expr)) == expr


def test_builtins_match_expressions():
    """Test 5: builtin names and their expression forms agree."""
    xs = np.linspace(-1.0, 1.0, 41)
    pairs = {
        "exp": "exp(x)",
        "x2sign": "x*abs(x)",
        "xplus3": "max(x, 0)^3",
        "sinh": "sinh(x)",
        "negcubic": "-x^3",
    }
    for name, src in pairs.items():
        assert np.allclose(BUILTINS[name](xs), evaluate_expr(parse(src), xs)), name


def test_resolve_builtins_and_cubics():
    f, spec = resolve("exp")
    assert f is np.exp
    assert spec.builtin == "exp"
    assert not spec.negative

    _, spec = resolve("negcubic")
    assert spec.negative

    f, spec = resolve("cubic(1,2,-1,1)")
    assert spec.builtin == "cubic"
    assert spec.params == (1.0, 2.0, -1.0, 1.0)
    assert f(2.0) == pytest.approx(8 + 8 - 2 + 1)
    assert resolve("cubic(-1, 0, 0, 0)")[1].negative

    with pytest.raises(ExpressionSyntaxError):
        resolve("cubic(1,2)")


def test_resolve_expression():
    f, spec = resolve("x^3 - x")
    assert isinstance(f, CompiledExpression)
    assert spec.expression == "x^3 - x"
    assert spec.builtin is None
    assert f(2.0) == pytest.approx(6.0)
    assert np.allclose(f(np.array([0.0, 1.0])), [0.0, 0.0])
