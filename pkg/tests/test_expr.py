import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bakry_emery.expr import (
    DomainError,
    ExprSyntaxError,
    UnknownIdentifierError,
    eval_jet,
    parse_expr,
)
from oracles import fd, fd_hessian

COORDS = ("t", "x", "y")

leaf = st.one_of(
    st.sampled_from(COORDS),
    st.floats(0.1, 3.0).map(lambda v: f"{v:.3f}"),
    st.sampled_from(["pi", "e"]),
)


def _combine(children):
    binop = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(lambda a: f"({a[0]} {a[1]} {a[2]})")
    call = st.tuples(st.sampled_from(["sin", "cos", "tanh", "exp"]), children).map(lambda a: f"{a[0]}(0.3*{a[1]})")
    neg = children.map(lambda a: f"-({a})")
    power = children.map(lambda a: f"({a})^2")
    return st.one_of(binop, call, neg, power)


sources = st.recursive(leaf, _combine, max_leaves=8)
points = st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3).map(np.array)


@pytest.mark.parametrize(
    "src,point,value",
    [
        ("t + x*y", (1, 2, 3), 7.0),
        ("2^3^2", (0, 0, 0), 512.0),
        ("-2^2", (0, 0, 0), -4.0),
        ("(-2)^2", (0, 0, 0), 4.0),
        ("x1 - x0", (1, 5, 0), 4.0),
        ("exp(t) * cos(pi*x)", (0.0, 1.0, 0.0), -1.0),
        ("sqrt(x^2 + y^2)", (0, 3, 4), 5.0),
        ("abs(-y) / 2", (0, 0, 3), 1.5),
        ("1e-2 * .5", (0, 0, 0), 0.005),
    ],
)
def test_values(src, point, value):
    assert parse_expr(src, COORDS).value(point) == pytest.approx(value, rel=1e-14)


@settings(max_examples=80, deadline=None)
@given(sources, points)
def test_source_round_trip(src, p):
    e = parse_expr(src, COORDS)
    again = parse_expr(e.to_source(), COORDS)
    assert again == e
    assert again.value(p) == e.value(p)


@settings(max_examples=60, deadline=None)
@given(sources, points)
def test_jet_matches_finite_differences(src, p):
    e = parse_expr(src, COORDS)
    jet = eval_jet(e, p)
    grad = np.array([fd(e.value, p, k, 1e-3) for k in range(3)])
    hess = fd_hessian(e.value, p, 1e-2)
    scale = 1.0 + abs(jet.value)
    assert np.allclose(jet.gradient, grad, atol=1e-6 * scale)
    assert np.allclose(jet.hessian, hess, atol=1e-4 * scale)
    assert np.allclose(jet.hessian, jet.hessian.T)


def test_known_jet():
    e = parse_expr("t^2 * sin(x) + exp(y)", COORDS)
    j = eval_jet(e, [2.0, 0.5, 0.0])
    assert j.value == pytest.approx(4 * math.sin(0.5) + 1)
    assert np.allclose(j.gradient, [4 * math.sin(0.5), 4 * math.cos(0.5), 1.0])
    H = np.array([[2 * math.sin(0.5), 4 * math.cos(0.5), 0],
                  [4 * math.cos(0.5), -4 * math.sin(0.5), 0],
                  [0, 0, 1.0]])
    assert np.allclose(j.hessian, H)


def test_free_indices_and_constant():
    assert parse_expr("t*y", COORDS).free_indices == {0, 2}
    assert parse_expr("2*pi", COORDS).is_constant
    assert parse_expr("0", COORDS).is_zero()


@pytest.mark.parametrize("src,offset", [("t + $", 4), ("t +", 3), ("(t", 2), ("t )", 2), ("t * * x", 4)])
def test_syntax_error_offsets(src, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr(src, COORDS)
    assert info.value.offset == offset


def test_offset_is_in_bytes():
    with pytest.raises(ExprSyntaxError) as info:
        parse_expr("t + é", COORDS)
    assert info.value.offset == 4


def test_unknown_identifier_lists_chart():
    with pytest.raises(UnknownIdentifierError, match="t, x, y"):
        parse_expr("r + t", COORDS)
    with pytest.raises(UnknownIdentifierError):
        parse_expr("foo(t)", COORDS)


@pytest.mark.parametrize("src,point", [("log(x)", (0, -1, 0)), ("sqrt(y)", (0, 0, -1)), ("1/x", (0, 0, 0))])
def test_domain_errors(src, point):
    with pytest.raises(DomainError):
        parse_expr(src, COORDS).jet(np.array(point, float))


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        parse_expr("t", COORDS).value([1.0, 2.0])


def test_double_minus_needs_parentheses():
    # factor := ('-')? power admits one leading minus only
    with pytest.raises(ExprSyntaxError):
        parse_expr("--t", COORDS)
    e = parse_expr("-(-t)", COORDS)
    assert parse_expr(e.to_source(), COORDS) == e
