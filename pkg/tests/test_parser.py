"""Surface syntax: parsing, printing, and the round-trip identity."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aggterm.errors import ConfigError
from aggterm.parser import ParseError, parse_term, print_term
from aggterm.registry import default_registry
from aggterm.terms import (Apply, Const, Feature, GlobalWMean, LocalWMean,
                           Rw, free_vars, validate_term)
from conftest import rand_term

REG = default_registry()


def test_parse_scalar_broadcasts():
    assert parse_term("0.5", 3, registry=REG) == Const((0.5, 0.5, 0.5))


def test_parse_vector_literal():
    assert parse_term("[1, 0, 2]", 3, registry=REG) == Const((1.0, 0.0, 2.0))


def test_parse_vector_width_checked():
    with pytest.raises(ParseError):
        parse_term("[1, 0]", 3, registry=REG)


def test_parse_negative_and_exponent_numbers():
    assert parse_term("-0.5", 1, registry=REG) == Const((-0.5,))
    assert parse_term("2.5e-3", 1, registry=REG) == Const((0.0025,))


def test_parse_local_wmean():
    t = parse_term("wmean[y in N(x)](H(y), exp, H(x))", 2, registry=REG)
    assert t == LocalWMean("y", "x", Feature("y"), "exp", Feature("x"))


def test_parse_weight_defaults_to_value():
    t = parse_term("wmean[y](H(y), softplus)", 1, registry=REG)
    assert t == GlobalWMean("y", Feature("y"), "softplus", Feature("y"))


def test_parse_mean_sugar():
    t = parse_term("mean[y in N(x)](H(y))", 1, registry=REG)
    assert t == LocalWMean("y", "x", Feature("y"), "one", Feature("y"))


def test_parse_rw_and_apply():
    t = parse_term("add(rw(x, 4), relu(H(x)))", 4, registry=REG)
    assert t == Apply("add", (Rw("x", 4),
                              Apply("relu", (Feature("x"),))))


def test_parse_comments_and_whitespace():
    src = """
    # the global average
    mean[v](
        H(v)  # node feature
    )
    """
    assert parse_term(src, 1, registry=REG) == GlobalWMean(
        "v", Feature("v"), "one", Feature("v"))


def test_parse_closed_flag():
    with pytest.raises(ParseError):
        parse_term("H(x)", 1, registry=REG, closed=True)


def test_parse_reserved_binder_rejected():
    with pytest.raises(ParseError):
        parse_term("mean[mean](H(mean))", 1, registry=REG)


def test_parse_unknown_function_rejected():
    with pytest.raises(ParseError):
        parse_term("frobnicate(H(x))", 1, registry=REG)


def test_parse_arity_rejected():
    with pytest.raises(ParseError):
        parse_term("add(H(x))", 1, registry=REG)


def test_parse_error_has_position():
    with pytest.raises(ParseError, match=r"^1:10"):
        parse_term("add(1.0, )", 1, registry=REG)


def test_print_examples():
    t = parse_term("wmean[y in N(x)](H(y), exp, H(x))", 2, registry=REG)
    assert print_term(t) == "wmean[y in N(x)](H(y), exp, H(x))"
    t2 = parse_term("mean[y](H(y))", 1, registry=REG)
    assert print_term(t2) == "mean[y](H(y))"


def test_round_trip_fixed_corpus():
    rng = np.random.default_rng(20260816)
    for i in range(300):
        d = int(rng.integers(1, 5))
        term = rand_term(rng, d)
        validate_term(term, REG, d)
        again = parse_term(print_term(term), d, registry=REG)
        assert again == term, print_term(term)


@settings(max_examples=120, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 4))
def test_round_trip_property(seed, d):
    rng = np.random.default_rng(seed)
    term = rand_term(rng, d)
    assert parse_term(print_term(term), d, registry=REG) == term


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_preserves_free_vars(seed):
    rng = np.random.default_rng(seed)
    term = rand_term(rng, 2, scope=("a", "b"))
    again = parse_term(print_term(term), 2, registry=REG)
    assert free_vars(again) == free_vars(term)
