from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmsym import expr as ex


# ---------------------------------------------------------------------------
# parsing and rendering
# ---------------------------------------------------------------------------

def test_parse_rt_squared():
    assert sp.simplify(ex.parse("x1^2 + x2^2") - ex.rt2) == 0


def test_parse_shorthand_product():
    e = ex.parse("rt^2 * exp(sigma*Theta)")
    sigma = sp.Symbol("sigma")
    assert sp.simplify(e - ex.rt2 * sp.exp(sigma * ex.Theta)) == 0


def test_syntax_error_reports_offset():
    with pytest.raises(ex.ExprSyntaxError) as info:
        ex.parse("x1^(")
    assert info.value.offset == 4


@pytest.mark.parametrize("text", ["x1 +", "(x1", "x1 ** ", "sin()", "3 $ 4"])
def test_malformed_inputs_raise(text):
    with pytest.raises(ex.ExprSyntaxError):
        ex.parse(text)


def test_unknown_identifier_when_parameters_declared():
    with pytest.raises(ex.UnknownIdentifierError) as info:
        ex.parse("mu*x1 + kappa", parameters={"mu"})
    assert info.value.name == "kappa"


def test_unary_minus_and_power_precedence():
    assert ex.parse("-x1^2") == -ex.x1**2
    assert ex.parse("2^3^2") == 2**9


def test_slot_application():
    e = ex.parse("G(x3/rt)", slots={"G"})
    assert e.func.__name__ == "G"
    assert e.args[0] == ex.x3 / ex.rt


@pytest.mark.parametrize("text", [
    "x1^2 + x2^2", "rt^2*exp(sigma*Theta)", "kappa*r^sigma", "atan(x2/x1) - 3/4*t",
    "sinh(x3)*cosh(t) + ln(r)", "sqrt(1 + t^2)*atanh(x3/4)", "i*t*x3 - mu*t^2/2",
])
def test_render_parse_round_trip(text):
    e = ex.parse(text)
    assert sp.simplify(ex.parse(ex.render(e)) - e) == 0


# ---------------------------------------------------------------------------
# differentiation and substitution
# ---------------------------------------------------------------------------

def test_derivative_of_rt_squared():
    assert ex.differentiate(ex.parse("x1^2+x2^2"), "x1") == 2 * ex.x1


def test_derivative_of_theta_against_finite_differences():
    d = ex.differentiate(ex.Theta, ex.x1)
    assert ex.is_zero(d + ex.x2 / ex.rt2)
    rng = np.random.default_rng(3)
    box = ex.SamplingBox()
    pts = box.sample_coords(rng, 20)
    h = 1e-5
    for k in range(20):
        p = {s: float(v[k]) for s, v in pts.items()}
        plus = {**p, ex.x1: p[ex.x1] + h}
        minus = {**p, ex.x1: p[ex.x1] - h}
        fd = (ex.evaluate(ex.Theta, plus) - ex.evaluate(ex.Theta, minus)) / (2 * h)
        assert abs(fd - ex.evaluate(d, p)) < 1e-6 * (1 + abs(fd))


def test_time_derivative_of_t_ln_r():
    assert sp.simplify(ex.differentiate(ex.parse("t*ln(r)"), "t") - sp.log(ex.r)) == 0


def test_substitute_parameter():
    sigma = sp.Symbol("sigma")
    assert ex.substitute(ex.rt**sigma, {"sigma": 2}) == ex.rt2


def test_substitute_shift_of_x3():
    omega = sp.Symbol("omega")
    e = ex.substitute(sp.exp(ex.x3), {"x3": ex.x3 - omega})
    assert e == sp.exp(ex.x3 - omega)


def test_substitute_slot_with_lambda():
    u = sp.Symbol("u")
    e = ex.parse("G(x3/rt)", slots={"G"})
    out = ex.substitute(e, {"G": sp.Lambda(u, u**2)})
    assert ex.is_zero(out - ex.x3**2 / ex.rt2)


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def test_eval_theta():
    assert ex.evaluate(ex.Theta, {"x1": 1.0, "x2": 1.0}) == pytest.approx(math.pi / 4)


def test_eval_r_squared():
    assert ex.evaluate(ex.r2, {"x1": 1, "x2": 2, "x3": 2}) == pytest.approx(9)


def test_eval_power_potential():
    e = ex.parse("kappa*r^sigma")
    val = ex.evaluate(e, {"kappa": 2, "sigma": -1, "x1": 4, "x2": 0, "x3": 0})
    assert val == pytest.approx(0.5)


def test_eval_domain_errors():
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("ln(x1)"), {"x1": -1.0})
    with pytest.raises(ex.DomainError):
        ex.evaluate(ex.parse("1/x1"), {"x1": 0.0})


def test_eval_requires_all_bindings():
    with pytest.raises(KeyError):
        ex.evaluate(ex.parse("x1 + mu"), {"x1": 1.0})


# ---------------------------------------------------------------------------
# zero test
# ---------------------------------------------------------------------------

def test_pythagorean_identity_is_zero():
    assert ex.is_zero(ex.parse("sin(x1)^2 + cos(x1)^2 - 1"))


def test_nonzero_has_witness():
    z = ex.is_zero(ex.x1 - ex.x2)
    assert not z
    assert z.witness is not None and "x1" in z.witness


def test_is_zero_requires_twenty_trials():
    with pytest.raises(ValueError):
        ex.is_zero(ex.x1, trials=5)


# ---------------------------------------------------------------------------
# properties over random trees
# ---------------------------------------------------------------------------

_LEAVES = [ex.x1, ex.x2, ex.x3, ex.t, sp.Integer(2), sp.Rational(1, 3), sp.Symbol("mu")]
_UNARY = [sp.exp, sp.sin, sp.cos, sp.atan, lambda u: sp.log(1 + u**2), lambda u: sp.sqrt(2 + u**2)]


@st.composite
def trees(draw, depth: int = 6):
    if depth == 0 or draw(st.booleans()):
        return draw(st.sampled_from(_LEAVES))
    kind = draw(st.sampled_from(["add", "mul", "fun", "pow"]))
    a = draw(trees(depth=depth - 1))
    if kind == "fun":
        return draw(st.sampled_from(_UNARY))(a)
    if kind == "pow":
        return a ** draw(st.integers(1, 3))
    b = draw(trees(depth=depth - 1))
    return a + b if kind == "add" else a * b


_SETTINGS = settings(max_examples=25, deadline=None)


@_SETTINGS
@given(trees(), trees(), st.integers(-3, 3), st.integers(-3, 3))
def test_differentiate_is_linear(e1, e2, a, b):
    lhs = ex.differentiate(a * e1 + b * e2, ex.x1)
    rhs = a * ex.differentiate(e1, ex.x1) + b * ex.differentiate(e2, ex.x1)
    assert ex.is_zero(lhs - rhs)


@_SETTINGS
@given(trees(), trees())
def test_product_rule(e1, e2):
    lhs = ex.differentiate(e1 * e2, ex.x2)
    rhs = ex.differentiate(e1, ex.x2) * e2 + e1 * ex.differentiate(e2, ex.x2)
    assert ex.is_zero(lhs - rhs)


@_SETTINGS
@given(trees(depth=4))
def test_chain_rule(e):
    lhs = ex.differentiate(sp.sin(e), ex.x3)
    rhs = sp.cos(e) * ex.differentiate(e, ex.x3)
    assert ex.is_zero(lhs - rhs)


@_SETTINGS
@given(trees())
def test_mixed_partials_commute(e):
    d12 = ex.differentiate(ex.differentiate(e, ex.x1), ex.x2)
    d21 = ex.differentiate(ex.differentiate(e, ex.x2), ex.x1)
    assert ex.is_zero(d12 - d21)


@_SETTINGS
@given(trees())
def test_render_parse_identity_on_trees(e):
    assert ex.is_zero(ex.parse(ex.render(e)) - e)
