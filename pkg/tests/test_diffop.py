from __future__ import annotations

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmsym import diffop as dop
from pdmsym import expr as ex
from pdmsym.diffop import commutator, compose, standard_generator as G

I = sp.I


def same(A: dop.DiffOperator, B: dop.DiffOperator) -> bool:
    return all(dop.operator_is_zero(A - B).values())


# ---------------------------------------------------------------------------
# Schrodinger operator
# ---------------------------------------------------------------------------

def test_free_particle_operator():
    L = dop.schrodinger_operator(dop.PdmSystem(sp.Integer(1), sp.Integer(0)))
    expected = dop.DiffOperator({(1, 0, 0, 0): I, (0, 2, 0, 0): sp.Rational(1, 2),
                                 (0, 0, 2, 0): sp.Rational(1, 2), (0, 0, 0, 2): sp.Rational(1, 2)})
    assert same(L, expected)


def test_free_particle_operator_annihilates_plane_wave():
    k = (0.3, -0.7, 1.1)
    w = sum(c * c for c in k) / 2
    u = sp.exp(I * (k[0] * ex.x1 + k[1] * ex.x2 + k[2] * ex.x3 - w * ex.t))
    L = dop.schrodinger_operator(dop.PdmSystem(sp.Integer(1), sp.Integer(0)))
    assert ex.is_zero(L.apply(u))


def test_exponential_mass_operator():
    f = sp.exp(ex.x3)
    L = dop.schrodinger_operator(dop.PdmSystem(f, sp.Integer(0)))
    assert ex.is_zero(L.coefficient((0, 0, 0, 1)) - f / 2)
    assert ex.is_zero(L.coefficient((0, 2, 0, 0)) - f / 2)
    assert L.coefficient((0, 1, 0, 0)) == 0


def test_power_mass_first_order_coefficient():
    mu = sp.Symbol("mu")
    L = dop.schrodinger_operator(dop.PdmSystem(ex.rt2, mu * ex.Theta))
    assert ex.is_zero(L.coefficient((0, 1, 0, 0)) - ex.x1)
    assert ex.is_zero(L.coefficient((0, 0, 0, 0)) + mu * ex.Theta)


# ---------------------------------------------------------------------------
# composition and commutators
# ---------------------------------------------------------------------------

def test_leibniz_base_case():
    out = compose(dop.DiffOperator.partial(ex.x1), dop.DiffOperator.scalar(ex.x1))
    assert same(out, dop.DiffOperator({(0, 1, 0, 0): ex.x1, (0, 0, 0, 0): 1}))


def test_composition_against_numeric_application():
    A = compose(G("D"), G("P3"))
    assert A.order == 2
    direct = G("D").apply(G("P3").apply(sp.exp(-ex.r2) * ex.x1 * ex.x3))
    assert ex.is_zero(A.apply(sp.exp(-ex.r2) * ex.x1 * ex.x3) - direct)
    # Nested finite differences act on D and P3 separately through the scalar test functions.
    rng = np.random.default_rng(4)
    box = ex.SamplingBox()
    pts = box.sample_coords(rng, 10)
    X = np.array([pts[v] for v in ex.COORDS], dtype=float)
    for k in range(10):
        u = dop._test_function(k, rng)
        inner = lambda Y, u=u: dop.apply_numeric(G("P3"), u, Y)  # noqa: E731
        lhs = dop.apply_numeric(G("D"), inner, X)
        rhs = dop.apply_numeric(A, u, X)
        assert np.max(np.abs(lhs - rhs) / (1 + np.abs(rhs))) < 1e-5


def test_identity_composition():
    A = G("K3")
    assert same(compose(G("I"), A), A)
    assert same(compose(A, G("I")), A)


def test_order_overflow():
    A = dop.DiffOperator({(0, 3, 0, 0): 1})
    with pytest.raises(dop.OrderOverflow):
        compose(A, A)


@pytest.mark.parametrize("a, b, rhs", [
    ("L1", "L2", lambda: I * G("L3")),
    ("D", "P3", lambda: I * G("P3")),
    ("P1", "P2", lambda: dop.DiffOperator()),
    ("D", "K3", lambda: -I * G("K3")),
    ("P3", "K3", lambda: 2 * I * G("D")),
])
def test_standard_brackets(a, b, rhs):
    assert same(commutator(G(a), G(b)), rhs())


def test_k3_expansion():
    K3 = ex.r2 * G("P3") - 2 * ex.x3 * G("D")
    assert same(G("K3"), K3)


def test_m04_is_dilation():
    assert same(G("M", 0, 4), G("D"))


def test_unit_operator():
    assert G("I") == dop.DiffOperator.scalar(1)


def test_unknown_generator():
    with pytest.raises(dop.UnknownGenerator):
        G("Z9")


def test_operator_json_round_trip():
    A = G("K1") + ex.t * G("P0")
    assert dop.DiffOperator.from_json(A.to_json()) == A


_NAMES = ["P1", "P2", "P3", "L1", "L2", "L3", "D", "K1", "K2", "K3", "P0"]


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(_NAMES), st.sampled_from(_NAMES), st.sampled_from(_NAMES))
def test_jacobi_identity(a, b, c):
    A, B, C = G(a), G(b), G(c)
    total = (commutator(commutator(A, B), C) + commutator(commutator(B, C), A)
             + commutator(commutator(C, A), B))
    assert all(dop.operator_is_zero(total).values())


@settings(max_examples=15, deadline=None)
@given(st.sampled_from(_NAMES), st.sampled_from(_NAMES))
def test_commutator_antisymmetry(a, b):
    assert same(commutator(G(a), G(b)), -commutator(G(b), G(a)))


def test_so14_relations_zero_tested():
    g = np.diag([1, -1, -1, -1, -1])
    pairs = [(m, n) for m in range(5) for n in range(m + 1, 5)]
    count = 0
    for p, (m, n) in enumerate(pairs):
        for (l, s) in pairs[p + 1:]:
            rhs = I * (g[m, s] * G("M", n, l) + g[n, l] * G("M", m, s)
                       - g[m, l] * G("M", n, s) - g[n, s] * G("M", m, l))
            assert same(commutator(G("M", m, n), G("M", l, s)), rhs)
            count += 1
    assert count == 45


# ---------------------------------------------------------------------------
# symmetry check
# ---------------------------------------------------------------------------

def test_translation_symmetry_of_x3_system():
    s = dop.PdmSystem(sp.exp(ex.x3), ex.x3**2)
    rep = dop.check_symmetry(G("P1"), s)
    assert rep.passed
    assert ex.is_zero(rep.a)


def test_time_dilation_generator_of_exponential_mass():
    kappa = sp.Rational(7, 5)
    s = dop.PdmSystem(sp.exp(ex.x3), kappa * sp.exp(ex.x3))
    Q = dop.parse_operator("i*t*dt + P3")
    rep = dop.check_symmetry(Q, s)
    assert rep.passed
    assert ex.is_zero(rep.a_normalized + 1)


def test_rotation_family_generator():
    mu = sp.Rational(3, 4)
    s = dop.PdmSystem(ex.rt2, ex.rt2 + mu * ex.Theta)
    Q = dop.parse_operator("t*(L3 + mu*t/2) - Theta", macros={"mu": mu})
    assert dop.check_symmetry(Q, s).passed


def test_broken_symmetry_reports_witness():
    s = dop.PdmSystem(sp.exp(ex.x3), sp.exp(ex.x3) + ex.x1)
    rep = dop.check_symmetry(G("P1"), s)
    assert not rep.passed
    assert rep.failing()


def test_p0_determining_residuals_vanish():
    s = dop.PdmSystem(sp.exp(ex.x3), ex.x1 * ex.x2)
    for name, res in dop.determining_residuals(1, (0, 0, 0), 0, 0, s):
        assert ex.is_zero(res), name


def test_p3_fails_mass_condition_for_exponential_mass():
    s = dop.PdmSystem(sp.exp(ex.x3), sp.Integer(0))
    res = dict(dop.determining_residuals(0, (0, 0, 1), 0, 0, s))
    assert not ex.is_zero(res["de6"])
    assert not dop.check_symmetry(G("P3"), s).passed


def test_conformal_killing_dilation():
    xi = dop.conformal_killing((0, 0, 0), 1, (0, 0, 0), (0, 0, 0))
    assert xi == (ex.x1, ex.x2, ex.x3)


def test_conformal_killing_rotation():
    phid = sp.Function("phid")(ex.t)
    xi = dop.conformal_killing((0, 0, 0), 0, (0, 0, phid), (0, 0, 0))
    assert sp.simplify(xi[0] + phid * ex.x2) == 0
    assert sp.simplify(xi[1] - phid * ex.x1) == 0
    assert xi[2] == 0


def test_conformal_killing_special_conformal():
    xi = dop.conformal_killing((0, 0, 1), 0, (0, 0, 0), (0, 0, 0))
    assert sp.expand(xi[0] + 2 * ex.x3 * ex.x1) == 0
    assert sp.expand(xi[2] - (ex.r2 - 2 * ex.x3**2)) == 0
    s = dop.PdmSystem(sp.Integer(1), sp.Integer(0))
    res = dict(dop.determining_residuals(0, xi, 0, 0, s))
    for key in (k for k in res if k.startswith("de5")):
        assert ex.is_zero(res[key])


@settings(max_examples=12, deadline=None)
@given(st.lists(st.integers(-2, 2), min_size=11, max_size=11),
       st.sampled_from(["r2", "rt2", "exp(x3)", "1"]))
def test_determining_equations_match_symmetry_check(c, mass):
    """Both tests must agree on a random first-order candidate."""
    xi0 = c[0] + c[1] * ex.t
    lam, omega, theta, nu = (0, 0, c[2]), sp.Rational(c[3], 2), (c[4], 0, c[5]), (c[6], c[7], 0)
    xi = dop.conformal_killing(lam, omega, theta, nu)
    eta = sp.Rational(c[8], 3) * ex.x1 * ex.t + c[9]
    a = -c[1]
    f = ex.parse(mass)
    s = dop.PdmSystem(f, sp.Rational(c[10], 2) * ex.x3**2)
    det = all(ex.is_zero(r) for _, r in dop.determining_residuals(xi0, xi, eta, a, s))
    rep = dop.check_symmetry(dop.symmetry_operator(xi0, xi, eta), s)
    assert det == (rep.passed and ex.is_zero(rep.a - a).zero)
