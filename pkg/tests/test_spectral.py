from __future__ import annotations

import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmsym import spectral as spc

r = spc.R_SYM


def _laguerre_oracle(n: int, p: spc.RadialProblem) -> float:
    """``E = nu omega (2n + g + 1/2)`` from the Frobenius exponent ``g`` of the oscillator form."""
    g = 0.5 + math.sqrt(0.25 + (p.l * (p.l + 1) + p.delta) / p.nu ** 2)
    return p.nu * p.omega * (2 * n + g + 0.5)


# ---------------------------------------------------------------------------
# radial reduction
# ---------------------------------------------------------------------------

def test_radial_equation_for_unit_exponent():
    kappa, omega = sp.Symbol("kappa"), sp.Symbol("omega")
    ode = spc.radial_reduce(1, omega, kappa, 0)
    assert sp.simplify(ode.a2 + r**4) == 0
    assert sp.simplify(ode.a1 + 6 * r**3) == 0
    assert sp.simplify(ode.a0 - (2 * kappa * r**2 + omega**2 / r**2)) == 0


def test_printed_radial_equation_halves_kappa():
    ode = spc.radial_reduce(1, 1, 3, 1, variant="printed")
    assert sp.simplify(ode.a0 - ((2 + 3) * r**2 + r**-2)) == 0


@pytest.mark.parametrize("nu, kappa, l", [(1, 0, 0), (2, -3, 1), (sp.Rational(3, 2), 1, 2)])
def test_amended_reduction_matches_hamiltonian(nu, kappa, l):
    a = spc.radial_reduce(nu, 1, kappa, l)
    b = spc.radial_operator_from_hamiltonian(nu, 1, kappa, l)
    for x, y in ((a.a2, b.a2), (a.a1, b.a1), (a.a0, b.a0)):
        assert sp.simplify(x - y) == 0


def test_printed_reduction_differs_from_hamiltonian():
    a = spc.radial_reduce(1, 1, 2, 0, variant="printed")
    b = spc.radial_operator_from_hamiltonian(1, 1, 2, 0)
    assert sp.simplify(a.a0 - b.a0) != 0


def test_delta_values():
    assert spc.RadialProblem(1, 1, 0, 0).delta == pytest.approx(6)
    p = spc.RadialProblem.constrained(2, 1, 0)
    assert p.kappa == pytest.approx(-6)
    assert p.delta == pytest.approx(-0.75)
    assert p.satisfies_constraint


@pytest.mark.parametrize("l", range(4))
def test_constrained_centrifugal_term(l):
    p = spc.RadialProblem(1, 1, -3, l)
    assert p.centrifugal == pytest.approx(((2 * l + 1) ** 2 - 1) / 4)


def test_invalid_problem():
    with pytest.raises(ValueError):
        spc.RadialProblem(0, 1, 0, 0)
    with pytest.raises(ValueError):
        spc.RadialProblem(1, 1, 0, 1.5)


def test_unbounded_problem_is_rejected():
    p = spc.RadialProblem(1, 1, -20, 0)
    assert not p.bounded_below
    with pytest.raises(spc.SpectrumError):
        spc.numeric_eigenvalues(p, 2)


# ---------------------------------------------------------------------------
# Liouville transform and shape invariance
# ---------------------------------------------------------------------------

def test_liouville_exponent_signs():
    assert spc.liouville_exponent(1) == pytest.approx(-2)
    assert spc.liouville_exponent(1, variant="printed") == pytest.approx(2)


def test_amended_liouville_transform_reaches_oscillator_form():
    p = spc.RadialProblem(1.5, 1.0, 0.3, 1)
    assert spc.liouville_check(p) < 1e-6
    assert spc.liouville_check(p, variant="printed") > 1e-2


def test_factorization_constant():
    rep = spc.shape_invariance_check(0, 1, 1, variant="amended")
    assert rep["C_l"] == pytest.approx(3)
    assert rep["passed"]


@pytest.mark.parametrize("l, nu, omega", [(0, 1, 1), (1, 2, 1), (2, 1.5, 0.7)])
def test_amended_shape_invariance(l, nu, omega):
    rep = spc.shape_invariance_check(l, nu, omega, variant="amended")
    assert rep["factorization_residual"] < 1e-8
    assert rep["partner_residual"] < 1e-8


def test_printed_partner_relation_fails():
    rep = spc.shape_invariance_check(1, 2, 1, variant="printed")
    assert rep["factorization_residual"] < 1e-8
    assert rep["partner_residual"] > 1e-2
    assert not rep["passed"]


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def test_constrained_closed_form_values():
    p = spc.RadialProblem.constrained(1, 1, 0)
    assert spc.closed_form_spectrum(0, 0, p) == pytest.approx(1.5)
    assert spc.closed_form_spectrum(3, 0, p) == pytest.approx(7.5)


def test_constrained_closed_form_needs_constraint():
    with pytest.raises(spc.SpectrumError):
        spc.closed_form_spectrum(0, 0, spc.RadialProblem(1, 1, 0, 0))


def test_printed_general_form_negative_discriminant():
    with pytest.raises(spc.SpectrumError):
        spc.closed_form_spectrum(0, 0, spc.RadialProblem(1, 1, -3, 0), "spect_printed")


def test_amended_general_form_reduces_to_constrained_case():
    for nu in (1.0, 1.5, 2.0):
        for l in range(3):
            p = spc.RadialProblem.constrained(nu, 1.3, l)
            for n in range(3):
                assert spc.closed_form_spectrum(n, l, p, "spect_amended") == pytest.approx(
                    spc.closed_form_spectrum(n, l, p, "eg6"))


def test_unknown_variant():
    with pytest.raises(ValueError):
        spc.closed_form_spectrum(0, 0, spc.RadialProblem.constrained(1, 1, 0), "other")


# ---------------------------------------------------------------------------
# numerical oracle
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("nu, expected", [(1, [1.5, 3.5, 5.5]), (2, [2.5, 6.5])])
def test_numeric_constrained_levels(nu, expected):
    p = spc.RadialProblem.constrained(nu, 1, 0)
    E = spc.numeric_eigenvalues(p, len(expected)).energies
    assert np.allclose(E, expected, rtol=1e-5)


def test_numeric_unconstrained_levels():
    p = spc.RadialProblem(1, 1, 0, 0)
    E = spc.numeric_eigenvalues(p, 3).energies
    assert np.allclose(E, [3.5, 5.5, 7.5], rtol=1e-5)
    assert spc.closed_form_spectrum(0, 0, p, "spect_printed") == pytest.approx(
        0.5 + 0.5 * math.sqrt(13))


def test_numeric_k_must_be_positive():
    with pytest.raises(ValueError):
        spc.numeric_eigenvalues(spc.RadialProblem(1, 1, 0, 0), 0)


def test_spectrum_json():
    doc = spc.closed_spectrum(spc.RadialProblem.constrained(1, 1, 0), 2, "eg6").to_json()
    assert doc["method"] == "closed_form_eg6"
    assert [lv["E"] for lv in doc["levels"]] == [1.5, 3.5]


def test_fit_recovers_amended_constants():
    rng = np.random.default_rng(2)
    samples = []
    for _ in range(6):
        p = spc.RadialProblem(float(rng.uniform(0.8, 2)), float(rng.uniform(0.7, 1.5)),
                              float(rng.uniform(-1, 2)), int(rng.integers(0, 3)))
        for n, E in spc.numeric_eigenvalues(p, 3).levels:
            samples.append((p, n, E))
    fit = spc.fit_spectrum_amendment(samples)
    assert fit["rounded"] == pytest.approx(spc.AMENDED_SPECT)
    assert fit["max_relative_residual"] < 1e-5


@settings(max_examples=8, deadline=None)
@given(st.floats(0.7, 2.5), st.floats(0.5, 2.0), st.floats(-1.5, 3.0), st.integers(0, 3))
def test_amended_form_matches_oracle(nu, omega, kappa, l):
    p = spc.RadialProblem(nu, omega, kappa, l)
    numeric = spc.numeric_eigenvalues(p, 3).energies
    closed = spc.closed_spectrum(p, 3, "spect_amended").energies
    frob = [_laguerre_oracle(n, p) for n in range(3)]
    assert np.allclose(numeric, closed, rtol=1e-5)
    assert np.allclose(closed, frob, rtol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.5, 3.0), st.floats(-2.0, 4.0), st.integers(0, 5))
def test_levels_increase_with_n_and_l(nu, omega, kappa, l):
    p, q = spc.RadialProblem(nu, omega, kappa, l), spc.RadialProblem(nu, omega, kappa, l + 1)
    E = [spc.closed_form_spectrum(n, l, p, "spect_amended") for n in range(4)]
    assert all(b > a for a, b in zip(E, E[1:]))
    assert spc.closed_form_spectrum(0, l + 1, q, "spect_amended") > E[0]


# ---------------------------------------------------------------------------
# eigenfunctions
# ---------------------------------------------------------------------------

def test_hypergeometric_matches_laguerre():
    y = np.linspace(0.1, 4, 7)
    for n, a in ((0, 0.5), (2, 1.5), (4, 2.7)):
        scale = math.comb(n + math.floor(a), n) if float(a).is_integer() else \
            math.gamma(n + a + 1) / (math.gamma(n + 1) * math.gamma(a + 1))
        assert np.allclose(scale * spc.hyp1f1_terminating(n, a + 1, y), spc.laguerre(n, a, y))


def test_degenerate_hypergeometric_rejected():
    with pytest.raises(ValueError):
        spc.hyp1f1_terminating(3, -1.0, 1.0)


@pytest.mark.parametrize("n", range(3))
def test_eigenfunctions_solve_radial_equation(n):
    p = spc.RadialProblem(1.5, 1.2, 0.3, 1)
    E = spc.closed_form_spectrum(n, 1, p, "spect_amended")
    assert spc.radial_residual(spc.eigenfunction(n, p), E, p) < 1e-6


def test_eigenfunctions_are_orthogonal():
    p = spc.RadialProblem(1.5, 1.2, 0.3, 1)
    R0, R1 = spc.eigenfunction(0, p), spc.eigenfunction(1, p)
    norm = math.sqrt(spc.inner_product(R0, R0) * spc.inner_product(R1, R1))
    assert abs(spc.inner_product(R0, R1)) < 1e-8 * norm


def test_printed_eigenfunction_fails():
    p = spc.RadialProblem(1.5, 1.2, 0.3, 1)
    E = spc.closed_form_spectrum(0, 1, p, "spect_printed")
    assert spc.radial_residual(spc.printed_eigenfunction(0, p, E), E, p) > 1e-3


# ---------------------------------------------------------------------------
# Morse route
# ---------------------------------------------------------------------------

def test_bound_state_count():
    assert spc.bound_state_count(2.5, 1) == 3
    assert spc.bound_state_count(2.5, 2) == 2
    assert spc.bound_state_count(-0.5, 2) == 0


def test_morse_reduction_parameters():
    p = spc.RadialProblem(1.5, 1.2, 0.3, 1)
    m = spc.morse_reduce(p)
    assert m.a == pytest.approx(3)
    assert m.eps_hat == pytest.approx(-2 - 0.6 - 9)


def test_morse_energies_match_oscillator_route():
    p = spc.RadialProblem(1.5, 1.2, 0.3, 1)
    morse = spc.morse_energies(p, 3).energies
    closed = spc.closed_spectrum(p, 3, "spect_amended").energies
    assert np.allclose(morse, closed, rtol=1e-12)


@pytest.mark.parametrize("n", range(2))
def test_morse_eigenfunctions(n):
    p = spc.RadialProblem(1.5, 1.2, 0.3, 1)
    m = spc.morse_reduce(p)
    E = spc.morse_energies(p, n + 1).energies[n]
    assert spc.morse_residual(n, m, E) < 1e-6
    R = spc.morse_to_radial(spc.morse_eigenfunction(n, m, E), p)
    assert spc.radial_residual(R, E, p) < 1e-6
