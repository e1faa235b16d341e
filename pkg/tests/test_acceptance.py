"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line.

Where a criterion is stated for printed forms that do not hold, the literal
check is an ``xfail(strict=True)`` test that records FAIL, and the amended
form is checked by a separate passing test.
"""

from __future__ import annotations

import json

import numpy as np
import pytest
import sympy as sp

from pdmsym import catalog as cat
from pdmsym import cli
from pdmsym import diffop as dop
from pdmsym import equivalence as eqv
from pdmsym import expr as ex
from pdmsym import liealg as la
from pdmsym import spectral as spc


@pytest.fixture(scope="module")
def catalog() -> cat.Catalog:
    return cat.load_catalog()


# ---------------------------------------------------------------------------
# 1. catalog symmetry verification
# ---------------------------------------------------------------------------

def test_criterion_1_catalog_symmetries(catalog, criterion_log):
    tasks = [(None, e.key, 3, 0, 20, 1e-9) for e in catalog.classified]
    reports = cli._map(cli._verify_task, tasks, None)
    failed = [r["key"] for r in reports if not r["passed"]]
    worst = max(r["max_residual"] for r in reports)
    amended = sum(r["uses_amended"] for r in reports)
    too_few = [r["key"] for r in reports if len(r["instantiations"]) < 3]
    ok = len(reports) == 94 and not failed and not too_few and worst < 1e-8
    criterion_log.record(1, ok, f"{len(reports) - len(failed)}/{len(reports)} classes verified "
                                f"({amended} via amended forms), max residual {worst:.1e}, "
                                f"flagged: {failed or 'none'}")
    assert ok, failed


# ---------------------------------------------------------------------------
# 2. so(1,4) structure
# ---------------------------------------------------------------------------

def test_criterion_2_so14_brackets(criterion_log):
    basis, names, expected = la.so14_relations()
    sc = la.structure_constants(basis, names)
    mismatches = la.verify_relations(sc, expected, tol=1e-9)
    ok = len(expected) == 45 and sc.closed and not mismatches
    criterion_log.record(2, ok, f"{len(expected) - len(mismatches)}/45 brackets within 1e-9")
    assert ok


# ---------------------------------------------------------------------------
# 3. commutation tables
# ---------------------------------------------------------------------------

def _relation_reports(catalog) -> dict[str, list[dict]]:
    out: dict[str, list[dict]] = {}
    for e in catalog.entries:
        if e.generator_labels and cli._FAMILY_LABEL.match(e.generator_labels[0]):
            rep = cat.relation_table_check(e)
            out.setdefault(rep["table"], []).append(rep)
    return out


@pytest.fixture(scope="module")
def relation_reports(catalog) -> dict[str, list[dict]]:
    return _relation_reports(catalog)


def test_fixed_relations_and_cr1_family_exact(relation_reports):
    assert all(v["exact"] for v in cat.additional_relations_check().values())
    assert all(r["exact"] for r in relation_reports["CR1"])
    for reps in relation_reports.values():
        assert all(r["closed"] and r["additional_commute_residual"] < 1e-8 for r in reps)


@pytest.mark.xfail(strict=True, reason="several printed relation tables differ from the "
                                       "computed structure constants; see decisions ledger")
def test_criterion_3_relation_tables(relation_reports, criterion_log):
    fixed = cat.additional_relations_check()
    status = {name: all(r["exact"] for r in reps) for name, reps in relation_reports.items()}
    status.update({name: v["exact"] for name, v in fixed.items()})
    scaled = sorted(n for n, reps in relation_reports.items()
                    if not status[n] and all(r["up_to_normalization"] for r in reps))
    bad = sorted(n for n, good in status.items() if not good)
    ok = not bad
    criterion_log.record(3, ok, f"exact: {sorted(n for n, g in status.items() if g)}; "
                                f"differ: {bad} (match after rescaling: {scaled})")
    assert ok


# ---------------------------------------------------------------------------
# 4. vanishing commutators of the constant-mass cases
# ---------------------------------------------------------------------------

def _commutator_residuals(entry, use_amended: bool) -> list[float]:
    out = []
    for k in range(3):
        rng = np.random.default_rng([4, entry.item, k])
        inst = cat.instantiate(entry, cat.default_slot_bindings(entry, k),
                               cat.sample_params(entry, rng), use_amended=use_amended)
        L = dop.schrodinger_operator(inst.system)
        for j, Q in enumerate(inst.generators):
            Q = inst.amended_generators.get(j, Q)
            tests = dop.operator_is_zero(dop.commutator(Q, L), tol=1e-10)
            out.append(max((z.max_residual for z in tests.values()), default=0.0))
    return out


def test_constant_mass_commutators_with_amended_boost(catalog):
    for entry in catalog.select("sec9"):
        assert max(_commutator_residuals(entry, True)) < 1e-10, entry.key


@pytest.mark.xfail(strict=True, reason="the printed boost of the third case lacks a "
                                       "t^2 term; see decisions ledger")
def test_criterion_4_constant_mass_commutators(catalog, criterion_log):
    worst = {e.key: max(_commutator_residuals(e, False)) for e in catalog.select("sec9")}
    amended = max(max(_commutator_residuals(e, True)) for e in catalog.select("sec9"))
    ok = all(v < 1e-10 for v in worst.values())
    criterion_log.record(4, ok, "printed residuals " + ", ".join(
        f"{k}: {v:.1e}" for k, v in worst.items()) + f"; amended boost {amended:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 5. constrained spectrum
# ---------------------------------------------------------------------------

def test_criterion_5_constrained_spectrum(criterion_log):
    worst = 0.0
    for nu in (1.0, 1.5, 2.0):
        for l in range(4):
            for omega in (1.0, 2.0):
                p = spc.RadialProblem.constrained(nu, omega, l)
                numeric = spc.numeric_eigenvalues(p, 5).energies
                closed = spc.closed_spectrum(p, 5, "eg6").energies
                worst = max(worst, float(np.max(np.abs(numeric - closed) / closed)))
    ok = worst < 1e-4
    criterion_log.record(5, ok, f"120 levels, max relative deviation {worst:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 6. general spectrum adjudication
# ---------------------------------------------------------------------------

def _random_problems(count: int, seed: int) -> list[spc.RadialProblem]:
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        p = spc.RadialProblem(float(rng.uniform(0.5, 2.5)), float(rng.uniform(0.5, 2.0)),
                              float(rng.uniform(-3.0, 3.0)), int(rng.integers(0, 4)))
        if p.bounded_below:
            out.append(p)
    return out


def test_criterion_6_general_spectrum(criterion_log):
    amended_dev, printed_dev, printed_undefined = 0.0, 0.0, 0
    for p in _random_problems(20, 6):
        numeric = spc.numeric_eigenvalues(p, 3).energies
        amended = spc.closed_spectrum(p, 3, "spect_amended").energies
        amended_dev = max(amended_dev, float(np.max(np.abs(numeric - amended) / numeric)))
        try:
            printed = spc.closed_spectrum(p, 3, "spect_printed").energies
            printed_dev = max(printed_dev, float(np.max(np.abs(numeric - printed) / numeric)))
        except spc.SpectrumError:
            printed_undefined += 1
    constrained = max(abs(spc.closed_form_spectrum(n, l, p, "spect_amended")
                          - spc.closed_form_spectrum(n, l, p, "eg6"))
                      for nu in (1.0, 1.5, 2.0) for l in range(4) for n in range(5)
                      for p in [spc.RadialProblem.constrained(nu, 1.0, l)])
    ok = amended_dev < 1e-4 and constrained < 1e-12
    criterion_log.record(6, ok, f"amended form max deviation {amended_dev:.1e} on 20 sets; "
                                f"printed form max deviation {printed_dev:.2f}, undefined on "
                                f"{printed_undefined} sets")
    assert ok
    assert printed_dev > 1e-2


# ---------------------------------------------------------------------------
# 7. shape invariance and the Morse route
# ---------------------------------------------------------------------------

_SUSY_CASES = [(0, 1.0, 1.0), (1, 2.0, 1.0), (2, 1.5, 0.7), (3, 0.5, 2.0)]


def _morse_deviation() -> float:
    worst = 0.0
    for p in _random_problems(8, 7):
        morse = spc.morse_energies(p, 3).energies
        numeric = spc.numeric_eigenvalues(p, 3).energies
        worst = max(worst, float(np.max(np.abs(morse - numeric) / numeric)))
    return worst


def test_amended_shape_invariance_and_morse_route():
    for case in _SUSY_CASES:
        rep = spc.shape_invariance_check(*case, variant="amended")
        assert rep["factorization_residual"] < 1e-8 and rep["partner_residual"] < 1e-8
    assert _morse_deviation() < 1e-4


@pytest.mark.xfail(strict=True, reason="the printed superpartner relation does not hold; "
                                       "see decisions ledger")
def test_criterion_7_shape_invariance(criterion_log):
    printed = [spc.shape_invariance_check(*c, variant="printed") for c in _SUSY_CASES]
    amended = [spc.shape_invariance_check(*c, variant="amended") for c in _SUSY_CASES]
    fact = max(r["factorization_residual"] for r in printed)
    partner = max(r["partner_residual"] for r in printed)
    fixed = max(max(r["factorization_residual"], r["partner_residual"]) for r in amended)
    morse = _morse_deviation()
    ok = fact < 1e-8 and partner < 1e-8 and morse < 1e-4
    criterion_log.record(7, ok, f"printed factorization {fact:.1e}, printed partner {partner:.1e}; "
                                f"amended {fixed:.1e}; Morse vs oscillator {morse:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 8. equivalence maps of the table headers
# ---------------------------------------------------------------------------

_CRITERION_CLAIMS = [c for c in eqv.HEADER_CLAIMS if c.criterion]


def test_header_claims_with_amended_maps(catalog):
    assert len(_CRITERION_CLAIMS) == 6
    for claim in _CRITERION_CLAIMS:
        rep = eqv.check_claim(claim, draws=3, catalog=catalog)
        assert rep["pass"], claim.name
        assert rep["max_conjugation"] < 1e-6
        assert all(r["round_trip"] < 1e-8 for r in rep["rows"])


@pytest.mark.xfail(strict=True, reason="the printed maps do not conjugate the listed items; "
                                       "see decisions ledger")
def test_criterion_8_header_claims(catalog, criterion_log):
    printed = {c.name: eqv.check_claim(c, draws=3, reading="printed", catalog=catalog)
               for c in _CRITERION_CLAIMS}
    amended = {c.name: eqv.check_claim(c, draws=3, catalog=catalog)["pass"]
               for c in _CRITERION_CLAIMS}
    bad = sorted(n for n, r in printed.items() if not r["pass"])
    ok = not bad
    criterion_log.record(8, ok, f"printed maps failing: {bad}; amended maps pass: "
                                f"{sum(amended.values())}/{len(amended)}")
    assert ok


# ---------------------------------------------------------------------------
# 9. ambiguity calculus
# ---------------------------------------------------------------------------

_SIGMA = sp.Rational(3, 4)
_MASSES = {"rt^2": ex.rt2, "rt^2 e^(sigma Theta)": ex.rt2 * sp.exp(_SIGMA * ex.Theta),
           "e^x3": sp.exp(ex.x3), "x3^2": ex.x3 ** 2}
_ALPHAS = [sp.Rational(1), sp.Rational(-1, 3), sp.Rational(2), sp.Rational(1, 4)]


def _para_constants() -> dict[str, list]:
    return {name: [eqv.ambiguity_invariance_check(f, eqv.para_family(a)) for a in _ALPHAS]
            for name, f in _MASSES.items()}


def _absorption_ok() -> tuple[bool, float]:
    worst = 0.0
    for kap, sigma in ((0.7, 1.3), (-0.4, -1.0), (1.5, 0.5)):
        for s in eqv.kinematic_absorption(kap, sigma):
            worst = max(worst, eqv.absorption_residual(s, kap, sigma))
    # orderings on the power-law conic leave f = r^(s+2) invariant with C = 0
    power_ok = True
    for alpha in (-0.7, 0.5, 2.0):
        for sigma in (-1.0, 0.0, 1.5):
            gamma = -alpha * (sigma + 3) / (2 * alpha * (sigma + 2) + (sigma + 3))
            worst = max(worst, abs(eqv.r_power_condition(alpha, gamma, sigma)))
            f = ex.r ** (sp.Float(sigma, 17) + 2)
            holds, C = eqv.ambiguity_invariance_check(
                f, eqv.AmbiguitySet.from_alpha_gamma(alpha, gamma), tol=1e-8)
            power_ok &= holds and C == 0.0
    return power_ok and worst < 1e-9, worst


def test_para_family_without_constant_shift():
    results = _para_constants()
    for name in ("rt^2", "rt^2 e^(sigma Theta)", "e^x3"):
        assert all(holds and C == 0 for holds, C in results[name]), name
    assert all(holds for holds, _ in results["x3^2"])
    assert _absorption_ok()[0]


@pytest.mark.xfail(strict=True, reason="for x3^2 the para family shifts the potential by "
                                       "-(alpha+gamma)/2; see decisions ledger")
def test_criterion_9_ambiguity(criterion_log):
    results = _para_constants()
    zero = {name: all(holds and C == 0 for holds, C in res) for name, res in results.items()}
    shifts = [C for _, C in results["x3^2"]]
    absorbed, resid = _absorption_ok()
    ok = all(zero.values()) and absorbed
    criterion_log.record(9, ok, f"C = 0 for {[n for n, z in zero.items() if z]}; x3^2 constants "
                                f"{[round(c, 4) for c in shifts]}; r-power and absorption "
                                f"residual {resid:.1e}")
    assert ok


# ---------------------------------------------------------------------------
# 10. determinism
# ---------------------------------------------------------------------------

_DETERMINISM_RUNS = [
    ["verify-catalog", "--table", "3", "--seed", "11"],
    ["algebra", "--table", "2", "--item", "4", "--seed", "11"],
    ["spectrum", "--nu", "1.5", "--kappa", "0.4", "--l", "2", "--seed", "11"],
    ["transform", "--claim", "table5_et7", "--seed", "11"],
]


def test_criterion_10_determinism(tmp_path, criterion_log):
    same = []
    for k, args in enumerate(_DETERMINISM_RUNS):
        paths = [tmp_path / f"{k}_{j}.json" for j in range(2)]
        for path in paths:
            cli.run(args + ["--out", str(path)])
        texts = [p.read_text() for p in paths]
        json.loads(texts[0])
        same.append(texts[0] == texts[1])
    ok = all(same)
    criterion_log.record(10, ok, f"{sum(same)}/{len(same)} commands reproduce byte-identical JSON")
    assert ok
