"""The deformed isotropic oscillator: radial reduction, SUSY and spectra.

The Hamiltonian ``-1/2 d_a r^(2nu+2) d_a + kappa r^(2nu) + omega^2/2 r^(-2nu)``
separates in spherical variables.  The radial equation is brought to
oscillator form in ``z = r^(-nu)``::

    -nu^2 u'' + ((l(l+1) + delta) / z^2 + omega^2 z^2) u = 2 E u,
    delta = 3/4 (nu+1)(nu+3) + 2 kappa,

and to Morse form in ``rho = ln r``.  A finite-difference Sturm bisection
solver on the oscillator form is the independent oracle for all closed
forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import sympy as sp

from ._sturm import tridiagonal_eigenvalues

R_SYM, Z_SYM, RHO_SYM = sp.symbols("r z rho", positive=True)


class SpectrumError(ValueError):
    """A closed form is not applicable (e.g. negative discriminant)."""


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, estimates: Sequence):
        super().__init__(message)
        self.estimates = [list(map(float, e)) for e in estimates]


@dataclass(frozen=True)
class RadialProblem:
    nu: float
    omega: float
    kappa: float
    l: int

    def __post_init__(self):
        if self.nu <= 0 or self.omega <= 0:
            raise ValueError("nu and omega must be positive")
        if int(self.l) != self.l or self.l < 0:
            raise ValueError("l must be a non-negative integer")

    @classmethod
    def constrained(cls, nu: float, omega: float, l: int) -> "RadialProblem":
        """The case ``2 kappa = -nu^2 - 3 nu - 2``."""
        return cls(nu, omega, -(nu * nu + 3 * nu + 2) / 2, l)

    @property
    def delta(self) -> float:
        return 0.75 * (self.nu + 1) * (self.nu + 3) + 2 * self.kappa

    @property
    def centrifugal(self) -> float:
        """Coefficient of ``1/z^2`` in the oscillator form."""
        return self.l * (self.l + 1) + self.delta

    @property
    def satisfies_constraint(self) -> bool:
        return abs(2 * self.kappa + self.nu ** 2 + 3 * self.nu + 2) < 1e-12

    @property
    def bounded_below(self) -> bool:
        return self.centrifugal >= -self.nu ** 2 / 4

    @property
    def frobenius_exponent(self) -> float:
        """Leading power ``g`` of regular solutions, ``nu^2 g (g-1) = centrifugal``."""
        if not self.bounded_below:
            raise SpectrumError(
                f"centrifugal coefficient {self.centrifugal} below -nu^2/4; not bounded below")
        return 0.5 + math.sqrt(0.25 + self.centrifugal / self.nu ** 2)


@dataclass
class Spectrum:
    levels: list[tuple[int, float]]
    method: str
    info: dict = field(default_factory=dict)

    @property
    def energies(self) -> np.ndarray:
        return np.array([e for _, e in self.levels])

    def to_json(self) -> dict:
        return {"method": self.method, "levels": [{"n": n, "E": float(f"{e:.12g}")}
                                                  for n, e in self.levels], **self.info}


# ---------------------------------------------------------------------------
# radial reduction and Liouville transforms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialODE:
    """``a2 R'' + a1 R' + a0 R = rhs * E * R`` with coefficients in ``r``."""

    a2: sp.Expr
    a1: sp.Expr
    a0: sp.Expr
    rhs: int = 2


def radial_reduce(nu, omega, kappa, l, *, variant: str = "amended") -> RadialODE:
    """Radial equation after separating ``exp(-iEt) R(r) Y_lm``.

    ``variant="amended"`` carries ``l(l+1) + 2 kappa``, which is what the
    potential ``kappa r^(2nu)`` produces and what ``delta`` presupposes;
    ``"printed"`` carries ``l(l+1) + kappa``.
    """
    nu, omega, kappa = (sp.nsimplify(v) for v in (nu, omega, kappa))
    r = R_SYM
    factor = {"amended": 2, "printed": 1}[variant]
    return RadialODE(-r ** (2 * nu + 2), -(2 * nu + 4) * r ** (2 * nu + 1),
                     r ** (2 * nu) * (l * (l + 1) + factor * kappa) + omega ** 2 * r ** (-2 * nu))


def radial_operator_from_hamiltonian(nu, omega, kappa, l) -> RadialODE:
    """Independent route: twice the radial part of the Hamiltonian acting on ``R Y_lm``.

    Uses ``-1/2 d_a f d_a (R Y) = -1/2 [r^-2 (r^2 f R')' - f l(l+1) R / r^2] Y``.
    """
    nu, omega, kappa = (sp.nsimplify(v) for v in (nu, omega, kappa))
    r = R_SYM
    R = sp.Function("R")(r)
    f = r ** (2 * nu + 2)
    V = kappa * r ** (2 * nu) + omega ** 2 / 2 * r ** (-2 * nu)
    expr = sp.expand(2 * (-(sp.diff(r ** 2 * f * sp.diff(R, r), r) / r ** 2
                            - f * l * (l + 1) * R / r ** 2) / 2 + V * R))
    d2, d1 = sp.diff(R, r, 2), sp.diff(R, r)
    a2 = sp.simplify(expr.coeff(d2))
    a1 = sp.simplify(expr.subs(d2, 0).coeff(d1))
    a0 = sp.simplify(expr.subs({d2: 0, d1: 0}) / R)
    return RadialODE(a2, a1, a0)


def liouville_exponent(nu: float, *, variant: str = "amended") -> float:
    """Power ``p`` in ``u = z^p R`` removing the first-derivative term.

    The amended exponent ``-(nu+3)/(2nu)`` is the one that works; the printed
    transform uses ``+(nu+3)/(2nu)``.
    """
    p = (nu + 3) / (2 * nu)
    return -p if variant == "amended" else p


@dataclass(frozen=True)
class OscillatorForm:
    """``-kinetic u'' + (centrifugal / z^2 + omega2 z^2) u = 2 E u``."""

    kinetic: float
    centrifugal: float
    omega2: float


def liouville_oscillator(p: RadialProblem) -> OscillatorForm:
    return OscillatorForm(p.nu ** 2, p.centrifugal, p.omega ** 2)


def _d(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, order: int, h: float) -> np.ndarray:
    """Central difference with one Richardson step."""
    def raw(step):
        if order == 1:
            return (f(x + step) - f(x - step)) / (2 * step)
        return (f(x + step) - 2 * f(x) + f(x - step)) / step ** 2
    return (4 * raw(h / 2) - raw(h)) / 3


def liouville_check(p: RadialProblem, *, variant: str = "amended", n_functions: int = 10,
                    n_points: int = 20, seed: int = 0) -> float:
    """Max relative deviation between the radial operator and the oscillator form.

    For test functions ``u(z)`` set ``R(r) = z^(-p) u(z)`` and compare
    ``z^p (radial op R)`` with ``(oscillator op u)`` at random ``r``; both sides
    are applied by finite differences.
    """
    rng = np.random.default_rng(seed)
    ode = radial_reduce(p.nu, p.omega, p.kappa, p.l)
    a2, a1, a0 = (sp.lambdify(R_SYM, c, "numpy") for c in (ode.a2, ode.a1, ode.a0))
    osc = liouville_oscillator(p)
    expo = liouville_exponent(p.nu, variant=variant)
    worst = 0.0
    for _ in range(n_functions):
        c1, c2, c3 = rng.uniform(0.3, 1.5, 3)

        def u(z):
            return np.exp(-c1 * (z - c2) ** 2) * (1 + c3 * z)

        def R(r):
            z = r ** (-p.nu)
            return z ** (-expo) * u(z)

        r = rng.uniform(0.6, 1.6, n_points)
        z = r ** (-p.nu)
        h = 1e-3
        lhs = z ** expo * (a2(r) * _d(R, r, 2, h) + a1(r) * _d(R, r, 1, h) + a0(r) * R(r))
        rhs = -osc.kinetic * _d(u, z, 2, h) + (osc.centrifugal / z ** 2 + osc.omega2 * z ** 2) * u(z)
        scale = np.abs(rhs) + np.abs(osc.kinetic * _d(u, z, 2, h)) + 1e-300
        worst = max(worst, float(np.max(np.abs(lhs - rhs) / (scale + np.max(scale)))))
    return worst


# ---------------------------------------------------------------------------
# shape invariance
# ---------------------------------------------------------------------------

def _test_functions(k: int, seed: int) -> list[sp.Expr]:
    rng = np.random.default_rng(seed)
    z = Z_SYM
    out = []
    for _ in range(k):
        a, b, c = (sp.Float(v, 17) for v in rng.uniform(0.3, 1.5, 3))
        out.append(sp.exp(-a * (z - b) ** 2) * (1 + c * z ** 2))
    return out


def oscillator_hamiltonian(l, nu, omega) -> Callable[[sp.Expr], sp.Expr]:
    """``H_l = -nu^2 d^2 + ((2l+1)^2 - nu^2)/(4 z^2) + omega^2 z^2`` (constrained case)."""
    z = Z_SYM
    return lambda u: -nu ** 2 * sp.diff(u, z, 2) + ((2 * l + 1) ** 2 - nu ** 2) / (4 * z ** 2) * u \
        + omega ** 2 * z ** 2 * u


def superpotential(l, nu, omega, *, variant: str = "printed") -> sp.Expr:
    """``W = (2l+1+nu)/(2z) + omega z`` as printed; the amended sign of the
    ``1/z`` term makes the zero mode of the annihilator normalizable."""
    s = 1 if variant == "printed" else -1
    return s * (2 * l + 1 + nu) / (2 * Z_SYM) + omega * Z_SYM


def ladder_operators(l, nu, omega, *, variant: str = "printed"):
    """``(a, a+)``: ``a = -nu d + W`` printed, ``a = nu d + W`` amended."""
    W = superpotential(l, nu, omega, variant=variant)
    s = -1 if variant == "printed" else 1
    z = Z_SYM
    a = lambda u: s * nu * sp.diff(u, z) + W * u  # noqa: E731
    ad = lambda u: -s * nu * sp.diff(u, z) + W * u  # noqa: E731
    return a, ad


def shape_invariance_check(l, nu, omega, *, variant: str = "printed", n_functions: int = 10,
                           n_points: int = 20, seed: int = 0) -> dict:
    """Pointwise residuals of the factorization and the partner relation.

    printed: ``H_l = a+ a - C_l`` and ``a a+ + C_l = H_{l+nu} + C_l``.
    amended: ``H_l = a+ a + C_l`` and ``a a+ + C_l = H_{l+nu} + 2 nu omega``.
    ``C_l = omega (2l + 2nu + 1)``.  Residuals are relative to the size of
    the terms and are reported separately.
    """
    l, nu, omega = (sp.nsimplify(v) for v in (l, nu, omega))
    a, ad = ladder_operators(l, nu, omega, variant=variant)
    C = omega * (2 * l + 2 * nu + 1)
    H, H_up = oscillator_hamiltonian(l, nu, omega), oscillator_hamiltonian(l + nu, nu, omega)
    if variant == "printed":
        fact = lambda u: ad(a(u)) - C * u - H(u)  # noqa: E731
        partner = lambda u: a(ad(u)) + C * u - H_up(u) - C * u  # noqa: E731
    else:
        fact = lambda u: ad(a(u)) + C * u - H(u)  # noqa: E731
        partner = lambda u: a(ad(u)) + C * u - H_up(u) - 2 * nu * omega * u  # noqa: E731
    rng = np.random.default_rng(seed)
    zs = rng.uniform(0.3, 3.0, n_points)
    out = {"variant": variant, "l": float(l), "nu": float(nu), "omega": float(omega),
           "C_l": float(C)}
    for name, op in (("factorization", fact), ("partner", partner)):
        worst = 0.0
        for u in _test_functions(n_functions, seed):
            res = sp.lambdify(Z_SYM, op(u), "numpy")(zs)
            scale = np.abs(sp.lambdify(Z_SYM, H(u), "numpy")(zs)) \
                + np.abs(sp.lambdify(Z_SYM, nu ** 2 * sp.diff(u, Z_SYM, 2), "numpy")(zs)) \
                + float(C) * np.abs(sp.lambdify(Z_SYM, u, "numpy")(zs))
            worst = max(worst, float(np.max(np.abs(res) / scale)))
        out[f"{name}_residual"] = worst
    out["passed"] = max(out["factorization_residual"], out["partner_residual"]) < 1e-8
    return out


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

# Validated amendment of the general-case spectrum:
#   E_n / omega = A nu n + B nu + C sqrt((2l+1)^2 + P (kappa+1) + Q nu (nu+3)).
PRINTED_SPECT = {"A": 1.0, "B": 0.5, "C": 0.5, "P": 8.0, "Q": 1.0}
AMENDED_SPECT = {"A": 2.0, "B": 1.0, "C": 0.5, "P": 8.0, "Q": 4.0}


def _spect(n, l, p: RadialProblem, c: dict) -> float:
    disc = (2 * l + 1) ** 2 + c["P"] * (p.kappa + 1) + c["Q"] * p.nu * (p.nu + 3)
    if disc < 0:
        raise SpectrumError(f"negative discriminant {disc:.6g}")
    return p.omega * (c["A"] * p.nu * n + c["B"] * p.nu + c["C"] * math.sqrt(disc))


def closed_form_spectrum(n: int, l: int, p: RadialProblem, variant: str = "eg6") -> float:
    """``E_n`` from one of the closed forms.

    ``eg6`` requires the constraint on ``kappa``; ``spect_printed`` is the
    general formula as printed; ``spect_amended`` is the corrected general
    formula (validated against the oracle).
    """
    if n < 0:
        raise ValueError("n must be non-negative")
    if variant == "eg6":
        if not p.satisfies_constraint:
            raise SpectrumError("eg6 applies only when 2 kappa = -nu^2 - 3 nu - 2")
        return p.omega * (2 * n * p.nu + l + p.nu + 0.5)
    if variant == "spect_printed":
        return _spect(n, l, p, PRINTED_SPECT)
    if variant == "spect_amended":
        return _spect(n, l, p, AMENDED_SPECT)
    if variant == "susy_ladder":
        # E_n = C_{l + nu n} / 2 read literally
        return p.omega * (2 * (l + p.nu * n) + 2 * p.nu + 1) / 2
    raise ValueError(f"unknown variant {variant!r}")


# ---------------------------------------------------------------------------
# numerical oracle
# ---------------------------------------------------------------------------

def _discretize(p: RadialProblem, N: int, Z: float) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric tridiagonal matrix for ``2E`` on a cell-centred grid.

    Writing ``u = z^g phi`` with the Frobenius exponent ``g`` turns the
    operator into ``-nu^2 z^(-2g) (z^(2g) phi')' + omega^2 z^2 phi``; the
    flux vanishes at ``z = 0`` and ``phi`` is smooth, so the scheme is
    second order.  Dirichlet at ``z = Z``.
    """
    g = p.frobenius_exponent
    h = Z / N
    zc = (np.arange(1, N + 1) - 0.5) * h
    zf = np.arange(1, N + 1) * h
    # weights relative to the last face keep magnitudes bounded
    log_ref = 2 * g * math.log(Z)
    wc = np.exp(2 * g * np.log(zc) - log_ref)
    wf = np.concatenate([[0.0], np.exp(2 * g * np.log(zf) - log_ref)])
    nu2 = p.nu ** 2
    diag = nu2 * (wf[:-1] + wf[1:]) / (h * h * wc) + p.omega ** 2 * zc ** 2
    off = -nu2 * wf[1:-1] / (h * h * np.sqrt(wc[:-1] * wc[1:]))
    return diag, off


def numeric_eigenvalues(p: RadialProblem, k: int, *, rtol: float = 1e-6, min_power: int = 10,
                        max_power: int = 16, cutoff_factor: float = 20.0) -> Spectrum:
    """Lowest ``k`` energies by finite differences with Richardson refinement.

    The box ``(0, Z]`` is enlarged until ``omega^2 Z^2`` exceeds
    ``cutoff_factor`` times ``2 E_k``.  Grids double from ``2^min_power``
    cells until successive extrapolated estimates agree to ``rtol``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not p.bounded_below:
        raise SpectrumError("effective potential not bounded below")
    Z = math.sqrt(cutoff_factor * 2 * (p.nu * (2 * k + 1) + 1 + math.sqrt(abs(p.centrifugal)))
                  ) / math.sqrt(p.omega)
    for _ in range(20):
        E = tridiagonal_eigenvalues(*_discretize(p, 2 ** min_power, Z), k) / 2
        need = math.sqrt(cutoff_factor * 2 * E[-1]) / p.omega
        if Z >= need:
            break
        Z = 1.1 * need
    estimates, extrap = [], []
    prev = None
    for power in range(min_power, max_power + 1):
        E = tridiagonal_eigenvalues(*_discretize(p, 2 ** power, Z), k) / 2
        estimates.append(E)
        if prev is not None:
            extrap.append((4 * E - prev) / 3)
            if len(extrap) >= 2 and np.all(np.abs(extrap[-1] - extrap[-2])
                                           <= rtol * np.abs(extrap[-1])):
                levels = [(n, float(e)) for n, e in enumerate(extrap[-1])]
                return Spectrum(levels, "numeric", {"cells": 2 ** power, "box": Z})
        prev = E
    raise ConvergenceError("finite-difference eigenvalues did not converge",
                           extrap[-2:] if len(extrap) >= 2 else estimates[-2:])


def closed_spectrum(p: RadialProblem, k: int, variant: str) -> Spectrum:
    return Spectrum([(n, closed_form_spectrum(n, p.l, p, variant)) for n in range(k)],
                    f"closed_form_{variant}")


def fit_spectrum_amendment(samples: Sequence[tuple[RadialProblem, int, float]]) -> dict:
    """Fit ``A, B, C, P, Q`` of the general closed form to oracle energies.

    ``samples`` holds ``(problem, n, E)`` triples.  Returns the least-squares
    constants, their rational rounding, and the fit residual.
    """
    from scipy.optimize import least_squares

    def model(c, p, n):
        disc = (2 * p.l + 1) ** 2 + c[3] * (p.kappa + 1) + c[4] * p.nu * (p.nu + 3)
        return p.omega * (c[0] * p.nu * n + c[1] * p.nu + c[2] * np.sqrt(np.maximum(disc, 0.0)))

    def resid(c):
        return np.array([(model(c, p, n) - E) / E for p, n, E in samples])

    x0 = [PRINTED_SPECT[k] for k in "ABCPQ"]
    fit = least_squares(resid, x0, xtol=1e-14, ftol=1e-14, gtol=1e-14)
    raw = dict(zip("ABCPQ", map(float, fit.x)))
    rounded = {k: float(sp.nsimplify(round(v, 6), rational=True)) for k, v in raw.items()}
    return {"fitted": raw, "rounded": rounded,
            "max_relative_residual": float(np.max(np.abs(resid(list(rounded.values())))))}


# ---------------------------------------------------------------------------
# eigenfunctions
# ---------------------------------------------------------------------------

def hyp1f1_terminating(n: int, b: float, y):
    """``1F1(-n; b; y)`` as its degree-``n`` polynomial."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if b <= 0 and float(b).is_integer() and -b < n:
        raise ValueError(f"degenerate series: b={b} with n={n}")
    y = np.asarray(y, dtype=float)
    term = np.ones_like(y)
    total = np.ones_like(y)
    for k in range(n):
        term = term * (k - n) / ((b + k) * (k + 1)) * y
        total = total + term
    return total


def laguerre(n: int, alpha: float, y):
    """Generalized Laguerre ``L_n^alpha`` by the three-term recurrence."""
    y = np.asarray(y, dtype=float)
    if n == 0:
        return np.ones_like(y)
    prev, cur = np.ones_like(y), 1 + alpha - y
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + alpha - y) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def eigenfunction(n: int, p: RadialProblem) -> Callable[[np.ndarray], np.ndarray]:
    """Radial eigenfunction ``R_n(r)`` for the amended spectrum.

    ``u(z) = z^g exp(-omega z^2 / (2 nu)) 1F1(-n; g + 1/2; omega z^2 / nu)``
    with ``z = r^(-nu)`` and ``R = z^((nu+3)/(2nu)) u``.
    """
    g = p.frobenius_exponent
    lift = (p.nu + 3) / (2 * p.nu)

    def R(r):
        z = np.asarray(r, dtype=float) ** (-p.nu)
        y = p.omega * z ** 2 / p.nu
        return z ** (g + lift) * np.exp(-y / 2) * hyp1f1_terminating(n, g + 0.5, y)
    return R


def printed_eigenfunction(n: int, p: RadialProblem, E: float) -> Callable[[np.ndarray], np.ndarray]:
    """The printed closed form, kept for comparison."""
    def R(r):
        r = np.asarray(r, dtype=float)
        return np.exp(-p.omega * r ** p.nu / (2 * p.nu)) * r ** (p.nu * n - E / p.omega) \
            * hyp1f1_terminating(n, E / (p.nu * p.omega) - n, p.omega / p.nu * r ** (-p.nu))
    return R


def radial_residual(R: Callable, E: float, p: RadialProblem, *, n_points: int = 20,
                    seed: int = 0) -> float:
    """Relative residual of the (amended) radial equation at random ``r``."""
    rng = np.random.default_rng(seed)
    ode = radial_reduce(p.nu, p.omega, p.kappa, p.l)
    a2, a1, a0 = (sp.lambdify(R_SYM, c, "numpy") for c in (ode.a2, ode.a1, ode.a0))
    r = rng.uniform(0.7, 1.8, n_points)
    h = 1e-3 * r
    d2, d1 = _d(R, r, 2, h), _d(R, r, 1, h)
    terms = [a2(r) * d2, a1(r) * d1, a0(r) * R(r), 2 * E * R(r)]
    res = terms[0] + terms[1] + terms[2] - terms[3]
    scale = sum(np.abs(t) for t in terms)
    return float(np.max(np.abs(res) / scale))


def inner_product(R1: Callable, R2: Callable, *, r_max: float = 60.0) -> float:
    """``int R1 R2 r^2 dr``, the Sturm-Liouville weight of the radial equation."""
    from scipy.integrate import quad

    val, _ = quad(lambda r: R1(r) * R2(r) * r * r, 1e-6, r_max, limit=400)
    return float(val)


# ---------------------------------------------------------------------------
# Morse route
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MorseProblem:
    """``-u'' + (omega^2 e^(-2 a rho) + mu e^(-a rho)) u = eps_hat u`` in ``rho = ln r``.

    For the radial problem ``a = 2 nu``, ``mu = -2E`` and
    ``eps_hat = -l(l+1) - 2 kappa - ((2nu+3)/2)^2``.
    """

    a: float
    omega: float
    eps_hat: float
    radial: RadialProblem

    def strength(self, E: float) -> float:
        """``s`` in the superpotential ``W = s - omega e^(-a rho)``."""
        return E / self.omega - self.a / 2

    def bound_state_count(self, s: float) -> int:
        return bound_state_count(s, self.a)


def bound_state_count(s: float, a: float) -> int:
    """Number of ``n >= 0`` with ``s - n a > 0``."""
    return max(0, math.ceil(s / a)) if s > 0 else 0


def morse_reduce(p: RadialProblem) -> MorseProblem:
    eps = -p.l * (p.l + 1) - 2 * p.kappa
    return MorseProblem(2 * p.nu, p.omega, eps - ((2 * p.nu + 3) / 2) ** 2, p)


def morse_energies(p: RadialProblem, k: int) -> Spectrum:
    """Energies from Morse quantization with coupling and energy swapped.

    ``eps_hat_n = -(s - n a)^2`` with ``s = E/omega - a/2`` gives
    ``E_n = omega (a/2 + n a + sqrt(-eps_hat))``.
    """
    m = morse_reduce(p)
    if m.eps_hat >= 0:
        raise SpectrumError("no bound states: eps_hat >= 0")
    root = math.sqrt(-m.eps_hat)
    levels = [(n, p.omega * (m.a / 2 + n * m.a + root)) for n in range(k)]
    return Spectrum(levels, "morse")


def morse_eigenfunction(n: int, m: MorseProblem, E: float) -> Callable[[np.ndarray], np.ndarray]:
    """``y^(s/a - n) e^(-y/2) L_n^(2(s/a - n))(y)`` with ``y = (2 omega / a) e^(-a rho)``."""
    s = m.strength(E)
    j = s / m.a - n

    def u(rho):
        y = 2 * m.omega / m.a * np.exp(-m.a * np.asarray(rho, dtype=float))
        return y ** j * np.exp(-y / 2) * laguerre(n, 2 * j, y)
    return u


def morse_residual(n: int, m: MorseProblem, E: float, *, n_points: int = 20, seed: int = 0) -> float:
    """Relative residual of the Morse equation for the n-th state at energy ``E``."""
    rng = np.random.default_rng(seed)
    u = morse_eigenfunction(n, m, E)
    s = m.strength(E)
    eps_hat = -(s - n * m.a) ** 2
    mu = -2 * E
    rho = rng.uniform(-0.4, 0.6, n_points)
    d2 = _d(u, rho, 2, 1e-3)
    pot = m.omega ** 2 * np.exp(-2 * m.a * rho) + mu * np.exp(-m.a * rho)
    terms = [d2, pot * u(rho), eps_hat * u(rho)]
    res = -terms[0] + terms[1] - terms[2]
    return float(np.max(np.abs(res) / sum(np.abs(t) for t in terms)))


def morse_to_radial(u: Callable, p: RadialProblem) -> Callable:
    """``R(r) = r^(-(2nu+3)/2) u(ln r)``."""
    return lambda r: np.asarray(r, float) ** (-(2 * p.nu + 3) / 2) * u(np.log(r))
