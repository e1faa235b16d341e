"""Linear differential operators with expression coefficients.

An operator is stored in normal form ``sum_alpha c_alpha(t, x) d^alpha`` with
coefficients to the left of the derivative monomials; multi-indices are
``(k_t, k_1, k_2, k_3)``.  Composition follows the multivariate Leibniz
rule, so products of operators are exact.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from math import comb
from typing import Mapping

import numpy as np
import sympy as sp

from . import expr as ex
from .expr import COORDS, SPACE, t, x1, x2, x3

MAX_ORDER = 4
ZERO_INDEX = (0, 0, 0, 0)


def unit_index(k: int) -> tuple[int, int, int, int]:
    mi = [0, 0, 0, 0]
    mi[k] = 1
    return tuple(mi)


class OrderOverflow(ValueError):
    pass


class UnknownGenerator(KeyError):
    pass


class DiffOperator:
    """Immutable finite sum of coefficient * derivative monomial."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple, sp.Expr] | None = None):
        clean = {}
        for mi, c in (terms or {}).items():
            c = sp.sympify(c)
            if c != 0:
                mi = tuple(int(k) for k in mi)
                if len(mi) != 4 or min(mi) < 0:
                    raise ValueError(f"bad multi-index {mi}")
                if sum(mi) > MAX_ORDER:
                    raise OrderOverflow(f"order {sum(mi)} exceeds {MAX_ORDER}")
                clean[mi] = c
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):
        raise AttributeError("DiffOperator is immutable")

    @classmethod
    def scalar(cls, c) -> "DiffOperator":
        return cls({ZERO_INDEX: c})

    @classmethod
    def partial(cls, var) -> "DiffOperator":
        return cls({unit_index(COORDS.index(var)): 1})

    @property
    def order(self) -> int:
        return max((sum(mi) for mi in self.terms), default=0)

    def coefficient(self, mi) -> sp.Expr:
        return self.terms.get(tuple(mi), sp.Integer(0))

    def is_scalar(self) -> bool:
        return all(mi == ZERO_INDEX for mi in self.terms)

    def scalar_part(self) -> sp.Expr:
        if not self.is_scalar():
            raise TypeError("operator is not a multiplication operator")
        return self.coefficient(ZERO_INDEX)

    def map(self, fn) -> "DiffOperator":
        return DiffOperator({mi: fn(c) for mi, c in self.terms.items()})

    def subs(self, bindings: Mapping) -> "DiffOperator":
        return self.map(lambda c: ex.substitute(c, bindings))

    # arithmetic ---------------------------------------------------------

    def __add__(self, other):
        other = _as_operator(other)
        out = dict(self.terms)
        for mi, c in other.terms.items():
            out[mi] = out.get(mi, 0) + c
        return DiffOperator(out)

    __radd__ = __add__

    def __neg__(self):
        return self.map(lambda c: -c)

    def __sub__(self, other):
        return self + (-_as_operator(other))

    def __rsub__(self, other):
        return _as_operator(other) - self

    def __mul__(self, other):
        return compose(self, _as_operator(other))

    def __rmul__(self, other):
        return compose(_as_operator(other), self)

    __matmul__ = __mul__

    def __truediv__(self, other):
        other = _as_operator(other)
        return self * DiffOperator.scalar(1 / other.scalar_part())

    def __rtruediv__(self, other):
        return _as_operator(other) / self

    def __pow__(self, other):
        return DiffOperator.scalar(self.scalar_part() ** _as_operator(other).scalar_part())

    def __eq__(self, other):
        if not isinstance(other, DiffOperator):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "DiffOperator(0)"
        parts = []
        for mi in sorted(self.terms):
            mono = "".join(f"d{v}^{k}" if k > 1 else f"d{v}"
                           for v, k in zip(("t", "1", "2", "3"), mi) if k)
            parts.append(f"({self.terms[mi]}){'*' + mono if mono else ''}")
        return "DiffOperator(" + " + ".join(parts) + ")"

    # action ---------------------------------------------------------------

    def apply(self, u: sp.Expr) -> sp.Expr:
        """Symbolic action on a scalar function ``u(t, x)``."""
        total = sp.Integer(0)
        for mi, c in self.terms.items():
            d = u
            for var, k in zip(COORDS, mi):
                if k:
                    d = sp.diff(d, var, k)
            total += c * d
        return total

    def to_json(self) -> list[dict]:
        return [{"multi_index": list(mi), "coeff": ex.render(c)}
                for mi, c in sorted(self.terms.items())]

    @classmethod
    def from_json(cls, data) -> "DiffOperator":
        if isinstance(data, str):
            data = json.loads(data)
        return cls({tuple(item["multi_index"]): ex.parse(item["coeff"]) for item in data})


def _as_operator(obj) -> DiffOperator:
    if isinstance(obj, DiffOperator):
        return obj
    return DiffOperator.scalar(sp.sympify(obj))


def _derivative(c: sp.Expr, mi) -> sp.Expr:
    for var, k in zip(COORDS, mi):
        if k:
            c = sp.diff(c, var, k)
            if c == 0:
                break
    return c


def compose(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    """Normal form of ``A o B`` by the Leibniz rule."""
    if A.order + B.order > MAX_ORDER:
        raise OrderOverflow(f"composition of orders {A.order} and {B.order} exceeds {MAX_ORDER}")
    out: dict[tuple, sp.Expr] = {}
    for ma, ca in A.terms.items():
        for gamma in itertools.product(*(range(k + 1) for k in ma)):
            weight = 1
            for k, g in zip(ma, gamma):
                weight *= comb(k, g)
            rest = tuple(k - g for k, g in zip(ma, gamma))
            for mb, cb in B.terms.items():
                dcb = _derivative(cb, gamma)
                if dcb == 0:
                    continue
                mi = tuple(p + q for p, q in zip(rest, mb))
                out[mi] = out.get(mi, 0) + weight * ca * dcb
    return DiffOperator(out)


def commutator(A: DiffOperator, B: DiffOperator) -> DiffOperator:
    return compose(A, B) - compose(B, A)


# ---------------------------------------------------------------------------
# PDM systems and the standard generators
# ---------------------------------------------------------------------------

@dataclass
class PdmSystem:
    """Inverse mass ``f`` and potential ``V`` of ``H = p_a f p_a / 2 + V``."""

    f: sp.Expr
    V: sp.Expr
    params: dict[str, float] = field(default_factory=dict)
    box: ex.SamplingBox = field(default_factory=ex.SamplingBox)

    def bound(self) -> "PdmSystem":
        """Return the system with parameter values substituted."""
        if not self.params:
            return self
        return PdmSystem(ex.substitute(self.f, self.params), ex.substitute(self.V, self.params),
                         {}, self.box)


def schrodinger_operator(s: PdmSystem) -> DiffOperator:
    """``L = i d_t + (f Laplacian + f_a d_a) / 2 - V``."""
    s = s.bound()
    terms = {unit_index(0): sp.I, ZERO_INDEX: -s.V}
    for k, xa in enumerate(SPACE, start=1):
        two = [0, 0, 0, 0]
        two[k] = 2
        terms[tuple(two)] = s.f / 2
        fa = sp.diff(s.f, xa)
        if fa != 0:
            terms[unit_index(k)] = fa / 2
    return DiffOperator(terms)


_EPS = {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1, (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}


def _P(a: int) -> DiffOperator:
    return DiffOperator({unit_index(a): -sp.I})


def _L(a: int) -> DiffOperator:
    out = DiffOperator()
    for (i, j, k), sign in _EPS.items():
        if i == a - 1:
            out = out + sign * SPACE[j] * _P(k + 1)
    return out


def _D() -> DiffOperator:
    out = DiffOperator.scalar(-sp.Rational(3, 2) * sp.I)
    for a in (1, 2, 3):
        out = out + SPACE[a - 1] * _P(a)
    return out


def _K(a: int) -> DiffOperator:
    return ex.r2 * _P(a) - 2 * SPACE[a - 1] * _D()


def _M(mu: int, nu: int) -> DiffOperator:
    if mu == nu:
        return DiffOperator()
    if mu > nu and not (mu == 4 and nu == 0):
        return -_M(nu, mu)
    if mu == 4 and nu == 0:
        return -_D()
    if mu == 0 and nu == 4:
        return _D()
    if mu == 0:
        return (_K(nu) + _P(nu)) / 2
    if nu == 4:
        return -(_K(mu) - _P(mu)) / 2
    # spatial pair a < b
    c = 6 - mu - nu
    return _EPS[(mu - 1, nu - 1, c - 1)] * _L(c)


def _M_checked(mu: int, nu: int) -> DiffOperator:
    if not (0 <= mu <= 4 and 0 <= nu <= 4):
        raise UnknownGenerator(f"M({mu},{nu})")
    if mu == 4 and 1 <= nu <= 3:
        return (_K(nu) - _P(nu)) / 2
    if nu == 4 and 1 <= mu <= 3:
        return -(_K(mu) - _P(mu)) / 2
    return _M(mu, nu)


GENERATOR_NAMES = ("P0", "P1", "P2", "P3", "L1", "L2", "L3", "D", "K1", "K2", "K3", "I",
                   "dt", "d1", "d2", "d3")


def standard_generator(name: str, *indices: int) -> DiffOperator:
    """Operators ``P_a, L_a, D, K_a, P_0, I`` and the so(1,4) basis ``M(mu, nu)``."""
    if name == "M":
        if len(indices) != 2:
            raise UnknownGenerator("M needs two indices")
        return _M_checked(*map(int, indices))
    if indices:
        raise UnknownGenerator(f"{name} takes no indices")
    if name == "P0":
        return DiffOperator({unit_index(0): sp.I})
    if name == "I":
        return DiffOperator.scalar(1)
    if name == "D":
        return _D()
    if name in ("dt", "d1", "d2", "d3"):
        return DiffOperator({unit_index("t123".index(name[1])): 1})
    if len(name) == 2 and name[0] in "PLK" and name[1] in "123":
        return {"P": _P, "L": _L, "K": _K}[name[0]](int(name[1]))
    raise UnknownGenerator(name)


def parse_operator(text: str, *, macros: Mapping[str, object] | None = None,
                   parameters=None) -> DiffOperator:
    """Parse an operator expression (expression grammar plus generator names).

    Products of operators are compositions, so ``t*(L3 + mu*t/2)`` and
    ``sin(l*t)*D`` mean what they say.  ``macros`` may map names to
    expressions or to operators.
    """
    macros = dict(macros or {})
    allowed = None if parameters is None else set(parameters)

    def atom(tok: ex.Token, args):
        name = tok.text
        if args is None:
            if name in macros:
                return _as_operator(macros[name])
            if name in GENERATOR_NAMES:
                return standard_generator(name)
            if name in ex.SHORTHANDS:
                return DiffOperator.scalar(ex.SHORTHANDS[name])
            if name in ex.FUNCTIONS or (allowed is not None and name not in allowed):
                raise ex.UnknownIdentifierError(name, tok.offset)
            return DiffOperator.scalar(sp.Symbol(name))
        if name == "M":
            try:
                idx = [int(a.scalar_part()) for a in args]
                return standard_generator("M", *idx)
            except (TypeError, ValueError, UnknownGenerator) as err:
                raise ex.ExprSyntaxError(f"bad M indices ({err})", tok.offset, text) from None
        if name in ex.FUNCTIONS:
            if len(args) != 1:
                raise ex.ExprSyntaxError(f"{name} takes one argument", tok.offset, text)
            return DiffOperator.scalar(ex.FUNCTIONS[name](args[0].scalar_part()))
        raise ex.UnknownIdentifierError(name, tok.offset)

    return ex.Parser(text, atom, lambda s: DiffOperator.scalar(sp.Rational(s))).parse()


# ---------------------------------------------------------------------------
# operator equality
# ---------------------------------------------------------------------------

def operator_is_zero(op: DiffOperator, **kwargs) -> dict[tuple, ex.ZeroTest]:
    """Coefficient-wise zero test; returns one result per stored multi-index."""
    return {mi: ex.is_zero(c, **kwargs) for mi, c in sorted(op.terms.items())}


def _test_function(k: int, rng: np.random.Generator):
    """Polynomial times Gaussian in (t, x); callable on arrays of shape (4, n)."""
    center = rng.uniform(-0.5, 0.5, 4)
    width = rng.uniform(0.8, 1.5)
    coeffs = rng.normal(size=(4, 3))
    phase = rng.normal(size=4)

    def u(X):
        poly = 1.0 + sum(coeffs[d, 0] * X[d] + coeffs[d, 1] * X[d] ** 2 / 2 for d in range(4))
        poly = poly + coeffs[0, 2] * X[1] * X[2]
        g = np.exp(-np.sum((X - center[:, None]) ** 2, axis=0) / (2 * width**2))
        return poly * g * np.exp(1j * (phase @ X))

    return u


def numeric_derivative(u, X: np.ndarray, mi, h: float = 1e-2) -> np.ndarray:
    """Mixed partial ``d^mi u`` at points ``X`` (shape (4, n)).

    Nested central differences, Richardson-extrapolated over steps h, h/2.
    """
    def nested(step):
        def rec(k, func):
            if k == 4:
                return func(X)
            order = mi[k]
            if order == 0:
                return rec(k + 1, func)
            e = np.zeros((4, 1))
            e[k] = step
            stencil = {1: [(-1, -0.5), (1, 0.5)],
                       2: [(-1, 1.0), (0, -2.0), (1, 1.0)],
                       3: [(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
                       4: [(-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)]}[order]
            return sum(w * rec(k + 1, lambda Y, j=j: func(Y + j * e)) for j, w in stencil) \
                / step**order
        return rec(0, u)

    coarse, fine = nested(h), nested(h / 2)
    return (4 * fine - coarse) / 3


def apply_numeric(op: DiffOperator, u, X: np.ndarray, h: float = 1e-2,
                  params: Mapping | None = None) -> np.ndarray:
    """Action of ``op`` on a numeric test function at points ``X``."""
    point = {"t": X[0], "x1": X[1], "x2": X[2], "x3": X[3]}
    point.update(params or {})
    total = np.zeros(X.shape[1], complex)
    for mi, c in op.terms.items():
        total += ex.evaluate(c, point) * numeric_derivative(u, X, mi, h)
    return total


def operators_agree_numerically(A: DiffOperator, B: DiffOperator, *, n_functions: int = 10,
                                n_points: int = 10, rng=None, box: ex.SamplingBox | None = None,
                                params: Mapping | None = None) -> float:
    """Max relative deviation of ``A u`` and ``B u`` over random test functions."""
    rng = np.random.default_rng(1) if rng is None else rng
    box = box or ex.SamplingBox()
    pts = box.sample_coords(rng, n_points)
    X = np.array([pts[v] for v in COORDS], dtype=float)
    worst = 0.0
    for k in range(n_functions):
        u = _test_function(k, rng)
        a = apply_numeric(A, u, X, params=params)
        b = apply_numeric(B, u, X, params=params)
        scale = 1.0 + np.maximum(np.abs(a), np.abs(b))
        worst = max(worst, float(np.max(np.abs(a - b) / scale)))
    return worst


# ---------------------------------------------------------------------------
# symmetry condition QL - LQ = aL
# ---------------------------------------------------------------------------

@dataclass
class SymmetryReport:
    passed: bool
    a: sp.Expr
    a_space_independent: bool
    residuals: dict[tuple, ex.ZeroTest]
    correction: sp.Expr | None = None
    phase: sp.Expr = sp.Integer(1)

    @property
    def a_normalized(self) -> sp.Expr:
        """``a`` for ``Q / phase``, whose ``d_t`` coefficient is real and positive."""
        return sp.simplify(self.a / self.phase)

    @property
    def max_residual(self) -> float:
        return max((z.max_residual for z in self.residuals.values()), default=0.0)

    def failing(self) -> list[tuple]:
        return [mi for mi, z in self.residuals.items() if not z]


def check_symmetry(Q: DiffOperator, s: PdmSystem, *, L: DiffOperator | None = None,
                   trials: int = 20, tol: float = 1e-9, rng=None) -> SymmetryReport:
    """Test ``[Q, L] = a L`` coefficient-wise, with ``a`` read off the ``d_t`` term."""
    if Q.order > 1:
        raise ValueError("check_symmetry expects a first-order operator")
    rng = np.random.default_rng(0) if rng is None else rng
    L = schrodinger_operator(s) if L is None else L
    C = commutator(Q, L)
    a = sp.cancel(C.coefficient(unit_index(0)) / sp.I) if C.coefficient(unit_index(0)) != 0 \
        else sp.Integer(0)
    a_indep = all(ex.is_zero(sp.diff(a, xa), trials=trials, tol=tol, rng=rng, box=s.box)
                  for xa in SPACE) if a.free_symbols & set(SPACE) else True
    R = C - a * L
    kwargs = dict(trials=trials, tol=tol, rng=rng, box=s.box)
    residuals = {mi: ex.is_zero(c, **kwargs) for mi, c in sorted(R.terms.items())}
    passed = a_indep and all(residuals.values())
    correction = None
    if not passed and a_indep:
        bad = [mi for mi, z in residuals.items() if not z]
        if bad == [ZERO_INDEX]:
            correction = R.coefficient(ZERO_INDEX)
    return SymmetryReport(passed, a, a_indep, residuals, correction, _time_phase(Q, s.box))


def _time_phase(Q: DiffOperator, box: ex.SamplingBox) -> sp.Expr:
    c = Q.coefficient(unit_index(0))
    if c == 0:
        return sp.Integer(1)
    rng = np.random.default_rng(12345)
    point = box.sample_coords(rng, 1)
    point = {k: float(v[0]) for k, v in point.items()}
    point.update({str(p): 1.0 for p in c.free_symbols if str(p) not in point})
    val = complex(ex.evaluate(c, point))
    options = [sp.Integer(1), sp.I, sp.Integer(-1), -sp.I]
    return max(options, key=lambda u: (val / complex(u)).real)


# ---------------------------------------------------------------------------
# determining equations
# ---------------------------------------------------------------------------

def symmetry_operator(xi0, xi, eta) -> DiffOperator:
    """``Q = xi0 d_t + (xi^a d_a + d_a xi^a)/2 + i eta``."""
    xi0 = sp.sympify(xi0)
    xi = [sp.sympify(c) for c in xi]
    div = sum(sp.diff(c, xa) for c, xa in zip(xi, SPACE))
    terms = {unit_index(0): xi0, ZERO_INDEX: div / 2 + sp.I * sp.sympify(eta)}
    for k, c in enumerate(xi, start=1):
        terms[unit_index(k)] = c
    return DiffOperator(terms)


def determining_residuals(xi0, xi, eta, a, s: PdmSystem) -> list[tuple[str, sp.Expr]]:
    """Named residuals of the determining equations for a first-order symmetry.

    The list runs over: ``xi0_t + a``; ``xi0_a``; the traceless symmetrized
    gradient of ``xi``; the mass condition; the ``eta`` gradient condition;
    the potential condition (with an ``xi0 V_t`` term, inert for static
    potentials).  All vanish iff :func:`symmetry_operator` of the
    same data passes :func:`check_symmetry` with that ``a``.
    """
    s = s.bound()
    xi0, eta, a = map(sp.sympify, (xi0, eta, a))
    xi = [sp.sympify(c) for c in xi]
    f, V = s.f, s.V
    d = lambda e, k: sp.diff(e, SPACE[k])  # noqa: E731
    div = sum(d(xi[k], k) for k in range(3))
    out = [("de1_time", sp.diff(xi0, t) + a)]
    out += [(f"de1_x{k + 1}", d(xi0, k)) for k in range(3)]
    for p in range(3):
        for q in range(p, 3):
            val = d(xi[q], p) + d(xi[p], q) - (sp.Rational(2, 3) * div if p == q else 0)
            out.append((f"de5_{p + 1}{q + 1}", val))
    out.append(("de6", sum(xi[k] * d(f, k) for k in range(3)) - a * f
                - sp.Rational(2, 3) * f * div))
    out += [(f"de7_{k + 1}", sp.diff(xi[k], t) + d(eta, k) * f) for k in range(3)]
    grad_div = [d(div, k) for k in range(3)]
    out.append(("de8", xi0 * sp.diff(V, t) + sum(xi[k] * d(V, k) for k in range(3))
                + sp.Rational(1, 4) * sum(grad_div[k] * d(f, k) for k in range(3))
                - a * V - sp.diff(eta, t)))
    return out


def reduced_residuals(lam, omega, theta, nu, xi0, eta, a, s: PdmSystem) -> list[tuple[str, sp.Expr]]:
    """Residuals of the reduced system for a conformal Killing vector.

    Valid when ``xi`` has the generic conformal Killing form built from
    ``lam, omega, theta, nu`` (functions of ``t``).
    """
    s = s.bound()
    xi = conformal_killing(lam, omega, theta, nu)
    f, V = s.f, s.V
    lam = [sp.sympify(c) for c in lam]
    out = [(f"r1_{k + 1}", sp.diff(xi[k], t) + sp.diff(eta, SPACE[k]) * f) for k in range(3)]
    fhat = [sp.diff(f, xa) / f for xa in SPACE]
    out.append(("r2", sum(xi[k] * fhat[k] for k in range(3)) - a - 2 * sp.sympify(omega)
                + 4 * sum(lam[k] * SPACE[k] for k in range(3))))
    out.append(("r3", sum(xi[k] * sp.diff(V, SPACE[k]) for k in range(3))
                - sp.Rational(3, 2) * sum(lam[k] * sp.diff(f, SPACE[k]) for k in range(3))
                - a * V - sp.diff(eta, t)))
    out.append(("de1_time", sp.diff(sp.sympify(xi0), t) + a))
    return out


def conformal_killing(lam, omega, theta, nu) -> tuple[sp.Expr, sp.Expr, sp.Expr]:
    """Generic conformal Killing vector of Euclidean 3-space.

    ``xi^a = r^2 lam_a - 2 (x.lam) x_a + omega x_a + (theta x x)_a + nu_a``;
    the rotation part is oriented so that ``theta = (0, 0, w)`` gives
    ``(-w x2, w x1, 0)``, the field of ``w L_3``.
    """
    lam = [sp.sympify(c) for c in lam]
    theta = [sp.sympify(c) for c in theta]
    nu = [sp.sympify(c) for c in nu]
    omega = sp.sympify(omega)
    X = SPACE
    xl = sum(l * x for l, x in zip(lam, X))
    out = []
    for a in range(3):
        rot = sum(sign * theta[b] * X[c] for (i, b, c), sign in _EPS.items() if i == a)
        out.append(ex.r2 * lam[a] - 2 * xl * X[a] + omega * X[a] + rot + nu[a])
    return tuple(out)
