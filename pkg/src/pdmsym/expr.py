"""Expression core: parsing, rendering, differentiation, numeric evaluation.

Expression trees are sympy objects over the coordinates ``t, x1, x2, x3``
and free parameters.  Sympy already keeps sums and products flattened and
canonically ordered with rationals in lowest terms, so trees built here
compare structurally.  Equality of two expressions is *not* decided by
canonicalization; it is decided by :func:`is_zero`, a randomized numeric
test over a sampling box that keeps every branch cut out of reach.

Grammar (``^`` binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' factor)?
    base   := number | ident | ident '(' expr (',' expr)* ')' | '(' expr ')'

Reserved identifiers are ``t x1 x2 x3 r rt Theta Phi i pi``; the function
names are listed in :data:`FUNCTIONS`.  Any other identifier is a parameter,
or an arbitrary-function slot when it is followed by an argument list.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np
import sympy as sp

t, x1, x2, x3 = sp.symbols("t x1 x2 x3")
COORDS = (t, x1, x2, x3)
SPACE = (x1, x2, x3)

r2 = x1**2 + x2**2 + x3**2
rt2 = x1**2 + x2**2
r = sp.sqrt(r2)
rt = sp.sqrt(rt2)
Theta = sp.atan(x2 / x1)
Phi = sp.atan((r2 - 1) / (2 * x3))

SHORTHANDS: dict[str, sp.Expr] = {
    "t": t,
    "x1": x1,
    "x2": x2,
    "x3": x3,
    "r": r,
    "rt": rt,
    "Theta": Theta,
    "Phi": Phi,
    "i": sp.I,
    "pi": sp.pi,
}

FUNCTIONS: dict[str, Callable[[sp.Expr], sp.Expr]] = {
    "exp": sp.exp,
    "ln": sp.log,
    "sin": sp.sin,
    "cos": sp.cos,
    "tan": sp.tan,
    "sinh": sp.sinh,
    "cosh": sp.cosh,
    "atan": sp.atan,
    "atanh": sp.atanh,
    "sqrt": sp.sqrt,
}

DEFAULT_BOX: dict[str, tuple[float, float]] = {
    "t": (0.1, 2.0),
    "x1": (0.5, 2.0),
    "x2": (-2.0, 2.0),
    "x3": (-2.0, 2.0),
}
# |x2|, |x3| stay above this on the default box
_GAP = 0.1
PARAM_RANGE = (0.3, 2.5)


class ExprSyntaxError(ValueError):
    """Malformed expression text; ``offset`` is the 0-based character index."""

    def __init__(self, message: str, offset: int, text: str = ""):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.text = text


class UnknownIdentifierError(ValueError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown identifier {name!r} at offset {offset}")
        self.name = name
        self.offset = offset


class DomainError(ArithmeticError):
    """Evaluation left the principal domain (log of a non-positive real, 1/0)."""


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*|\.\d+|\d+)|([A-Za-z_][A-Za-z0-9_]*)|(.))")


@dataclass(frozen=True)
class Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:  # trailing whitespace
            break
        if m.group(1) is not None:
            tokens.append(Token("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(Token("ident", m.group(2), m.start(2)))
        elif m.group(3) is not None:
            ch = m.group(3)
            if ch not in "+-*/^(),":
                raise ExprSyntaxError(f"unexpected character {ch!r}", m.start(3), text)
            tokens.append(Token("op", ch, m.start(3)))
        pos = m.end()
    tokens.append(Token("end", "", len(text)))
    return tokens


class Parser:
    """Recursive-descent parser over the expression grammar.

    The parser is generic in what it builds: ``atom`` turns an identifier or
    a call into a value and the arithmetic is done with Python operators, so
    the same grammar produces sympy expressions or differential operators.
    """

    def __init__(self, text: str, atom: Callable[[Token, list | None], object],
                 number: Callable[[str], object]):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.atom = atom
        self.number = number

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def error(self, message: str) -> ExprSyntaxError:
        return ExprSyntaxError(message, self.tok.offset, self.text)

    def expect(self, op: str) -> None:
        if self.tok.kind != "op" or self.tok.text != op:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {op!r}, found {found!r}")
        self.pos += 1

    def parse(self):
        value = self.expr()
        if self.tok.kind != "end":
            raise self.error(f"unexpected {self.tok.text!r}")
        return value

    def expr(self):
        value = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.tok.text
            self.pos += 1
            rhs = self.term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self):
        value = self.factor()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.tok.text
            self.pos += 1
            rhs = self.factor()
            value = value * rhs if op == "*" else value / rhs
        return value

    def factor(self):
        if self.tok.kind == "op" and self.tok.text == "-":
            self.pos += 1
            return -self.factor()
        value = self.base()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.pos += 1
            value = value ** self.factor()
        return value

    def base(self):
        tok = self.tok
        if tok.kind == "num":
            self.pos += 1
            return self.number(tok.text)
        if tok.kind == "ident":
            self.pos += 1
            args = None
            if self.tok.kind == "op" and self.tok.text == "(":
                self.pos += 1
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.pos += 1
                    args.append(self.expr())
                self.expect(")")
            return self.atom(tok, args)
        if tok.kind == "op" and tok.text == "(":
            self.pos += 1
            value = self.expr()
            self.expect(")")
            return value
        if tok.kind == "end":
            raise self.error("unexpected end of input")
        raise self.error(f"unexpected {tok.text!r}")


def parse(text: str, *, parameters: Iterable[str] | None = None,
          slots: Iterable[str] | None = None,
          macros: Mapping[str, sp.Expr] | None = None) -> sp.Expr:
    """Parse ``text`` into an expression tree.

    When ``parameters`` (or ``slots``) is given, identifiers outside that set
    are rejected instead of being promoted to free parameters.  ``macros``
    maps extra names to ready-made trees.
    """
    allowed_params = None if parameters is None else set(parameters)
    allowed_slots = None if slots is None else set(slots)
    macros = dict(macros or {})

    def atom(tok: Token, args):
        name = tok.text
        if args is None:
            if name in macros:
                return macros[name]
            if name in SHORTHANDS:
                return SHORTHANDS[name]
            if name in FUNCTIONS or (allowed_params is not None and name not in allowed_params):
                raise UnknownIdentifierError(name, tok.offset)
            return sp.Symbol(name)
        if name in FUNCTIONS:
            if len(args) != 1:
                raise ExprSyntaxError(f"{name} takes one argument", tok.offset, text)
            return FUNCTIONS[name](args[0])
        if name in SHORTHANDS or name in macros:
            raise ExprSyntaxError(f"{name} is not callable", tok.offset, text)
        if allowed_slots is not None and name not in allowed_slots:
            raise UnknownIdentifierError(name, tok.offset)
        return sp.Function(name)(*args)

    return sp.sympify(Parser(text, atom, lambda s: sp.Rational(s)).parse())


# ---------------------------------------------------------------------------
# rendering
# ---------------------------------------------------------------------------

_PREC_ADD, _PREC_MUL, _PREC_NEG, _PREC_POW, _PREC_ATOM = 1, 2, 3, 4, 5
_RENDER_FUNCS = {sp.exp: "exp", sp.log: "ln", sp.sin: "sin", sp.cos: "cos", sp.tan: "tan",
                 sp.sinh: "sinh", sp.cosh: "cosh", sp.atan: "atan", sp.atanh: "atanh"}


def render(e: sp.Expr) -> str:
    """Render ``e`` in the expression grammar; ``parse(render(e)) == e``."""
    return _render(sp.sympify(e))[0]


def _wrap(pair: tuple[str, int], prec: int) -> str:
    text, p = pair
    return f"({text})" if p < prec else text


def _render(e: sp.Expr) -> tuple[str, int]:
    if e.is_Integer:
        return (str(e), _PREC_ATOM) if e >= 0 else (f"-{-e}", _PREC_NEG)
    if e.is_Rational:
        s = f"{abs(e.p)}/{e.q}"
        return (s, _PREC_MUL) if e > 0 else (f"-{s}", _PREC_NEG)
    if e is sp.I:
        return "i", _PREC_ATOM
    if e is sp.pi:
        return "pi", _PREC_ATOM
    if e is sp.E:
        return "exp(1)", _PREC_ATOM
    if e.is_Symbol:
        return e.name, _PREC_ATOM
    if e.is_Add:
        parts = []
        for k, arg in enumerate(e.as_ordered_terms()):
            coeff, rest = arg.as_coeff_Mul()
            if k and coeff.is_Rational and coeff < 0:
                parts.append(" - " + _wrap(_render(-arg), _PREC_MUL))
            else:
                parts.append((" + " if k else "") + _wrap(_render(arg), _PREC_ADD + 1
                                                          if k else _PREC_ADD))
        return "".join(parts), _PREC_ADD
    if e.is_Mul:
        coeff, rest = e.as_coeff_Mul()
        if coeff.is_Rational and coeff < 0:
            return "-" + _wrap(_render(-e), _PREC_POW), _PREC_NEG
        num, den = [], []
        for arg in sp.Mul.make_args(e):
            if arg.is_Pow and arg.exp.is_Rational and arg.exp < 0:
                den.append(sp.Pow(arg.base, -arg.exp))
            elif arg.is_Rational and arg.q != 1:
                if arg.p != 1:
                    num.append(sp.Integer(arg.p))
                den.append(sp.Integer(arg.q))
            else:
                num.append(arg)
        text = "*".join(_wrap(_render(a), _PREC_MUL + 1) for a in num) if num else "1"
        for d in den:
            text += "/" + _wrap(_render(d), _PREC_POW)
        return text, _PREC_MUL
    if e.is_Pow:
        base = _wrap(_render(e.base), _PREC_ATOM)
        ex = _wrap(_render(e.exp), _PREC_ATOM)
        return f"{base}^{ex}", _PREC_POW
    if isinstance(e, sp.Function):
        if e.func in _RENDER_FUNCS:
            name = _RENDER_FUNCS[e.func]
        elif isinstance(e, sp.core.function.AppliedUndef):
            name = e.func.__name__
        else:
            raise ValueError(f"cannot render {e.func}")
        return f"{name}({', '.join(_render(a)[0] for a in e.args)})", _PREC_ATOM
    raise ValueError(f"cannot render {type(e).__name__}: {e}")


# ---------------------------------------------------------------------------
# symbolic manipulation
# ---------------------------------------------------------------------------

def differentiate(e: sp.Expr, v: sp.Symbol | str) -> sp.Expr:
    v = SHORTHANDS[v] if isinstance(v, str) else v
    if v not in COORDS:
        raise ValueError(f"can only differentiate w.r.t. t, x1, x2, x3; got {v}")
    return sp.diff(e, v)


def substitute(e: sp.Expr, bindings: Mapping) -> sp.Expr:
    """Simultaneous replacement of symbols or slot functions.

    Keys are symbols, symbol names, or slot names; a slot binding is a
    callable taking the slot arguments (e.g. a ``sympy.Lambda``).
    """
    symbol_map = {}
    slot_map = {}
    for key, value in bindings.items():
        name = key if isinstance(key, str) else getattr(key, "name", None)
        if callable(value) and not isinstance(value, sp.Basic) or isinstance(value, sp.Lambda):
            slot_map[name] = value
        else:
            sym = SHORTHANDS.get(key, sp.Symbol(key)) if isinstance(key, str) else key
            symbol_map[sym] = sp.sympify(value)
    if slot_map:
        e = e.replace(
            lambda node: isinstance(node, sp.core.function.AppliedUndef)
            and node.func.__name__ in slot_map,
            lambda node: slot_map[node.func.__name__](*node.args),
        )
    if symbol_map:
        e = e.xreplace(symbol_map)
    return e


def simplify(e: sp.Expr) -> sp.Expr:
    """Safe local rewrites only: integer powers (exponent <= 4) of sums expand.

    Constant folding, flattening, ordering and 0/1 absorption already happen
    on construction.  No trigonometric or logarithmic identities are applied.
    """
    def small_power(node):
        return (node.is_Pow and node.base.is_Add and node.exp.is_Integer
                and 1 < node.exp <= 4)

    return e.replace(small_power, lambda node: sp.expand(node, deep=False))


def free_parameters(e: sp.Expr) -> set[sp.Symbol]:
    return {s for s in e.free_symbols if s not in COORDS}


def slot_names(e: sp.Expr) -> set[str]:
    return {f.func.__name__ for f in e.atoms(sp.core.function.AppliedUndef)}


# ---------------------------------------------------------------------------
# numeric evaluation
# ---------------------------------------------------------------------------

_NUMPY_FUNCS = {sp.exp: np.exp, sp.sin: np.sin, sp.cos: np.cos, sp.tan: np.tan,
                sp.sinh: np.sinh, sp.cosh: np.cosh, sp.atan: np.arctan,
                sp.atanh: np.arctanh, sp.tanh: np.tanh, sp.asin: np.arcsin}


class _Evaluator:
    """Vectorized tree walk returning (value, magnitude) per node.

    The magnitude bounds the size of the partial sums that went into the
    value; it sets the scale for the relative zero test.
    """

    def __init__(self, bindings: Mapping[sp.Symbol, np.ndarray], size: int):
        self.b = bindings
        self.size = size
        self.memo: dict[sp.Basic, tuple[np.ndarray, np.ndarray]] = {}

    def const(self, value: complex):
        v = np.full(self.size, complex(value))
        return v, np.abs(v)

    def __call__(self, e: sp.Basic):
        hit = self.memo.get(e)
        if hit is None:
            hit = self.memo[e] = self._eval(e)
        return hit

    def _eval(self, e):
        if e.is_Symbol:
            try:
                v = np.asarray(self.b[e], dtype=complex) * np.ones(self.size)
            except KeyError:
                raise KeyError(f"unbound symbol {e}") from None
            return v, np.abs(v)
        if e.is_Number or e is sp.I or e.is_NumberSymbol:
            return self.const(complex(e))
        if e.is_Add:
            val = np.zeros(self.size, complex)
            mag = np.zeros(self.size)
            for arg in e.args:
                v, m = self(arg)
                val = val + v
                mag = mag + m
            return val, mag
        if e.is_Mul:
            val = np.ones(self.size, complex)
            mag = np.ones(self.size)
            for arg in e.args:
                v, m = self(arg)
                val = val * v
                mag = mag * m
            return val, mag
        if e.is_Pow:
            bv, bm = self(e.base)
            ex = e.exp
            if ex.is_Integer:
                n = int(ex)
                if n < 0 and np.any(bv == 0):
                    raise DomainError(f"division by zero in {e}")
                val = bv**n
                mag = bm**n if n > 0 else np.abs(val)
                return val, mag
            ev, _ = self(ex)
            if np.any(bv == 0):
                if np.any(ev.real <= 0):
                    raise DomainError(f"0 to a non-positive power in {e}")
                return np.zeros(self.size, complex), np.zeros(self.size)
            val = np.exp(ev * np.log(bv))
            return val, np.abs(val)
        if isinstance(e, sp.log):
            av, _ = self(e.args[0])
            if np.any((av.real <= 0) & (np.abs(av.imag) <= 1e-14 * np.abs(av.real))):
                raise DomainError(f"log of a non-positive real in {e}")
            val = np.log(av)
            return val, np.abs(val)
        func = _NUMPY_FUNCS.get(e.func)
        if func is not None:
            av, _ = self(e.args[0])
            if e.func is sp.atanh and np.any(np.abs(av) == 1):
                raise DomainError(f"atanh singularity in {e}")
            with np.errstate(all="ignore"):
                val = func(av)
            return val, np.abs(val)
        if isinstance(e, sp.Abs):
            av, _ = self(e.args[0])
            val = np.abs(av).astype(complex)
            return val, np.abs(val)
        raise TypeError(f"cannot evaluate {type(e).__name__}: {e}")


def _bind(point: Mapping) -> dict[sp.Symbol, np.ndarray]:
    out = {}
    for key, value in point.items():
        sym = SHORTHANDS.get(key, sp.Symbol(key)) if isinstance(key, str) else key
        out[sym] = np.atleast_1d(np.asarray(value, dtype=complex))
    return out


def evaluate_with_scale(e: sp.Expr, point: Mapping) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized evaluation returning ``(value, magnitude)`` arrays."""
    bindings = _bind(point)
    size = max((len(v) for v in bindings.values()), default=1)
    with np.errstate(all="ignore"):
        return _Evaluator(bindings, size)(sp.sympify(e))


def evaluate(e: sp.Expr, point: Mapping) -> complex | np.ndarray:
    """Evaluate ``e`` at a point (scalars) or a batch of points (arrays).

    ``point`` maps symbols or names to numbers; every free symbol must be
    bound.  Raises :class:`DomainError` outside the principal domains.
    """
    missing = {s for s in sp.sympify(e).free_symbols} - set(_bind(point))
    if missing:
        raise KeyError(f"unbound symbols: {sorted(map(str, missing))}")
    val, _ = evaluate_with_scale(e, point)
    if all(np.ndim(v) == 0 for v in point.values()):
        return complex(val[0])
    return val


# ---------------------------------------------------------------------------
# sampling and the zero test
# ---------------------------------------------------------------------------

@dataclass
class SamplingBox:
    """Coordinate ranges and parameter ranges for randomized checks.

    ``gap`` excludes ``(-gap, gap)`` for every coordinate whose range
    straddles zero.
    """

    coords: dict[str, tuple[float, float]] = field(default_factory=lambda: dict(DEFAULT_BOX))
    params: dict[str, tuple[float, float]] = field(default_factory=dict)
    gap: float = _GAP

    def with_overrides(self, coords: Mapping | None = None,
                       params: Mapping | None = None) -> "SamplingBox":
        c = dict(self.coords)
        c.update({k: tuple(v) for k, v in (coords or {}).items()})
        p = dict(self.params)
        p.update({k: tuple(v) for k, v in (params or {}).items()})
        return SamplingBox(c, p, self.gap)

    def sample_coords(self, rng: np.random.Generator, n: int) -> dict[sp.Symbol, np.ndarray]:
        out = {}
        for name in ("t", "x1", "x2", "x3"):
            lo, hi = self.coords[name]
            u = rng.uniform(lo, hi, n)
            if lo < -self.gap and hi > self.gap:
                small = np.abs(u) < self.gap
                while np.any(small):
                    u[small] = rng.uniform(lo, hi, int(small.sum()))
                    small = np.abs(u) < self.gap
            out[SHORTHANDS[name]] = u
        return out

    def sample_params(self, rng: np.random.Generator, names: Iterable[sp.Symbol]) -> dict:
        out = {}
        for sym in sorted(names, key=lambda s: s.name):
            lo, hi = self.params.get(sym.name, PARAM_RANGE)
            out[sym] = rng.uniform(lo, hi)
        return out


@dataclass
class ZeroTest:
    zero: bool
    max_residual: float
    witness: dict[str, complex] | None = None

    def __bool__(self) -> bool:
        return self.zero


def is_zero(e: sp.Expr, *, trials: int = 20, tol: float = 1e-9, draws: int = 3,
            rng: np.random.Generator | None = None, box: SamplingBox | None = None) -> ZeroTest:
    """Randomized zero test.

    ``e`` is declared zero when ``|e| < tol * (1 + scale)`` at ``trials``
    points for each of ``draws`` independent parameter draws, where ``scale``
    is the magnitude of the partial sums at that point.  A false result
    carries the first failing point as a witness.
    """
    if trials < 20:
        raise ValueError("is_zero needs at least 20 trials")
    e = sp.sympify(e)
    if e == 0:
        return ZeroTest(True, 0.0)
    rng = np.random.default_rng(0) if rng is None else rng
    box = box or SamplingBox()
    params = free_parameters(e)
    worst = 0.0
    for _ in range(max(draws, 1) if params else 1):
        point = box.sample_coords(rng, trials)
        point.update(box.sample_params(rng, params))
        val, mag = evaluate_with_scale(e, point)
        ratio = np.abs(val) / (1.0 + mag)
        bad = ~(ratio < tol)  # NaN counts as a failure
        finite = ratio[np.isfinite(ratio)]
        if finite.size:
            worst = max(worst, float(finite.max()))
        if np.any(bad):
            k = int(np.argmax(bad))
            witness = {s.name: complex(np.broadcast_to(v, (trials,))[k]) if np.ndim(v)
                       else complex(v) for s, v in point.items()}
            return ZeroTest(False, float(ratio[k]) if np.isfinite(ratio[k]) else float("inf"),
                            witness)
    return ZeroTest(True, worst)
