"""Machine-readable classification tables and their batch verification.

The catalog file lists one object per table row.  Inverse masses,
potentials and generators are strings in the expression and operator
grammars; arbitrary functions are slots (``F``, ``G``) with declared
argument expressions.  ``D1F``, ``D2F`` and ``dF`` denote partial
derivatives of ``F`` in its first and second argument, or the derivative of
a one-argument ``F``; they are bound by differentiating the chosen ``F``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import sympy as sp

from . import diffop as dop
from . import expr as ex
from . import liealg as la

TABLE_SIZES = {1: 18, 2: 15, 3: 18, 4: 7, 5: 12, 6: 24}
SEC9_SIZE = 3
DERIVATIVE_SLOTS = {"D1F": ("F", 0), "D2F": ("F", 1), "dF": ("F", 0)}

# Default arbitrary-function choices by role and arity; instantiation k uses index k mod 3.
POTENTIAL_SLOTS = {1: ["u", "u^2", "exp(-u)"], 2: ["u+v^2", "u^2-v", "exp(-u)*v"]}
MASS_SLOTS = {1: ["1+u^2", "exp(u/2)", "2+sin(u)"],
              2: ["1+u^2+v^2", "exp((u-v)/3)", "2+cos(u)*sin(v)"]}
_U, _V = sp.symbols("u v")


class CatalogError(ValueError):
    """Schema or content problem, tagged with the offending row."""

    def __init__(self, message: str, table=None, item=None):
        where = f"table {table} item {item}: " if table is not None else ""
        super().__init__(where + message)
        self.table, self.item = table, item


class ConstraintError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    range: tuple[float, float] = ex.PARAM_RANGE
    constraint: str = "any"

    def check(self, value: float) -> None:
        for tok in filter(None, (s.strip() for s in self.constraint.split(","))):
            if tok == "any":
                continue
            if tok == "nonzero" and value == 0:
                raise ConstraintError(f"{self.name} must be nonzero")
            if tok == "positive" and not value > 0:
                raise ConstraintError(f"{self.name} must be positive")
            if tok.startswith("!=") and np.isclose(value, float(tok[2:])):
                raise ConstraintError(f"{self.name} must differ from {tok[2:]}")

    def sample(self, rng: np.random.Generator) -> float:
        lo, hi = self.range
        while True:
            value = float(rng.uniform(lo, hi))
            if "positive" not in self.constraint and rng.random() < 0.5:
                value = -value
            excluded = [float(tok[2:]) for tok in self.constraint.split(",")
                        if tok.strip().startswith("!=")]
            if all(abs(value - v) > 0.15 for v in excluded):
                return value


@dataclass(frozen=True)
class Slot:
    name: str
    args: tuple[str, ...]


@dataclass
class CatalogEntry:
    table: int | str
    item: int
    f: str
    V: str
    params: tuple[Param, ...]
    slots: tuple[Slot, ...]
    generators: tuple[str, ...]
    generator_labels: tuple[str, ...] = ()
    algebra: dict | None = None
    equiv_transforms: tuple[str, ...] = ()
    notes: str = ""
    domain: dict = field(default_factory=dict)
    amended: dict = field(default_factory=dict)
    unresolved: bool = False

    @property
    def key(self) -> str:
        return f"{self.table}.{self.item}"

    @property
    def param_names(self) -> list[str]:
        return [p.name for p in self.params]

    def box(self) -> ex.SamplingBox:
        return ex.SamplingBox().with_overrides(coords=self.domain)


def default_catalog_path() -> Path:
    env = os.environ.get("PDM_CATALOG")
    if env:
        return Path(env)
    return Path(str(resources.files("pdmsym") / "data" / "catalog.json"))


def _slot_names(entry_slots) -> set[str]:
    names = {s.name for s in entry_slots}
    if "F" in names:
        names |= set(DERIVATIVE_SLOTS)
    return names


def _entry_from_dict(row: Mapping[str, Any], macros: Mapping[str, str]) -> CatalogEntry:
    table, item = row.get("table"), row.get("item")
    try:
        params = tuple(Param(p["name"], tuple(p.get("range", ex.PARAM_RANGE)),
                             p.get("constraint", "any")) for p in row["params"])
        slots = tuple(Slot(s["name"], tuple(s["args"])) for s in row["slots"])
        entry = CatalogEntry(
            table=table, item=int(item), f=row["f"], V=row["V"], params=params, slots=slots,
            generators=tuple(row["generators"]),
            generator_labels=tuple(row.get("generator_labels", ())),
            algebra=row.get("algebra"), equiv_transforms=tuple(row.get("equiv_transforms", ())),
            notes=row.get("notes", ""), domain=dict(row.get("domain", {})),
            amended=dict(row.get("amended", {})), unresolved=bool(row.get("unresolved", False)))
    except (KeyError, TypeError, ValueError) as err:
        raise CatalogError(f"schema violation ({err!r})", table, item) from None
    # Parse every template once so malformed rows fail at load time.
    names = set(entry.param_names) | set(macros)
    slot_names = _slot_names(entry.slots)
    try:
        for text in (entry.f, entry.V, *(a for s in entry.slots for a in s.args)):
            ex.parse(text, parameters=names, slots=slot_names)
        for text in entry.generators:
            dop.parse_operator(text, parameters=names)
        for text in _amended_texts(entry.amended):
            ex.parse(text, parameters=names, slots=slot_names) if not _is_operator_text(text) \
                else dop.parse_operator(text, parameters=names)
    except (ex.ExprSyntaxError, ex.UnknownIdentifierError) as err:
        raise CatalogError(str(err), table, item) from None
    return entry


def _amended_texts(amended: Mapping) -> list[str]:
    out = []
    for key in ("f", "V"):
        if key in amended:
            out.append(amended[key])
    out += list(amended.get("generators", {}).values())
    return out


def _is_operator_text(text: str) -> bool:
    return any(tok.kind == "ident" and tok.text in dop.GENERATOR_NAMES + ("M",)
               for tok in ex.tokenize(text))


@dataclass
class Catalog:
    entries: list[CatalogEntry]
    macros: dict[str, str]

    def select(self, table=None, item=None) -> list[CatalogEntry]:
        out = [e for e in self.entries
               if (table is None or str(e.table) == str(table))
               and (item is None or e.item == int(item))]
        return out

    def get(self, table, item) -> CatalogEntry:
        found = self.select(table, item)
        if not found:
            raise KeyError(f"no catalog entry for table {table} item {item}")
        return found[0]

    @property
    def classified(self) -> list[CatalogEntry]:
        return [e for e in self.entries if e.table != "sec9"]


def load_catalog(path: str | os.PathLike | None = None, *, check_counts: bool = True) -> Catalog:
    """Load and validate the catalog file.

    Counts per table are asserted against the published row counts unless
    ``check_counts`` is false (for partial catalogs).
    """
    path = Path(path) if path is not None else default_catalog_path()
    doc = json.loads(Path(path).read_text())
    macros = dict(doc.get("macros", {}))
    entries = [_entry_from_dict(row, macros) for row in doc["entries"]]
    seen = set()
    for e in entries:
        if e.key in seen:
            raise CatalogError("duplicate row", e.table, e.item)
        seen.add(e.key)
    if check_counts:
        for table, size in TABLE_SIZES.items():
            n = sum(1 for e in entries if e.table == table)
            if n != size:
                raise CatalogError(f"table {table} has {n} rows, expected {size}")
        n9 = sum(1 for e in entries if e.table == "sec9")
        if n9 != SEC9_SIZE:
            raise CatalogError(f"{n9} constant-mass rows, expected {SEC9_SIZE}")
    entries.sort(key=lambda e: (str(e.table) if e.table == "sec9" else f"{e.table:02d}", e.item))
    return Catalog(entries, macros)


# ---------------------------------------------------------------------------
# instantiation
# ---------------------------------------------------------------------------

@dataclass
class Instance:
    """A concrete system with its generators (printed and amended)."""

    entry: CatalogEntry
    system: dop.PdmSystem
    generators: list[dop.DiffOperator]
    amended_generators: dict[int, dop.DiffOperator]
    params: dict[str, float]
    slot_bindings: dict[str, str]


def default_slot_bindings(entry: CatalogEntry, k: int = 0) -> dict[str, str]:
    out = {}
    for s in entry.slots:
        arity = len(s.args)
        pool = MASS_SLOTS if s.name.startswith("F") else POTENTIAL_SLOTS
        out[s.name] = pool[arity][k % len(pool[arity])]
    return out


def sample_params(entry: CatalogEntry, rng: np.random.Generator) -> dict[str, float]:
    return {p.name: p.sample(rng) for p in entry.params}


def _slot_lambda(text: str, arity: int) -> sp.Lambda:
    args = (_U, _V)[:arity]
    body = ex.parse(text, parameters={"u", "v"}, slots=())
    return sp.Lambda(args, body)


def _bind_slots(entry: CatalogEntry, bindings: Mapping[str, str]) -> dict[str, sp.Lambda]:
    missing = {s.name for s in entry.slots} - set(bindings)
    if missing:
        raise KeyError(f"unbound slot(s): {sorted(missing)}")
    lambdas = {}
    for s in entry.slots:
        lambdas[s.name] = _slot_lambda(bindings[s.name], len(s.args))
    if "F" in lambdas:
        F = lambdas["F"]
        for name, (_, k) in DERIVATIVE_SLOTS.items():
            if k < len(F.variables):
                lambdas[name] = sp.Lambda(F.variables, sp.diff(F.expr, F.variables[k]))
    return lambdas


def instantiate(entry: CatalogEntry, slot_bindings: Mapping[str, str] | None = None,
                params: Mapping[str, float] | None = None, *, macros: Mapping[str, str] | None = None,
                use_amended: bool = True) -> Instance:
    """Bind slots and parameters, returning a concrete system and generators.

    Generators are returned as printed; amended variants (when the entry
    carries them) are returned separately, keyed by generator index.
    """
    slot_bindings = dict(slot_bindings if slot_bindings is not None
                         else default_slot_bindings(entry))
    params = dict(params if params is not None else {})
    missing = set(entry.param_names) - set(params)
    if missing:
        raise KeyError(f"unbound parameter(s): {sorted(missing)}")
    for p in entry.params:
        p.check(params[p.name])
    values = {sp.Symbol(k): sp.Float(v, 17) if not isinstance(v, (int, sp.Integer)) else sp.Integer(v)
              for k, v in params.items()}
    macro_exprs = {name: ex.parse(text) for name, text in (macros or {}).items()}
    lambdas = _bind_slots(entry, slot_bindings)
    slot_names = _slot_names(entry.slots)
    names = set(entry.param_names) | set(macro_exprs)

    def concrete(text: str) -> sp.Expr:
        e = ex.parse(text, parameters=names, slots=slot_names, macros=macro_exprs)
        return ex.substitute(ex.substitute(e, lambdas), values)

    def operator(text: str) -> dop.DiffOperator:
        op = dop.parse_operator(text, macros=macro_exprs, parameters=names)
        return op.map(lambda c: c.xreplace(values))

    f_text = entry.amended.get("f", entry.f) if use_amended else entry.f
    V_text = entry.amended.get("V", entry.V) if use_amended else entry.V
    system = dop.PdmSystem(concrete(f_text), concrete(V_text), {}, entry.box())
    gens = [operator(g) for g in entry.generators]
    amended = {int(k): operator(g) for k, g in entry.amended.get("generators", {}).items()} \
        if use_amended else {}
    return Instance(entry, system, gens, amended, params, slot_bindings)


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

@dataclass
class GeneratorResult:
    index: int
    label: str
    text: str
    status: str  # pass | pass_amended | fail
    max_residual: float
    a: str
    a_normalized: str
    correction: str | None = None
    witness: dict | None = None


@dataclass
class EntryReport:
    key: str
    table: int | str
    item: int
    instantiations: list[dict]
    generators: list[list[GeneratorResult]]
    uses_amended: bool
    unresolved: bool
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(g.status != "fail" for inst in self.generators for g in inst)

    @property
    def max_residual(self) -> float:
        return max((g.max_residual for inst in self.generators for g in inst), default=0.0)

    def to_json(self) -> dict:
        return {
            "key": self.key, "table": self.table, "item": self.item,
            "passed": self.passed, "uses_amended": self.uses_amended,
            "unresolved": self.unresolved, "error": self.error,
            "max_residual": _round(self.max_residual),
            "instantiations": [
                {**inst, "generators": [_gen_json(g) for g in gens]}
                for inst, gens in zip(self.instantiations, self.generators)],
        }


def _round(x: float) -> float:
    return float(f"{x:.3e}")


def _gen_json(g: GeneratorResult) -> dict:
    out = {"index": g.index, "label": g.label, "status": g.status,
           "max_residual": _round(g.max_residual), "a": g.a, "a_normalized": g.a_normalized}
    if g.correction is not None:
        out["correction"] = g.correction
    if g.witness is not None:
        out["witness"] = {k: [round(v.real, 6), round(v.imag, 6)] for k, v in sorted(g.witness.items())}
    return out


def _render_numeric(e: sp.Expr) -> str:
    return ex.render(sp.nsimplify(e, tolerance=1e-12, rational=False)) if e.free_symbols \
        else ex.render(sp.nsimplify(e, tolerance=1e-12))


def check_instance(inst: Instance, *, trials: int = 20, tol: float = 1e-9,
                   rng: np.random.Generator | None = None,
                   amended: Instance | None = None) -> list[GeneratorResult]:
    """Check the listed generators and ``P0``.

    ``inst`` holds the printed system and generators.  When ``amended`` is
    given (the same draw with the entry's amended forms), a generator that
    fails as printed is retried there and reported as ``pass_amended``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    L = dop.schrodinger_operator(inst.system)
    L_alt = dop.schrodinger_operator(amended.system) if amended is not None else None
    labels = list(inst.entry.generator_labels or ("",) * len(inst.generators))
    texts = list(inst.entry.generators) + ["P0"]
    gens = list(inst.generators) + [dop.standard_generator("P0")]
    labels = labels + ["P0"]
    results = []
    for k, Q in enumerate(gens):
        rep = dop.check_symmetry(Q, inst.system, L=L, trials=trials, tol=tol, rng=rng)
        status, used = ("pass", rep) if rep.passed else ("fail", rep)
        if not rep.passed and amended is not None:
            Q_alt = amended.amended_generators.get(k, Q)
            alt = dop.check_symmetry(Q_alt, amended.system, L=L_alt, trials=trials, tol=tol, rng=rng)
            if alt.passed:
                status, used = "pass_amended", alt
        witness = None
        if status == "fail":
            bad = used.failing()
            witness = used.residuals[bad[0]].witness if bad else None
        results.append(GeneratorResult(
            k, labels[k] if k < len(labels) else "", texts[k], status, used.max_residual,
            _short(used.a), _short(used.a_normalized),
            _short(rep.correction) if rep.correction is not None else None, witness))
    return results


def _short(e: sp.Expr) -> str:
    e = sp.sympify(e)
    e = e.xreplace({n: sp.Float(n, 10) for n in e.atoms(sp.Float)})
    return str(e)


def verify_entry(entry: CatalogEntry, *, instantiations: int = 3, seed: int = 0,
                 trials: int = 20, tol: float = 1e-9, macros: Mapping[str, str] | None = None,
                 params_list: Sequence[Mapping[str, float]] | None = None) -> EntryReport:
    """Check every listed generator of ``entry`` on several instantiations."""
    rng = np.random.default_rng(_entry_seed(seed, entry))
    insts, results = [], []
    error = None
    try:
        for k in range(instantiations):
            params = dict(params_list[k]) if params_list else sample_params(entry, rng)
            bindings = default_slot_bindings(entry, k)
            inst = instantiate(entry, bindings, params, macros=macros, use_amended=False)
            alt = instantiate(entry, bindings, params, macros=macros) if entry.amended else None
            insts.append({"params": {n: round(v, 12) for n, v in sorted(params.items())},
                          "slots": dict(sorted(bindings.items()))})
            results.append(check_instance(inst, trials=trials, tol=tol, rng=rng, amended=alt))
    except (ex.DomainError, ConstraintError, KeyError) as err:
        error = f"{type(err).__name__}: {err}"
    uses_amended = any(g.status == "pass_amended" for r in results for g in r)
    return EntryReport(entry.key, entry.table, entry.item, insts, results, uses_amended,
                       entry.unresolved, error)


def _entry_seed(seed: int, entry: CatalogEntry) -> list[int]:
    table = 9 if entry.table == "sec9" else int(entry.table)
    return [int(seed), table, int(entry.item)]


# ---------------------------------------------------------------------------
# temporal profiles of class-1 symmetries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TemporalProfile:
    """Solution branch of ``Phi''' = kappa Phi'`` for the time factor of a symmetry."""

    kappa: float
    branch: str  # linear | trigonometric | hyperbolic
    a: float = 1.0
    b: float = 0.0

    def phi_dot(self) -> sp.Expr:
        tt = ex.t
        if self.branch == "linear":
            return self.a * tt + self.b
        lam = sp.sqrt(abs(sp.nsimplify(self.kappa)))
        if self.branch == "trigonometric":
            return self.a * sp.cos(lam * tt) + self.b * sp.sin(lam * tt)
        if self.branch == "hyperbolic":
            return self.a * sp.cosh(lam * tt) + self.b * sp.sinh(lam * tt)
        raise ValueError(f"unknown branch {self.branch!r}")


# Family entries keyed by (family, branch), with the sign relating the
# catalog's mu to the linear coefficient of V.
PROFILE_FAMILIES = {
    ("rotation", "linear"): ((1, 1), 1), ("rotation", "trigonometric"): ((1, 7), 1),
    ("rotation", "hyperbolic"): ((1, 13), -1),
    ("dilation", "linear"): ((3, 1), 1), ("dilation", "trigonometric"): ((3, 4), 1),
    ("dilation", "hyperbolic"): ((3, 7), -1),
}


def _family_parts(family: str) -> tuple[dop.DiffOperator, sp.Expr]:
    if family == "rotation":
        return dop.standard_generator("L3"), ex.Theta
    if family == "dilation":
        return dop.standard_generator("D"), sp.log(sp.sqrt(ex.r2))
    raise ValueError(f"unknown family {family!r}")


def profile_generator(phi_dot: sp.Expr, mu, family: str = "rotation") -> dop.DiffOperator:
    """Class-1 symmetry ``Phi' X - Phi'' s + mu Phi`` built from a time factor.

    ``X`` is ``L3`` with ``s = Theta`` (rotation family, ``f = rt^2``) or
    ``D`` with ``s = ln r`` (dilation family, ``f = r^2``).  ``Phi`` is the
    antiderivative of ``phi_dot`` with zero integration constant.
    """
    X, s = _family_parts(family)
    Phi = sp.integrate(phi_dot, ex.t)
    return dop.DiffOperator.scalar(phi_dot) * X \
        + dop.DiffOperator.scalar(-sp.diff(phi_dot, ex.t) * s + mu * Phi)


def profile_system(kappa, mu, family: str = "rotation", G: str | None = None) -> dop.PdmSystem:
    """``V = G + mu s - kappa s^2 / 2`` with an invariant ``G`` of the family."""
    _, s = _family_parts(family)
    if family == "rotation":
        f, G_expr = ex.rt2, ex.parse(G or "x3^2/(1+rt^2)")
    else:
        f, G_expr = ex.r2, ex.parse(G or "cos(Theta)*rt/r")
    kappa = sp.nsimplify(kappa)
    return dop.PdmSystem(f, G_expr + mu * s - kappa * s**2 / 2)


def temporal_profile_check(p: TemporalProfile, *, family: str = "rotation", mu: float = 0.7,
                           catalog: "Catalog | None" = None,
                           rng: np.random.Generator | None = None) -> bool:
    """Check a temporal profile against the class-1 symmetries of Tables 1 and 3.

    Verifies the third-order ODE for the time factor and the branch/sign
    rule.  Then checks that the profile's generator is a symmetry of the
    matching family system, and that every catalog generator of the family
    lies in the span of the branch's two basis profiles and ``I``.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    kappa = sp.nsimplify(p.kappa)
    pd = p.phi_dot()
    if not ex.is_zero(sp.diff(pd, ex.t, 3) - kappa * sp.diff(pd, ex.t), rng=rng):
        return False
    expected = {"linear": kappa == 0, "trigonometric": kappa < 0, "hyperbolic": kappa > 0}
    if not expected.get(p.branch, False):
        return False
    system = profile_system(kappa, mu, family)
    if not dop.check_symmetry(profile_generator(pd, mu, family), system, rng=rng).passed:
        return False
    basis = [profile_generator(TemporalProfile(p.kappa, p.branch, a, b).phi_dot(), mu, family)
             for a, b in ((1, 0), (0, 1))]
    basis.append(dop.standard_generator("I"))
    catalog = catalog or load_catalog()
    (table, item), sign = PROFILE_FAMILIES[(family, p.branch)]
    entry = catalog.get(table, item)
    params = {"mu": sign * mu}
    if "lam" in entry.param_names:
        params["lam"] = float(sp.sqrt(abs(kappa)))
    inst = instantiate(entry, params=params)
    for k, Q in enumerate(inst.generators):
        res, _ = la.span_residual(inst.amended_generators.get(k, Q), basis,
                                  box=entry.box(), rng=rng)
        if res > la.CLOSURE_TOL:
            return False
    return True


# ---------------------------------------------------------------------------
# symmetry algebras
# ---------------------------------------------------------------------------

def entry_basis(inst: Instance) -> tuple[list[dop.DiffOperator], list[str]]:
    """Effective generators (amended where the entry amends them) plus the auxiliary ones."""
    entry = inst.entry
    given = entry.generator_labels or ("",) * len(entry.generators)
    labels = [lab or gen for lab, gen in zip(given, entry.generators)]
    ops = [inst.amended_generators.get(k, g) for k, g in enumerate(inst.generators)]
    aux = entry.algebra.get("aux", []) if entry.algebra else []
    return ops + [dop.standard_generator(a) for a in aux], labels + list(aux)


def entry_algebra(entry: CatalogEntry, *, seed: int = 0,
                  params: Mapping[str, float] | None = None) -> dict:
    """Structure constants and fingerprint of an entry's symmetry algebra."""
    rng = np.random.default_rng(_entry_seed(seed, entry))
    params = dict(params) if params is not None else sample_params(entry, rng)
    inst = instantiate(entry, params=params)
    ops, names = entry_basis(inst)
    sc = la.structure_constants(ops, names, box=entry.box(), rng=rng)
    label = entry.algebra.get("label") if entry.algebra else None
    out = {"key": entry.key, "table": entry.table, "item": entry.item,
           "params": {k: round(v, 12) for k, v in sorted(params.items())}}
    out.update(la.report(sc, label=label))
    if entry.algebra and entry.algebra.get("dim") is not None:
        out["printed_dim"] = entry.algebra["dim"]
    return out


# ---------------------------------------------------------------------------
# commutation tables
# ---------------------------------------------------------------------------

# Printed relations per family letter: (X, Y, {Z: coefficient}) meaning
# [X, Y] = sum coefficient * Z, with X1, X2 the family's two generators.
RELATION_TABLES = {
    "A": ("CR1", [("X1", "X2", {"I": "-i"}), ("P0", "X2", {"I": "i*mu"}),
                  ("P0", "X1", {"X2": "i"})]),
    "B": ("CR2", [("X1", "X2", {"I": "-i*lam"}), ("P0", "X1", {"X2": "i*lam"}),
                  ("P0", "X2", {"X1": "-i*lam"})]),
    "C": ("CR3", [("X1", "X2", {"I": "-i*lam"}), ("P0", "X1", {"X2": "i*lam"}),
                  ("P0", "X2", {"X1": "i*lam"})]),
    "Q": ("cr1", [("X1", "X2", {"X1": "-i"}), ("P0", "X1", {"X2": "2*i"}),
                  ("P0", "X2", {"P0": "-i"})]),
    "N": ("cr2", [("X1", "X2", {"P0": "-2*i*omega"}), ("P0", "X1", {"X2": "2*i*omega"}),
                  ("P0", "X2", {"X1": "-2*i*omega"})]),
    "S": ("cr3", [("X1", "X2", {"P0": "i*omega"}), ("P0", "X1", {"X2": "i*omega"}),
                  ("P0", "X2", {"X1": "i*omega"})]),
}

# Fixed generators of the additional symmetries and their printed relations.
ADDITIONAL_RELATIONS = {
    "cr4": (["D", "P3", "K3"], [("D", "P3", {"P3": "i"}), ("D", "K3", {"K3": "-i"}),
                                ("P3", "K3", {"D": "2*i"})]),
    "cr5": (["L1", "L2", "L3"], [("L1", "L2", {"L3": "i"}), ("L3", "L1", {"L2": "i"}),
                                 ("L2", "L3", {"L1": "i"})]),
    "cr6": (["P1", "P2", "L3"], [("P1", "P2", {}), ("P1", "L3", {"P2": "-i"}),
                                 ("P2", "L3", {"P1": "i"})]),
}


def _relation_tensor(names: Sequence[str], relations, values: Mapping[str, float]) -> np.ndarray:
    """Real structure constants (``[X, Y] = i c Z``) implied by a relation list."""
    idx = {n: k for k, n in enumerate(names)}
    c = np.zeros((len(names),) * 3)
    for x, y, rhs in relations:
        for z, coef in rhs.items():
            e = ex.parse(coef, parameters=set(values)).subs(
                {sp.Symbol(k): v for k, v in values.items()})
            v = complex(e) / 1j
            c[idx[x], idx[y], idx[z]] += v.real
            c[idx[y], idx[x], idx[z]] -= v.real
    return c


def _compare_relations(sc: la.StructureConstants, names: Sequence[str], relations,
                       values: Mapping[str, float], free: Sequence[str]) -> dict:
    target = _relation_tensor(names, relations, values)
    rows = []
    idx = {n: k for k, n in enumerate(names)}
    for x, y, _ in relations:
        i, j = idx[x], idx[y]
        rows.append({"pair": [x, y],
                     "printed": {names[k]: round(float(v), 10)
                                 for k, v in enumerate(target[i, j]) if abs(v) > 1e-12},
                     "computed": {names[k]: round(float(v), 10)
                                  for k, v in enumerate(sc.c[i, j]) if abs(v) > 1e-10},
                     "deviation": float(f"{np.max(np.abs(sc.c[i, j] - target[i, j])):.3e}")})
    # restrict the comparison to brackets the relation list covers
    mask = np.zeros_like(target, dtype=bool)
    for x, y, _ in relations:
        mask[idx[x], idx[y]] = mask[idx[y], idx[x]] = True
    exact = all(r["deviation"] < la.CLOSURE_TOL * (1 + max(map(abs, r["printed"].values()), default=0))
                for r in rows)
    found, d = la.normalization_match(np.where(mask, sc.c, 0), np.where(mask, target, 0),
                                      [idx[n] for n in free])
    return {"relations": rows, "exact": exact, "up_to_normalization": found,
            "scales": {n: round(float(d[idx[n]]), 10) for n in free} if found else None}


def relation_table_check(entry: CatalogEntry, *, seed: int = 0,
                         params: Mapping[str, float] | None = None) -> dict:
    """Compare an entry's time-dependent pair against its printed relation table.

    The pair is taken in its effective form (amended where the entry amends
    it).  Also checks that every additional generator commutes with the pair.
    """
    letter = entry.generator_labels[0][0]
    table_name, relations = RELATION_TABLES[letter]
    rng = np.random.default_rng(_entry_seed(seed, entry))
    params = dict(params) if params is not None else sample_params(entry, rng)
    inst = instantiate(entry, params=params)
    ops, labels = entry_basis(inst)
    names = ["X1", "X2"] + labels[2:]
    names = [n if n else f"Y{k}" for k, n in enumerate(names)]
    extra = [n for n in names[2:] if n not in ("P0", "I")]
    sc = la.structure_constants(ops, names, box=entry.box(), rng=rng)
    out = {"key": entry.key, "family": letter, "table": table_name,
           "params": {k: round(v, 12) for k, v in sorted(params.items())}, "closed": sc.closed}
    out.update(_compare_relations(sc, names, relations, params, ["X1", "X2", "P0"]))
    commute = 0.0
    for k, n in enumerate(names):
        if n in extra:
            commute = max(commute, float(np.max(np.abs(sc.c[k, :2]))))
    out["additional_commute_residual"] = float(f"{commute:.3e}")
    return out


def additional_relations_check() -> dict:
    """The fixed relations among ``D, P3, K3``, ``L_a`` and ``P1, P2, L3``."""
    out = {}
    for name, (gens, relations) in ADDITIONAL_RELATIONS.items():
        sc = la.structure_constants([dop.standard_generator(g) for g in gens], gens)
        res = _compare_relations(sc, gens, relations, {}, [])
        out[name] = {"exact": res["exact"], "relations": res["relations"]}
    return out
