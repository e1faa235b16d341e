"""Structure constants and structural fingerprints of symmetry algebras.

Brackets follow the physics convention ``[e_i, e_j] = i c_ij^k e_k`` with real
``c``; the real Lie algebra used for fingerprints has bracket ``c``.  Brackets
are expanded in the basis numerically: all operator coefficients are
evaluated on a point sample and the expansion is a least-squares solve.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import sympy as sp

from . import diffop as dop
from . import expr as ex

CLOSURE_TOL = 1e-8


class DependentBasis(ValueError):
    pass


def _coefficient_vectors(ops: Sequence[dop.DiffOperator], point: Mapping,
                         indices: Sequence[tuple]) -> tuple[np.ndarray, np.ndarray]:
    """Stack coefficient values (and magnitudes) of each operator into columns."""
    cols, mags = [], []
    for op in ops:
        vals, scales = [], []
        for mi in indices:
            c = op.coefficient(mi)
            if c == 0:
                n = len(next(iter(point.values())))
                vals.append(np.zeros(n, complex))
                scales.append(np.zeros(n))
            else:
                v, m = ex.evaluate_with_scale(c, point)
                n = len(next(iter(point.values())))
                vals.append(np.broadcast_to(v, (n,)))
                scales.append(np.broadcast_to(m, (n,)))
        cols.append(np.concatenate(vals))
        mags.append(np.concatenate(scales))
    return np.array(cols).T, np.array(mags).T


def _weighted_solve(A: np.ndarray, A_mag: np.ndarray, b: np.ndarray,
                    b_mag: np.ndarray) -> np.ndarray:
    """Least squares with rows scaled by their rounding magnitude.

    Rows where large intermediate terms cancel (``cosh^2 - sinh^2``) carry
    large absolute errors; unweighted they would spoil the fit elsewhere.
    """
    w = 1.0 / (1.0 + b_mag + A_mag.sum(axis=1))
    z, *_ = np.linalg.lstsq(A * w[:, None], b * w, rcond=None)
    return z


@dataclass
class Bracket:
    i: int
    j: int
    coefficients: np.ndarray  # real c_ij^k
    residual: float
    imaginary: float  # size of the non-real part of i*c (should vanish)

    @property
    def closed(self) -> bool:
        return self.residual < CLOSURE_TOL and self.imaginary < CLOSURE_TOL


@dataclass
class StructureConstants:
    names: list[str]
    c: np.ndarray  # shape (n, n, n): c[i, j, k]
    brackets: list[Bracket] = field(default_factory=list)

    @property
    def n(self) -> int:
        return len(self.names)

    @property
    def closed(self) -> bool:
        return all(b.closed for b in self.brackets)

    @property
    def max_residual(self) -> float:
        return max((max(b.residual, b.imaginary) for b in self.brackets), default=0.0)

    def failures(self) -> list[tuple[str, str]]:
        return [(self.names[b.i], self.names[b.j]) for b in self.brackets if not b.closed]

    def bracket(self, i: int, j: int) -> np.ndarray:
        return self.c[i, j]


def structure_constants(basis: Sequence[dop.DiffOperator], names: Sequence[str] | None = None, *,
                        box: ex.SamplingBox | None = None, rng: np.random.Generator | None = None,
                        n_points: int | None = None) -> StructureConstants:
    """Expand every bracket ``[e_i, e_j]`` in the basis.

    Raises :class:`DependentBasis` when the basis operators are numerically
    linearly dependent.  Non-closure is recorded per bracket.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    box = box or ex.SamplingBox()
    n = len(basis)
    names = list(names) if names is not None else [f"e{k}" for k in range(n)]
    comms = {(i, j): dop.commutator(basis[i], basis[j]) for i in range(n) for j in range(i + 1, n)}
    indices = sorted({mi for op in list(basis) + list(comms.values()) for mi in op.terms})
    if not indices:
        indices = [dop.ZERO_INDEX]
    n_points = n_points or max(2 * n, 20)
    point = box.sample_coords(rng, n_points)
    A, A_mag = _coefficient_vectors(basis, point, indices)
    sv = np.linalg.svd(A, compute_uv=False)
    if n and sv[-1] < 1e-9 * max(sv[0], 1.0):
        raise DependentBasis(f"basis is linearly dependent (singular values {sv})")
    c = np.zeros((n, n, n))
    brackets = []
    for (i, j), C in comms.items():
        b, b_mag = _coefficient_vectors([C], point, indices)
        b, b_mag = b[:, 0], b_mag[:, 0]
        z = _weighted_solve(A, A_mag, b, b_mag)
        resid = np.abs(A @ z - b)
        scale = 1.0 + b_mag + A_mag @ np.abs(z)
        coeff = z / 1j
        real = coeff.real
        imag = float(np.max(np.abs(coeff.imag))) if n else 0.0
        c[i, j], c[j, i] = real, -real
        brackets.append(Bracket(i, j, real, float(np.max(resid / scale)) if resid.size else 0.0,
                                imag / (1.0 + float(np.max(np.abs(real), initial=0.0)))))
    return StructureConstants(names, c, brackets)


def jacobi_residual(sc: StructureConstants) -> float:
    """Max |[[e_i,e_j],e_k] + cyclic| over all triples, in the real bracket."""
    c = sc.c
    # [[e_i,e_j],e_k] = c_ij^m c_mk^l
    t1 = np.einsum("ijm,mkl->ijkl", c, c)
    total = t1 + np.einsum("jkm,mil->ijkl", c, c) + np.einsum("kim,mjl->ijkl", c, c)
    return float(np.max(np.abs(total), initial=0.0))


def antisymmetry_residual(sc: StructureConstants) -> float:
    return float(np.max(np.abs(sc.c + np.transpose(sc.c, (1, 0, 2))), initial=0.0))


# ---------------------------------------------------------------------------
# fingerprints
# ---------------------------------------------------------------------------

def _rank(M: np.ndarray, tol: float = 1e-8) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(s > tol * max(1.0, s[0])))


def _span_of_brackets(c: np.ndarray, U: np.ndarray, W: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of span{[u, w]} for u in cols(U), w in cols(W)."""
    if U.shape[1] == 0 or W.shape[1] == 0:
        return np.zeros((c.shape[0], 0))
    vecs = np.einsum("ia,jb,ijk->kab", U, W, c).reshape(c.shape[0], -1)
    if vecs.size == 0:
        return np.zeros((c.shape[0], 0))
    u, s, _ = np.linalg.svd(vecs, full_matrices=False)
    r = int(np.sum(s > 1e-8 * max(1.0, s[0] if s.size else 1.0)))
    return u[:, :r]


def _series(c: np.ndarray, lower: bool) -> list[int]:
    n = c.shape[0]
    g = np.eye(n)
    cur = g
    dims = [n]
    for _ in range(n + 1):
        nxt = _span_of_brackets(c, g if lower else cur, cur)
        dims.append(nxt.shape[1])
        if nxt.shape[1] in (0, cur.shape[1]):
            break
        cur = nxt
    return dims


def killing_form(c: np.ndarray) -> np.ndarray:
    # tr(ad_i ad_l) with (ad_i)_{kj} = c_ij^k
    return np.einsum("ijk,lkj->il", c, c)


def _signature(K: np.ndarray, tol: float = 1e-8) -> tuple[int, int]:
    if K.size == 0:
        return (0, 0)
    w = np.linalg.eigvalsh((K + K.T) / 2)
    cut = tol * max(1.0, float(np.max(np.abs(w))))
    return int(np.sum(w > cut)), int(np.sum(w < -cut))


def _null_space(M: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    if M.size == 0:
        return np.eye(M.shape[1])
    u, s, vt = np.linalg.svd(M)
    r = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[r:].T


def semisimple_quotient(c: np.ndarray) -> np.ndarray:
    """Structure constants of g / rad(g), via Cartan's criterion for the radical."""
    n = c.shape[0]
    if n == 0:
        return c
    K = killing_form(c)
    derived = _span_of_brackets(c, np.eye(n), np.eye(n))
    # rad = {x : K(x, [g,g]) = 0}
    rad = _null_space((K @ derived).T) if derived.shape[1] else np.eye(n)
    if rad.shape[1] == n:
        return np.zeros((0, 0, 0))
    comp = _null_space(rad.T)  # orthogonal complement, a vector-space lift of g/rad
    basis = np.hstack([comp, rad])
    inv = np.linalg.inv(basis)
    m = comp.shape[1]
    br = np.einsum("ia,jb,ijk->abk", comp, comp, c)
    coords = np.einsum("kl,abl->abk", inv, br)
    return coords[:, :, :m]


@dataclass
class AlgebraFingerprint:
    dim: int
    derived_series: list[int]
    lower_central_series: list[int]
    solvable: bool
    nilpotent: bool
    killing_rank: int
    killing_signature: tuple[int, int]
    center_dim: int
    semisimple_dim: int
    semisimple_signature: tuple[int, int]

    def to_json(self) -> dict:
        return {"dim": self.dim, "derived_series": self.derived_series,
                "lower_central_series": self.lower_central_series,
                "solvable": self.solvable, "nilpotent": self.nilpotent,
                "killing_rank": self.killing_rank,
                "killing_signature": list(self.killing_signature),
                "center_dim": self.center_dim, "semisimple_dim": self.semisimple_dim,
                "semisimple_signature": list(self.semisimple_signature)}


def fingerprint(sc: StructureConstants | np.ndarray) -> AlgebraFingerprint:
    c = sc.c if isinstance(sc, StructureConstants) else np.asarray(sc, float)
    n = c.shape[0]
    derived = _series(c, lower=False)
    lower = _series(c, lower=True)
    K = killing_form(c) if n else np.zeros((0, 0))
    # center: x with sum_i x_i c_ij^k = 0 for all j, k
    center_dim = n - _rank(c.reshape(n, n * n).T) if n else 0
    q = semisimple_quotient(c)
    return AlgebraFingerprint(
        dim=n, derived_series=derived, lower_central_series=lower,
        solvable=derived[-1] == 0, nilpotent=lower[-1] == 0,
        killing_rank=_rank(K), killing_signature=_signature(K), center_dim=center_dim,
        semisimple_dim=q.shape[0],
        semisimple_signature=_signature(killing_form(q)) if q.shape[0] else (0, 0))


# ---------------------------------------------------------------------------
# expected fingerprints from the printed labels
# ---------------------------------------------------------------------------

SIMPLE_LABELS = {
    "sl(2,R)": (3, (2, 1)), "so(1,2)": (3, (2, 1)), "so(3)": (3, (0, 3)),
    "so(4)": (6, (0, 6)), "so(1,3)": (6, (3, 3)), "so(1,4)": (10, (4, 6)),
}
SOLVABLE_LABELS = {"e(2)": (3, False)}
_LOW_DIM = re.compile(r"^([ns])_\{(\d+),(\d+)\}$")


@dataclass
class ExpectedAlgebra:
    dim: int
    semisimple_dim: int
    semisimple_signature: tuple[int, int]
    solvable: bool
    nilpotent: bool


def expected_from_label(label: str) -> ExpectedAlgebra:
    """Fingerprint implied by a direct-sum label such as ``n_{4,1}+sl(2,R)``."""
    dim = ss = 0
    sig = [0, 0]
    nilpotent = True
    for part in (p.strip() for p in label.split("+")):
        if part in SIMPLE_LABELS:
            d, s = SIMPLE_LABELS[part]
            dim, ss = dim + d, ss + d
            sig[0] += s[0]
            sig[1] += s[1]
            nilpotent = False
        elif part in SOLVABLE_LABELS:
            d, nil = SOLVABLE_LABELS[part]
            dim += d
            nilpotent = nilpotent and nil
        else:
            m = _LOW_DIM.match(part)
            if not m:
                raise ValueError(f"unrecognised algebra label {part!r}")
            dim += int(m.group(2))
            nilpotent = nilpotent and m.group(1) == "n"
    return ExpectedAlgebra(dim, ss, tuple(sig), ss == 0, nilpotent)


def compare_with_label(fp: AlgebraFingerprint, label: str) -> dict:
    exp = expected_from_label(label)
    checks = {
        "dim": fp.dim == exp.dim,
        "semisimple": (fp.semisimple_dim, fp.semisimple_signature)
        == (exp.semisimple_dim, exp.semisimple_signature),
        "solvable": fp.solvable == exp.solvable,
        "nilpotent": fp.nilpotent == exp.nilpotent,
    }
    return {"expected": {"dim": exp.dim, "semisimple_dim": exp.semisimple_dim,
                         "semisimple_signature": list(exp.semisimple_signature),
                         "solvable": exp.solvable, "nilpotent": exp.nilpotent},
            "checks": checks}


# ---------------------------------------------------------------------------
# relations
# ---------------------------------------------------------------------------

@dataclass
class RelationMismatch:
    i: str
    j: str
    expected: list[complex]
    computed: list[complex]
    deviation: float


def verify_relations(sc: StructureConstants,
                     expected: Sequence[tuple[int, int, Mapping[int, complex]]],
                     *, tol: float = CLOSURE_TOL) -> list[RelationMismatch]:
    """Compare ``[e_i, e_j] = sum_k coef_k e_k`` against the computed constants.

    ``coef_k`` are the full (complex) coefficients, e.g. ``-1j`` for
    ``[A1, A2] = -i I``.  Returns the mismatches (empty when all agree).
    """
    out = []
    for i, j, coefs in expected:
        want = np.zeros(sc.n, complex)
        for k, v in coefs.items():
            want[k] = v
        got = 1j * sc.c[i, j]
        dev = float(np.max(np.abs(got - want), initial=0.0))
        if dev > tol:
            out.append(RelationMismatch(sc.names[i], sc.names[j], want.tolist(), got.tolist(), dev))
    return out


def cross_bracket_residual(sc: StructureConstants, groups: Sequence[Sequence[int]]) -> float:
    """Largest bracket between different blocks of a claimed direct sum,
    together with any leakage of in-block brackets out of the block."""
    worst = 0.0
    owner = {k: g for g, block in enumerate(groups) for k in block}
    for i in range(sc.n):
        for j in range(sc.n):
            if i not in owner or j not in owner:
                continue
            v = sc.c[i, j]
            if owner[i] != owner[j]:
                worst = max(worst, float(np.max(np.abs(v))))
            else:
                outside = [k for k in range(sc.n) if owner.get(k) != owner[i]]
                if outside:
                    worst = max(worst, float(np.max(np.abs(v[outside]))))
    return worst


def so14_relations() -> tuple[list[dop.DiffOperator], list[str], list]:
    """The ten ``M(mu, nu)``, ``mu < nu``, and all 45 expected brackets."""
    g = np.diag([1, -1, -1, -1, -1])
    pairs = [(m, n) for m in range(5) for n in range(m + 1, 5)]
    index = {p: k for k, p in enumerate(pairs)}
    basis = [dop.standard_generator("M", *p) for p in pairs]
    names = [f"M{m}{n}" for m, n in pairs]

    def as_basis(a, b, coef):
        if a == b or coef == 0:
            return {}
        if a < b:
            return {index[(a, b)]: coef}
        return {index[(b, a)]: -coef}

    expected = []
    for p, q in ((p, q) for p in range(10) for q in range(p + 1, 10)):
        (m, n), (l, s) = pairs[p], pairs[q]
        terms: dict[int, complex] = {}
        for a, b, coef in ((n, l, g[m, s]), (m, s, g[n, l]), (n, s, -g[m, l]), (m, l, -g[n, s])):
            for k, v in as_basis(a, b, 1j * coef).items():
                terms[k] = terms.get(k, 0) + v
        expected.append((p, q, {k: v for k, v in terms.items() if v != 0}))
    return basis, names, expected


def report(sc: StructureConstants, *, label: str | None = None,
           relations: Sequence | None = None) -> dict:
    """JSON-ready summary of closure, fingerprint and (optionally) relations."""
    out: dict = {"basis": sc.names, "dim": sc.n, "closed": sc.closed,
                 "max_residual": float(f"{sc.max_residual:.3e}")}
    if sc.closed:
        fp = fingerprint(sc)
        out.update({k: v for k, v in fp.to_json().items() if k != "dim"})
        out["jacobi_residual"] = float(f"{jacobi_residual(sc):.3e}")
        if label:
            out["expected_label"] = label
            out["label_comparison"] = compare_with_label(fp, label)
    else:
        out["non_closing_pairs"] = [list(p) for p in sc.failures()]
    out["brackets"] = [
        {"pair": [sc.names[b.i], sc.names[b.j]],
         "coefficients": {sc.names[k]: round(float(v), 10)
                          for k, v in enumerate(b.coefficients) if abs(v) > 1e-10},
         "residual": float(f"{b.residual:.3e}")}
        for b in sc.brackets]
    if relations is not None:
        mism = verify_relations(sc, relations)
        out["relations_checked"] = len(relations)
        out["relation_mismatches"] = [
            {"pair": [m.i, m.j], "deviation": float(f"{m.deviation:.3e}")} for m in mism]
    return out


def span_residual(op: dop.DiffOperator, basis: Sequence[dop.DiffOperator], *,
                  box: ex.SamplingBox | None = None, rng: np.random.Generator | None = None,
                  n_points: int = 24) -> tuple[float, np.ndarray]:
    """Relative residual of the best expansion of ``op`` in ``basis``.

    Returns ``(residual, coefficients)``; a residual below ``CLOSURE_TOL``
    means ``op`` lies in the (complex) span.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    box = box or ex.SamplingBox()
    indices = sorted({mi for o in [op, *basis] for mi in o.terms}) or [dop.ZERO_INDEX]
    point = box.sample_coords(rng, n_points)
    b, b_mag = _coefficient_vectors([op], point, indices)
    A, A_mag = _coefficient_vectors(basis, point, indices)
    b, b_mag = b[:, 0], b_mag[:, 0]
    z = _weighted_solve(A, A_mag, b, b_mag)
    scale = 1.0 + b_mag + A_mag @ np.abs(z)
    return float(np.max(np.abs(A @ z - b) / scale)), z


def normalization_match(c: np.ndarray, target: np.ndarray, free: Sequence[int], *,
                        tol: float = CLOSURE_TOL) -> tuple[bool, np.ndarray]:
    """Search for rescalings ``e_k -> d_k e_k`` (``k`` in ``free``) mapping ``c`` onto ``target``.

    Rescaling gives ``c'_ij^k = c_ij^k d_i d_j / d_k``.  Magnitudes are fitted
    in log space over the common support and every sign pattern of the free
    scales is tried.  Returns ``(found, d)``.
    """
    n = c.shape[0]
    if not np.array_equal(np.abs(c) > tol, np.abs(target) > tol):
        return False, np.ones(n)
    support = np.argwhere(np.abs(c) > tol)
    free = list(free)
    col = {k: m for m, k in enumerate(free)}
    rows, rhs = [], []
    for i, j, k in support:
        row = np.zeros(len(free))
        for idx, sgn in ((i, 1), (j, 1), (k, -1)):
            if idx in col:
                row[col[idx]] += sgn
        rows.append(row)
        rhs.append(np.log(abs(target[i, j, k])) - np.log(abs(c[i, j, k])))
    logd = np.linalg.lstsq(np.array(rows), np.array(rhs), rcond=None)[0] if rows else np.zeros(len(free))
    for signs in range(2 ** len(free)):
        d = np.ones(n)
        for m, k in enumerate(free):
            d[k] = np.exp(logd[m]) * (-1 if signs >> m & 1 else 1)
        scaled = np.einsum("ijk,i,j,k->ijk", c, d, d, 1.0 / d)
        if np.max(np.abs(scaled - target), initial=0.0) < tol * (1.0 + np.max(np.abs(target))):
            return True, d
    return False, np.ones(n)
