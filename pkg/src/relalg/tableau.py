"""Tableaux of derivations: the tableau map, Spencer differentials, Cartan
characters, Cartan's test and Spencer cohomology dimensions.

A derivation of degree one is described by its components: a 2-form for each
"bracket" slot (one per frame covector of the source algebroid) and a 1-form
for each "symbol" slot (one per base variable).  A tableau is a finite set of
such derivations, given symbolically as the rows of a matrix.  Ranks are
computed numerically at seeded random points.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Mapping, Sequence

import numpy as np
import sympy

from . import _linalg
from .algebroid import RelativeAlgebroid
from .expr import ONE, ZERO, EvaluationError, Expr, differentiate, probe_point
from .exterior import DForm, multi_indices, sort_sign

__all__ = [
    "TableauData",
    "CharacterVector",
    "CartanTest",
    "UnsupportedCohomology",
    "TableauError",
    "tableau_map",
    "tautological_tableau",
    "symbol_block",
    "spencer_differential",
    "cartan_characters",
    "prolongation_rank",
    "cartan_test",
    "cartan_search",
    "spencer_cohomology_dim",
    "random_flag",
    "SUPPORTED_COHOMOLOGY",
    "RANDOM_FLAGS",
]

RANDOM_FLAGS = 8
SUPPORTED_COHOMOLOGY = {(m, l) for m in (-1, 0, 1) for l in (2, 3)}


class TableauError(ValueError):
    pass


class UnsupportedCohomology(TableauError):
    pass


@dataclass(frozen=True)
class TableauData:
    """Rows are generators (fiber directions); columns follow :meth:`columns`.

    Bracket entries use the structure-function convention: the entry at
    ("c", a, (j, k)) is d c^a_jk, so the 2-form in slot a has coefficient
    minus that entry on theta^j ^ theta^k.
    """

    n: int
    bracket_slots: tuple[str, ...]
    symbol_slots: tuple[str, ...]
    rows: tuple[str, ...]
    matrix: tuple[tuple[Expr, ...], ...]
    variables: tuple[str, ...] = ()

    def __post_init__(self):
        width = len(self.columns())
        if len(self.matrix) != len(self.rows):
            raise TableauError("one matrix row per generator")
        for row in self.matrix:
            if len(row) != width:
                raise TableauError(f"rows must have {width} entries")

    def columns(self) -> list[tuple]:
        cols: list[tuple] = []
        for a in range(1, len(self.bracket_slots) + 1):
            cols.extend(("c", a, jk) for jk in multi_indices(self.n, 2))
        for x in self.symbol_slots:
            cols.extend(("F", x, i) for i in range(1, self.n + 1))
        return cols

    @property
    def r(self) -> int:
        return len(self.rows)

    def column_names(self) -> list[str]:
        out = []
        for col in self.columns():
            if col[0] == "c":
                out.append(f"c[{self.bracket_slots[col[1] - 1]}]_{col[2][0]}{col[2][1]}")
            else:
                out.append(f"F[{col[1]}]_{col[2]}")
        return out


def tableau_map(a: RelativeAlgebroid) -> TableauData:
    """Fiber derivatives of the structure functions and of the anchor."""
    rows = []
    for y in a.fiber:
        row = []
        for i in range(1, a.n + 1):
            for j, k in multi_indices(a.n, 2):
                row.append(differentiate(a.structure_function(i, j, k), y))
        for mu in range(1, len(a.base) + 1):
            for i in range(1, a.n + 1):
                row.append(differentiate(a.anchor(mu, i), y))
        rows.append(tuple(row))
    return TableauData(a.n, a.frame, a.base, a.fiber, tuple(rows), a.variables)


def tautological_tableau(n: int, m: int, k: int) -> TableauData:
    """All of Hom(wedge^k W, V) with dim W = n, dim V = m, for k in {1, 2}.

    k = 1 uses symbol slots, k = 2 uses bracket slots.
    """
    if k not in (1, 2):
        raise TableauError("tautological tableaux are available for k = 1, 2")
    names = tuple(f"v{a}" for a in range(1, m + 1))
    if k == 1:
        shape = TableauData(n, (), names, (), ())
    else:
        shape = TableauData(n, names, (), (), ())
    cols = shape.columns()
    rows, labels = [], []
    for c, col in enumerate(cols):
        row = [ZERO] * len(cols)
        row[c] = ONE
        rows.append(tuple(row))
        labels.append(f"e{c + 1}")
    return TableauData(n, shape.bracket_slots, shape.symbol_slots, tuple(labels), tuple(rows))


def symbol_block(t: TableauData) -> list[list[Expr]]:
    """The anchor part of the tableau (columns ("F", x, i))."""
    idx = [k for k, col in enumerate(t.columns()) if col[0] == "F"]
    return [[row[k] for k in idx] for row in t.matrix]


# ---------------------------------------------------------------------------
# symbolic Spencer differential on Hom(W, T)


def _component_forms(t: TableauData, row: Sequence[Expr]) -> dict[str, DForm]:
    """The derivation encoded by one matrix row, as slot name -> form."""
    out: dict[str, list] = {}
    for col, value in zip(t.columns(), row):
        if value == 0:
            continue
        if col[0] == "c":
            out.setdefault(t.bracket_slots[col[1] - 1], []).append((col[2], -value))
        else:
            out.setdefault(col[1], []).append(((col[2],), value))
    forms = {}
    for name in t.bracket_slots:
        forms[name] = DForm.build(t.n, 2, out.get(name, []))
    for name in t.symbol_slots:
        forms[name] = DForm.build(t.n, 1, out.get(name, []))
    return forms


def spencer_differential(xi: Sequence[Sequence[Expr]], t: TableauData) -> dict[str, DForm]:
    """delta(xi) = sum_l theta^l ^ tau(xi_l) for xi in Hom(W, F).

    ``xi[rho][l-1]`` is the coefficient of generator rho in xi(e_l).  The result
    maps each slot to a 3-form (bracket slots) or a 2-form (symbol slots).
    """
    if len(xi) != t.r or any(len(row) != t.n for row in xi):
        raise TableauError(f"xi must be {t.r} x {t.n}")
    per_row = [_component_forms(t, row) for row in t.matrix]
    out = {}
    for name, degree in [(s, 3) for s in t.bracket_slots] + [(s, 2) for s in t.symbol_slots]:
        terms = []
        for rho, forms in enumerate(per_row):
            for idx, c in forms[name].items():
                for l in range(1, t.n + 1):
                    x = xi[rho][l - 1]
                    if x != 0:
                        terms.append(((l,) + idx, x * c))
        out[name] = DForm.build(t.n, degree, terms)
    return out


# ---------------------------------------------------------------------------
# numeric spaces


class _Space:
    """Coordinates on D^k: bracket slots carry (k+1)-forms, symbol slots k-forms."""

    def __init__(self, n: int, n_bracket: int, n_symbol: int):
        self.n = n
        self.nb = n_bracket
        self.ns = n_symbol
        self._cache: dict[int, tuple[list, dict]] = {}

    def coords(self, k: int):
        if k not in self._cache:
            cs = [("c", a, I) for a in range(self.nb) for I in multi_indices(self.n, k + 1)]
            cs += [("F", a, I) for a in range(self.ns) for I in multi_indices(self.n, k)]
            self._cache[k] = (cs, {c: i for i, c in enumerate(cs)})
        return self._cache[k]

    def dim(self, k: int) -> int:
        return len(self.coords(k)[0])


def _delta_tableau(space: _Space, l: int, basis: np.ndarray) -> np.ndarray:
    """Hom(wedge^l W, T) -> D^{1+l}; domain coordinates (L, b), L-major."""
    src, _ = space.coords(1)
    _, dst_index = space.coords(1 + l)
    Ls = multi_indices(space.n, l)
    r = basis.shape[1]
    out = np.zeros((len(dst_index), len(Ls) * r))
    for p, L in enumerate(Ls):
        for row, (kind, slot, I) in enumerate(src):
            vals = basis[row]
            if not np.any(vals):
                continue
            sign, J = sort_sign(L + I)
            if sign == 0:
                continue
            out[dst_index[(kind, slot, J)], p * r : (p + 1) * r] += sign * vals
    return out


def _delta_classical(n: int, l: int, prev_dim: int, basis: np.ndarray) -> np.ndarray:
    """Hom(wedge^l W, P) -> Hom(wedge^{l+1} W, Q) for P subset Hom(W, Q).

    ``basis`` holds P in Hom(W, Q) coordinates (j, b), j-major.
    """
    Ls = multi_indices(n, l)
    Ms = multi_indices(n, l + 1)
    m_index = {M: i for i, M in enumerate(Ms)}
    d = basis.shape[1]
    out = np.zeros((len(Ms) * prev_dim, len(Ls) * d))
    for p, L in enumerate(Ls):
        for j in range(1, n + 1):
            sign, M = sort_sign(L + (j,))
            if sign == 0:
                continue
            q = m_index[M]
            block = basis[(j - 1) * prev_dim : j * prev_dim, :]
            out[q * prev_dim : (q + 1) * prev_dim, p * d : (p + 1) * d] += sign * block
    return out


def _numeric_rows(t: TableauData, point: Mapping[str, object]) -> np.ndarray:
    """Tableau rows as D^1 vectors (form convention) at a point."""
    m = _linalg.evaluate(t.matrix, point) if t.r else np.zeros((0, len(t.columns())))
    signs = np.array([-1.0 if col[0] == "c" else 1.0 for col in t.columns()])
    return m * signs if m.size else m.reshape(t.r, len(t.columns()))


def _image_basis(rows: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the span of the rows."""
    if rows.size == 0:
        return np.zeros((rows.shape[1] if rows.ndim == 2 else 0, 0))
    _, s, vt = np.linalg.svd(rows, full_matrices=False)
    r = _linalg.rank(rows)
    return vt[:r].T.copy()


@dataclass
class _PointData:
    space: _Space
    T: np.ndarray  # columns: basis of the image tableau in D^1

    @property
    def rank(self) -> int:
        return self.T.shape[1]

    def delta(self, l: int) -> np.ndarray:
        return _delta_tableau(self.space, l, self.T)

    def prolongation(self) -> np.ndarray:
        return _linalg.null_space(self.delta(1), self.space.n * self.rank)


def _points(t: TableauData, seed: int, samples: int = _linalg.GENERIC_SAMPLES) -> list[dict]:
    rng = random.Random(seed)
    points, attempts = [], 0
    while len(points) < samples and attempts < 10 * samples:
        attempts += 1
        p = probe_point(t.variables, rng)
        try:
            _numeric_rows(t, p)
        except EvaluationError:
            continue
        points.append(p)
    if not points:
        raise EvaluationError("no valid probe point for the tableau")
    return points


def _at(t: TableauData, point) -> _PointData:
    space = _Space(t.n, len(t.bracket_slots), len(t.symbol_slots))
    return _PointData(space, _image_basis(_numeric_rows(t, point)))


# ---------------------------------------------------------------------------
# characters and Cartan's test


@dataclass
class CharacterVector:
    s: tuple[int, ...]
    flag: dict
    stable: bool = True
    warnings: list[str] = field(default_factory=list)

    @property
    def rank(self) -> int:
        return sum(self.s)

    @property
    def bound(self) -> int:
        return sum(i * si for i, si in enumerate(self.s, start=1))


@dataclass
class CartanTest:
    s: tuple[int, ...]
    bound: int
    prolongation_rank: int
    involutive: str  # "yes", "no" or "undetermined"
    flag: dict
    warnings: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "s": list(self.s),
            "bound": self.bound,
            "prolongation_rank": self.prolongation_rank,
            "involutive": self.involutive,
            "flag": self.flag,
            "warnings": list(self.warnings),
        }


def _flag_matrix(n: int, flag) -> tuple[np.ndarray, dict]:
    """Accepts None (identity), a permutation of 1..n, or a dict with
    "permutation" and/or "change" (rows of rationals)."""
    if flag is None:
        return np.eye(n), {"permutation": list(range(1, n + 1)), "change": None}
    if isinstance(flag, dict):
        perm = flag.get("permutation") or list(range(1, n + 1))
        change = flag.get("change")
    else:
        perm, change = list(flag), None
    if sorted(perm) != list(range(1, n + 1)):
        raise TableauError(f"{perm} is not a permutation of 1..{n}")
    g = np.zeros((n, n))
    for a, i in enumerate(perm):
        g[i - 1, a] = 1.0
    if change is not None:
        c = np.array([[float(Fraction(str(v))) for v in row] for row in change])
        if c.shape != (n, n) or abs(np.linalg.det(c)) < 1e-12:
            raise TableauError("frame change must be an invertible n x n matrix")
        g = g @ c
    return g, {"permutation": list(perm), "change": None if change is None else [[str(v) for v in row] for row in change]}


def random_flag(n: int, rng: random.Random) -> dict:
    """A random invertible integer frame change."""
    while True:
        rows = [[rng.randint(-3, 3) for _ in range(n)] for _ in range(n)]
        det = sympy.Matrix(rows).det()
        if det != 0:
            return {"permutation": list(range(1, n + 1)), "change": [[str(v) for v in row] for row in rows]}


def _transform(space: _Space, T: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Rewrite D^1 vectors in the coframe dual to the columns of g."""
    coords, index = space.coords(1)
    out = np.zeros_like(T)
    n = space.n
    pairs = multi_indices(n, 2)
    for row, (kind, slot, I) in enumerate(coords):
        vals = T[row]
        if not np.any(vals):
            continue
        if len(I) == 1:
            i = I[0] - 1
            for a in range(n):
                if g[i, a]:
                    out[index[(kind, slot, (a + 1,))]] += g[i, a] * vals
        else:
            i, j = I[0] - 1, I[1] - 1
            for a, b in pairs:
                w = g[i, a - 1] * g[j, b - 1] - g[j, a - 1] * g[i, b - 1]
                if w:
                    out[index[(kind, slot, (a, b))]] += w * vals
    return out


def _characters_at(pd: _PointData, g: np.ndarray) -> tuple[int, ...]:
    n = pd.space.n
    coords, _ = pd.space.coords(1)
    Tg = _transform(pd.space, pd.T, g)
    ranks = [pd.rank]
    for i in range(1, n + 1):
        keep = [row for row, (_, _, I) in enumerate(coords) if all(x <= i for x in I)]
        restricted = Tg[keep] if keep else np.zeros((0, pd.rank))
        ranks.append(pd.rank - _linalg.rank(restricted))
    return tuple(ranks[i - 1] - ranks[i] for i in range(1, n + 1))


def _stable(values: list, what: str, warnings: list[str]):
    if len(set(values)) > 1:
        warnings.append(f"{what} differs between probe points: {values}")
        return max(values), False
    return values[0], True


def cartan_characters(t: TableauData, flag=None, seed: int = 0) -> CharacterVector:
    g, desc = _flag_matrix(t.n, flag)
    warnings: list[str] = []
    values = [_characters_at(_at(t, p), g) for p in _points(t, seed)]
    s, stable = _stable(values, "characters", warnings)
    return CharacterVector(tuple(s), desc, stable, warnings)


def prolongation_rank(t: TableauData, seed: int = 0) -> int:
    """dim of the first prolongation of the image tableau."""
    values = []
    for p in _points(t, seed):
        pd = _at(t, p)
        values.append(pd.space.n * pd.rank - _linalg.rank(pd.delta(1)))
    # the generic value is the smallest kernel
    return min(values)


def cartan_test(t: TableauData, flag=None, seed: int = 0) -> CartanTest:
    g, desc = _flag_matrix(t.n, flag)
    warnings: list[str] = []
    s_values, p_values = [], []
    for p in _points(t, seed):
        pd = _at(t, p)
        s_values.append(_characters_at(pd, g))
        p_values.append(pd.space.n * pd.rank - _linalg.rank(pd.delta(1)))
    s, s_ok = _stable(s_values, "characters", warnings)
    rank, r_ok = _stable(p_values, "prolongation rank", warnings)
    bound = sum(i * si for i, si in enumerate(s, start=1))
    if not (s_ok and r_ok):
        verdict = "undetermined"
    else:
        verdict = "yes" if rank == bound else "no"
    if verdict == "no":
        warnings.append("not involutive by this test (the converse of Cartan's test is not known)")
    return CartanTest(tuple(s), bound, rank, verdict, desc, warnings)


def cartan_search(t: TableauData, seed: int = 0, random_flags: int = RANDOM_FLAGS) -> dict:
    """Identity flag first, then ``random_flags`` random frame changes.

    Reports the lexicographically largest characters and whether any flag
    passed Cartan's test.
    """
    rng = random.Random(seed)
    flags = [None] + [random_flag(t.n, rng) for _ in range(random_flags)]
    results = [cartan_test(t, f, seed) for f in flags]
    best = max(results, key=lambda r: r.s)
    passed = [r for r in results if r.involutive == "yes"]
    chosen = passed[0] if passed else best
    if any(r.involutive == "undetermined" for r in results) and not passed:
        verdict = "undetermined"
    else:
        verdict = "yes" if passed else "no"
    warnings = sorted({w for r in results for w in r.warnings})
    return {
        "s": list(best.s),
        "bound": chosen.bound,
        "prolongation_rank": chosen.prolongation_rank,
        "involutive": verdict,
        "flag": chosen.flag,
        "flags_tested": len(results),
        "flags_passed": len(passed),
        "warnings": warnings,
    }


# ---------------------------------------------------------------------------
# Spencer cohomology


def _cohomology_at(pd: _PointData, m: int, l: int) -> int:
    n, space = pd.space.n, pd.space
    r = pd.rank
    if m == -1:
        # D^l modulo the image of Hom(wedge^{l-1} W, T)
        return space.dim(l) - _linalg.rank(pd.delta(l - 1))
    t1 = pd.prolongation()
    r1 = t1.shape[1]
    if m == 0:
        dim = comb(n, l) * r
        kernel = dim - _linalg.rank(pd.delta(l))
        image = _linalg.rank(_delta_classical(n, l - 1, r, t1))
        return kernel - image
    t2 = _linalg.null_space(_delta_classical(n, 1, r, t1), n * r1)
    dim = comb(n, l) * r1
    kernel = dim - _linalg.rank(_delta_classical(n, l, r, t1))
    image = _linalg.rank(_delta_classical(n, l - 1, r1, t2))
    return kernel - image


def spencer_cohomology_dim(t: TableauData, m: int, l: int, point: Mapping[str, object]) -> int:
    """dim H^{m,l} of the image tableau at ``point``.

    H^{-1,l} = D^l / delta Hom(wedge^{l-1} W, T); for m >= 0 the usual
    ker/im of the Spencer complex of the prolongations.
    """
    if (m, l) not in SUPPORTED_COHOMOLOGY:
        raise UnsupportedCohomology(f"H^{{{m},{l}}} is not supported; use m in -1..1 and l in 2..3")
    missing = [v for v in t.variables if v not in point]
    if missing:
        raise TableauError(f"point leaves {', '.join(missing)} unassigned")
    return _cohomology_at(_at(t, point), m, l)
