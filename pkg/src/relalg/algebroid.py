"""Relative algebroids in coordinates.

An algebroid is stored through its structure equations: the 2-forms
``D theta^i`` and the 1-forms ``D x^mu`` over base and fiber variables.  The
structure functions and the anchor are read off from them:

    D theta^i = -sum_{j<k} c^i_jk theta^j ^ theta^k,    D x^mu = sum_i F^mu_i theta^i.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np
import sympy

from . import _linalg
from .expr import (
    ONE,
    ZERO,
    Expr,
    ParseError,
    Verdict,
    differentiate,
    is_zero,
    simplify,
    substitute,
    to_text,
)
from .exterior import DForm, FrameError, form_text, multi_indices, parse_form, wedge

__all__ = [
    "RelativeAlgebroid",
    "AlgebroidError",
    "AlgebroidFormatError",
    "DomainError",
    "InvarianceError",
    "ReductionError",
    "load_algebroid",
    "dump_algebroid",
    "derive",
    "bracket",
    "anchor_apply",
    "frame_section",
    "classifying_data",
    "component_labels",
    "is_standard",
    "restrict",
    "systatic_directions",
    "reduce",
    "direct_square",
]


class AlgebroidError(ValueError):
    pass


class AlgebroidFormatError(AlgebroidError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(message if line is None else f"line {line}: {message}")


class DomainError(AlgebroidError):
    """A coefficient mentions a variable outside the allowed set."""


class InvarianceError(AlgebroidError):
    pass


class ReductionError(AlgebroidError):
    pass


@dataclass(frozen=True)
class RelativeAlgebroid:
    frame: tuple[str, ...]
    base: tuple[str, ...]
    fiber: tuple[str, ...]
    dtheta: tuple[DForm, ...]
    dbase: tuple[DForm, ...]
    level: int = 0
    jet_indep: tuple[str, ...] | None = None
    provenance: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self):
        names = list(self.frame) + list(self.base) + list(self.fiber)
        seen = set()
        for name in names:
            if name in seen:
                raise AlgebroidError(f"name {name!r} declared twice")
            seen.add(name)
        n = len(self.frame)
        if len(self.dtheta) != n or len(self.dbase) != len(self.base):
            raise AlgebroidError("one structure equation per frame covector and base variable")
        allowed = {sympy.Symbol(v) for v in self.base + self.fiber}
        for label, form, degree in self.equations():
            if form.n != n or form.degree != degree:
                raise AlgebroidError(f"D {label} must be a {degree}-form on a rank-{n} frame")
            extra = form.free_symbols() - allowed
            if extra:
                raise DomainError(f"D {label} mentions undeclared {sorted(s.name for s in extra)}")

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.base + self.fiber

    def equations(self):
        for name, form in zip(self.frame, self.dtheta):
            yield name, form, 2
        for name, form in zip(self.base, self.dbase):
            yield name, form, 1

    def structure_function(self, i: int, j: int, k: int) -> Expr:
        """c^i_jk (1-based), antisymmetric in j, k."""
        if j == k:
            return ZERO
        if j > k:
            return -self.structure_function(i, k, j)
        return simplify(-self.dtheta[i - 1].coefficient((j, k)))

    def anchor(self, mu: int, i: int) -> Expr:
        """F^mu_i (1-based)."""
        return self.dbase[mu - 1].coefficient((i,))

    def d_of(self, name: str) -> DForm:
        if name in self.frame:
            return self.dtheta[self.frame.index(name)]
        if name in self.base:
            return self.dbase[self.base.index(name)]
        raise AlgebroidError(f"{name!r} is not a frame covector or base variable")

    def with_(self, **changes) -> "RelativeAlgebroid":
        return replace(self, **changes)


# ---------------------------------------------------------------------------
# file format

_DECL = re.compile(r"^(frame|base|fiber)\b(.*)$")
_DEQ = re.compile(r"^d\s+([A-Za-z_][A-Za-z0-9_]*)\s*=(.*)$")
_META = re.compile(r"^#\s*(level|jet)\b(.*)$")
_NAME = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


def load_algebroid(text: str) -> RelativeAlgebroid:
    """Read the ``.alg`` format.

    ``# level N`` and ``# jet x y`` comments carry the prolongation level and
    the independent variables of jet-derived algebroids.
    """
    decls: dict[str, tuple[list[str], int]] = {}
    equations: dict[str, tuple[str, int]] = {}
    level = 0
    jet = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            meta = _META.match(line)
            if meta and meta.group(1) == "level":
                try:
                    level = int(meta.group(2))
                except ValueError:
                    raise AlgebroidFormatError("malformed level comment", lineno) from None
            elif meta:
                jet = tuple(meta.group(2).split())
            continue
        m = _DECL.match(line)
        if m:
            kind, rest = m.groups()
            if kind in decls:
                raise AlgebroidFormatError(f"duplicate '{kind}' declaration", lineno)
            names = rest.split()
            for name in names:
                if not _NAME.match(name):
                    raise AlgebroidFormatError(f"bad name {name!r}", lineno)
            decls[kind] = (names, lineno)
            continue
        m = _DEQ.match(line)
        if m:
            name, rhs = m.groups()
            if name in equations:
                raise AlgebroidFormatError(f"duplicate equation for d {name}", lineno)
            equations[name] = (rhs, lineno)
            continue
        raise AlgebroidFormatError(f"cannot read {line!r}", lineno)
    if "frame" not in decls:
        raise AlgebroidFormatError("missing 'frame' declaration")
    frame = decls["frame"][0]
    base = decls.get("base", ([], 0))[0]
    fiber = decls.get("fiber", ([], 0))[0]
    seen: dict[str, str] = {}
    for kind, names in (("frame", frame), ("base", base), ("fiber", fiber)):
        for name in names:
            if name in seen:
                raise AlgebroidFormatError(f"{name!r} declared twice ({seen[name]} and {kind})", decls[kind][1])
            if name in ("sin", "cos", "exp", "d"):
                raise AlgebroidFormatError(f"{name!r} is a reserved word", decls[kind][1])
            seen[name] = kind
    variables = base + fiber
    forms = {}
    for name, (rhs, lineno) in equations.items():
        if name not in frame and name not in base:
            what = "a fiber variable" if name in fiber else "undeclared"
            raise AlgebroidFormatError(f"d {name}: {name!r} is {what}", lineno)
        try:
            form = parse_form(rhs, variables, frame)
        except (ParseError, FrameError) as exc:
            raise AlgebroidFormatError(f"d {name}: {exc}", lineno) from exc
        want = 2 if name in frame else 1
        if form.is_zero() and form.degree == 0:
            form = DForm.zero(len(frame), want)
        if form.degree != want:
            raise AlgebroidFormatError(f"d {name} must be a {want}-form, got degree {form.degree}", lineno)
        forms[name] = form
    n = len(frame)
    return RelativeAlgebroid(
        frame=tuple(frame),
        base=tuple(base),
        fiber=tuple(fiber),
        dtheta=tuple(forms.get(t, DForm.zero(n, 2)) for t in frame),
        dbase=tuple(forms.get(x, DForm.zero(n, 1)) for x in base),
        level=level,
        jet_indep=jet,
    )


def dump_algebroid(a: RelativeAlgebroid) -> str:
    lines = []
    if a.level:
        lines.append(f"# level {a.level}")
    if a.jet_indep is not None:
        lines.append("# jet " + " ".join(a.jet_indep))
    lines.append("frame " + " ".join(a.frame))
    lines.append(("base " + " ".join(a.base)).rstrip())
    lines.append(("fiber " + " ".join(a.fiber)).rstrip())
    for label, form, _ in a.equations():
        if not form.is_zero():
            lines.append(f"d {label} = {form_text(form, a.frame)}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# the derivation


def _as_form(a: RelativeAlgebroid, alpha) -> DForm:
    if isinstance(alpha, DForm):
        if alpha.n != a.n:
            raise FrameError(f"form on rank {alpha.n}, algebroid has rank {a.n}")
        return alpha
    return DForm.scalar(a.n, alpha)


def _check_domain(alpha: DForm, allowed: set, what: str):
    extra = alpha.free_symbols() - allowed
    if extra:
        raise DomainError(f"coefficient mentions {sorted(s.name for s in extra)} ({what})")


def _function_terms(a: RelativeAlgebroid, f: Expr, lift: Mapping[str, DForm] | None) -> list:
    f = sympy.sympify(f)
    terms = []
    names = {s.name for s in f.free_symbols}
    sources = list(zip(a.base, a.dbase)) + (list(lift.items()) if lift else [])
    for x, dx in sources:
        if x in names:
            g = sympy.diff(f, sympy.Symbol(x))
            terms.extend((idx, g * c) for idx, c in dx.items())
    return terms


def derive_function(a: RelativeAlgebroid, f: Expr, lift: Mapping[str, DForm] | None = None) -> DForm:
    """Df = sum_mu (df/dx^mu) D x^mu  [+ sum_rho (df/dy^rho) lift[rho]]."""
    return DForm.build(a.n, 1, _function_terms(a, f, lift))


def _derive_monomial(a: RelativeAlgebroid, idx: tuple[int, ...]) -> DForm:
    out = DForm.zero(a.n, len(idx) + 1)
    for pos, i in enumerate(idx):
        left = DForm.basis(a.n, *idx[:pos]) if pos else DForm.scalar(a.n, ONE)
        right = DForm.basis(a.n, *idx[pos + 1 :]) if pos + 1 < len(idx) else DForm.scalar(a.n, ONE)
        piece = wedge(wedge(left, a.dtheta[i - 1]), right)
        out = out + (piece if pos % 2 == 0 else -piece)
    return out


def derive(a: RelativeAlgebroid, alpha, lift: Mapping[str, DForm] | None = None) -> DForm:
    """Apply D to a form whose coefficients live on the base.

    With ``lift`` (fiber variable -> 1-form) coefficients may also depend on
    the fiber; the lift supplies D of each fiber variable.
    """
    alpha = _as_form(a, alpha)
    allowed = {sympy.Symbol(v) for v in a.base}
    if lift is not None:
        allowed |= {sympy.Symbol(v) for v in a.fiber}
        for dy in lift.values():
            allowed |= dy.free_symbols()
    _check_domain(alpha, allowed, "derive expects base coefficients")
    if alpha.degree >= a.n:
        return DForm.zero(a.n, alpha.degree + 1)
    # collect every term first so each coefficient is simplified once
    terms = []
    for idx, f in alpha.items():
        terms.extend((j + idx, c) for j, c in _function_terms(a, f, lift))
        if idx:
            terms.extend((k, f * c) for k, c in _derive_monomial(a, idx).items())
    return DForm.build(a.n, alpha.degree + 1, terms)


# ---------------------------------------------------------------------------
# sections, bracket, anchor


def frame_section(a: RelativeAlgebroid, i: int) -> tuple[Expr, ...]:
    """The frame element e_i (1-based) as a section."""
    return tuple(ONE if k == i else ZERO for k in range(1, a.n + 1))


def _check_section(a: RelativeAlgebroid, s: Sequence[Expr]):
    if len(s) != a.n:
        raise AlgebroidError(f"section needs {a.n} coefficients, got {len(s)}")
    allowed = {sympy.Symbol(v) for v in a.base}
    for c in s:
        extra = sympy.sympify(c).free_symbols - allowed
        if extra:
            raise DomainError(f"section coefficient mentions {sorted(x.name for x in extra)}")


def anchor_apply(a: RelativeAlgebroid, s: Sequence[Expr], f: Expr) -> Expr:
    """rho(s) f = sum_{mu,i} s_i F^mu_i df/dx^mu."""
    _check_section(a, s)
    f = sympy.sympify(f)
    extra = f.free_symbols - {sympy.Symbol(v) for v in a.base}
    if extra:
        raise DomainError(f"function mentions {sorted(x.name for x in extra)}")
    total = ZERO
    for mu, x in enumerate(a.base, start=1):
        g = sympy.diff(f, sympy.Symbol(x))
        if g == 0:
            continue
        for i in range(1, a.n + 1):
            total += s[i - 1] * a.anchor(mu, i) * g
    return simplify(total)


def bracket(a: RelativeAlgebroid, s: Sequence[Expr], t: Sequence[Expr]) -> tuple[Expr, ...]:
    """[s, t] = s^i t^j c^k_ij e_k + rho(s)(t^k) e_k - rho(t)(s^k) e_k."""
    _check_section(a, s)
    _check_section(a, t)
    n = a.n
    out = []
    for k in range(1, n + 1):
        total = ZERO
        for i in range(1, n + 1):
            for j in range(1, n + 1):
                if i != j and s[i - 1] != 0 and t[j - 1] != 0:
                    total += s[i - 1] * t[j - 1] * a.structure_function(k, i, j)
        total += anchor_apply(a, s, t[k - 1]) - anchor_apply(a, t, s[k - 1])
        out.append(simplify(total))
    return tuple(out)


# ---------------------------------------------------------------------------
# classifying data


def component_labels(n: int, base: Sequence[str]) -> list[tuple]:
    """Column layout of derivation components: bracket parts (i, (j, k)) then
    symbol parts (x, i)."""
    labels: list[tuple] = []
    for i in range(1, n + 1):
        for jk in multi_indices(n, 2):
            labels.append(("c", i, jk))
    for x in base:
        for i in range(1, n + 1):
            labels.append(("F", x, i))
    return labels


def structure_components(a: RelativeAlgebroid) -> list[Expr]:
    values = []
    for label in component_labels(a.n, a.base):
        if label[0] == "c":
            _, i, (j, k) = label
            values.append(a.structure_function(i, j, k))
        else:
            _, x, i = label
            values.append(a.anchor(a.base.index(x) + 1, i))
    return values


def classifying_data(a: RelativeAlgebroid) -> list[list[Expr]]:
    """Jacobian of (c, F) with respect to the fiber variables: one row per
    component, one column per fiber variable."""
    return [[differentiate(v, y) for y in a.fiber] for v in structure_components(a)]


def is_standard(a: RelativeAlgebroid, seed: int = 0) -> str:
    """"yes" when the classifying Jacobian has full generic column rank, "no"
    when it does not, "undetermined" when the probes disagree."""
    if not a.fiber:
        return "yes"
    rows = classifying_data(a)
    r = _linalg.generic_rank(rows, a.variables, seed)
    if not r.stable:
        return "undetermined"
    return "yes" if r.value == len(a.fiber) else "no"


# ---------------------------------------------------------------------------
# restriction and reduction


def restrict(a: RelativeAlgebroid, equations: Iterable[tuple[str, Expr]], seed: int = 0) -> RelativeAlgebroid:
    """Restrict to the locus ``var = expr`` (solved form).

    Eliminating a base variable requires the locus to be invariant: the
    anchor must stay tangent to it, checked coefficientwise on
    D x - D(expr).  Fiber variables may be fixed freely.
    """
    bindings: dict[str, Expr] = {}
    for var, value in equations:
        if var not in a.variables:
            raise AlgebroidError(f"cannot eliminate {var!r}: not a base or fiber variable")
        if var in bindings:
            raise AlgebroidError(f"{var!r} solved twice")
        bindings[var] = simplify(value)
    solved = {sympy.Symbol(v) for v in bindings}
    allowed = {sympy.Symbol(v) for v in a.variables}
    base_syms = {sympy.Symbol(v) for v in a.base}
    for var, value in bindings.items():
        syms = value.free_symbols
        if syms - allowed:
            raise AlgebroidError(f"{var} = {to_text(value)} mentions unknown variables")
        if syms & solved:
            raise AlgebroidError(f"{var} = {to_text(value)}: solved variables may not appear on right-hand sides")
        if var in a.base and syms - base_syms:
            raise AlgebroidError(f"{var} = {to_text(value)}: a base variable can only be solved in terms of base variables")

    def on_locus(form: DForm) -> DForm:
        return form.map(lambda c: substitute(c, bindings))

    for var, value in bindings.items():
        if var not in a.base:
            continue
        residual = on_locus(a.d_of(var) - derive(a, value))
        for idx, c in residual.items():
            verdict = is_zero(c, seed)
            if verdict is not Verdict.ZERO:
                raise InvarianceError(
                    f"locus {var} = {to_text(value)} is not invariant: "
                    f"D {var} - D({to_text(value)}) has {form_text(residual, a.frame)} on it"
                )
    keep_base = tuple(x for x in a.base if x not in bindings)
    keep_fiber = tuple(y for y in a.fiber if y not in bindings)
    note = "restricted by " + ", ".join(f"{k} = {to_text(v)}" for k, v in bindings.items())
    return RelativeAlgebroid(
        frame=a.frame,
        base=keep_base,
        fiber=keep_fiber,
        dtheta=tuple(on_locus(f) for f in a.dtheta),
        dbase=tuple(on_locus(a.dbase[a.base.index(x)]) for x in keep_base),
        level=a.level,
        jet_indep=a.jet_indep,
        provenance=a.provenance + (note,),
    )


def _unused_fiber(a: RelativeAlgebroid) -> list[str]:
    used = set()
    for _, form, _ in a.equations():
        used |= {s.name for s in form.free_symbols()}
    return [y for y in a.fiber if y not in used]


def systatic_directions(a: RelativeAlgebroid, seed: int = 0) -> list[dict[str, float]]:
    """Basis of the kernel of the classifying Jacobian at a generic point."""
    if not a.fiber:
        return []
    rows = classifying_data(a)
    point = _linalg.sample_points(a.variables, seed, 1)[0]
    m = _linalg.evaluate(rows, point) if rows else np.zeros((0, len(a.fiber)))
    kernel = _linalg.null_space(m, len(a.fiber))
    unused = _unused_fiber(a)
    if kernel.shape[1] == len(unused):
        # report the aligned basis exactly
        return [{y: 1.0} for y in unused]
    basis = []
    for col in kernel.T:
        basis.append({y: float(v) for y, v in zip(a.fiber, col) if abs(v) > 1e-12})
    return basis


def reduce(a: RelativeAlgebroid, seed: int = 0) -> RelativeAlgebroid:
    """Drop fiber variables that no structure function depends on."""
    unused = _unused_fiber(a)
    kernel = systatic_directions(a, seed)
    if len(kernel) != len(unused):
        raise ReductionError(
            f"systatic directions span {len(kernel)} dimensions but only "
            f"{len(unused)} fiber variables are unused; the kernel is not coordinate-aligned"
        )
    if not unused:
        return a
    return a.with_(
        fiber=tuple(y for y in a.fiber if y not in unused),
        provenance=a.provenance + ("reduced by dropping " + ", ".join(unused),),
    )


def direct_square(a: RelativeAlgebroid) -> dict[str, DForm]:
    """D(D alpha) for every frame covector and base variable.

    Only defined when D alpha has base coefficients, i.e. no fiber variable
    occurs in the structure equations.
    """
    out = {}
    for label, form, _ in a.equations():
        out[label] = derive(a, form)
    return out
