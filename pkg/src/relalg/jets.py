"""Jet spaces, total derivatives and the PDE front end.

A PDE is given in solved form: some jet coordinates are expressed through
the others (the parametric coordinates).  ``pde_to_algebroid`` turns it into
a relative algebroid with a flat frame dx^1..dx^n, and ``pde_prolong_compare``
checks that prolonging on the jet side and on the algebroid side agree.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import sympy

from ._jetnames import jet_name, parse_jet_name
from .algebroid import RelativeAlgebroid
from .expr import ZERO, Expr, ParseError, Verdict, is_zero, parse_expr, simplify, substitute, to_text
from .exterior import DForm, form_text, frame_names
from .prolong import ProlongationStep, solve_prolongation

__all__ = [
    "JetError",
    "OrderOverflow",
    "PdeFormatError",
    "JetSystem",
    "load_pde",
    "dump_pde",
    "total_derivative",
    "pde_to_algebroid",
    "JetProlongation",
    "prolong_jet_system",
    "CompareLevel",
    "CompareReport",
    "pde_prolong_compare",
]


class JetError(ValueError):
    pass


class OrderOverflow(JetError):
    def __init__(self, coordinate: str, order: int):
        self.coordinate = coordinate
        super().__init__(f"total derivative needs {coordinate}, beyond order {order}")


class PdeFormatError(JetError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def _multis(n: int, order: int):
    """Sorted multi-indices of exactly ``order`` entries from range(n)."""
    return itertools.combinations_with_replacement(range(n), order)


@dataclass(frozen=True)
class JetSystem:
    indep: tuple[str, ...]
    dep: tuple[str, ...]
    order: int
    solved: dict = field(default_factory=dict)  # coordinate name -> Expr

    def __post_init__(self):
        if self.order < 1:
            raise JetError("order must be at least 1")
        if not self.indep or not self.dep:
            raise JetError("need at least one independent and one dependent variable")
        for name in self.dep:
            if "_" in name:
                raise JetError(f"dependent variable {name!r} may not contain '_'")
        names = set(self.coordinates)
        if len(names) != len(self.coordinates) or names & set(self.indep):
            raise JetError("jet coordinate names are ambiguous; rename the variables")
        for lhs, rhs in self.solved.items():
            if lhs not in names:
                raise JetError(f"{lhs} is not a jet coordinate of order <= {self.order}")
            bad = {s.name for s in rhs.free_symbols} & set(self.solved)
            if bad:
                raise JetError(f"solved coordinates {sorted(bad)} appear on the right-hand side of {lhs}")
            unknown = {s.name for s in rhs.free_symbols} - names - set(self.indep)
            if unknown:
                raise JetError(f"{lhs} = ...: unknown symbols {sorted(unknown)}")

    @property
    def n(self) -> int:
        return len(self.indep)

    def coordinate(self, dep: str, multi: Sequence[int]) -> str:
        return jet_name(dep, multi, self.indep)

    def of_order(self, k: int) -> list[str]:
        return [self.coordinate(u, m) for u in self.dep for m in _multis(self.n, k)]

    @cached_property
    def coordinates(self) -> tuple[str, ...]:
        return tuple(c for k in range(self.order + 1) for c in self.of_order(k))

    def order_of(self, name: str) -> int:
        return len(parse_jet_name(name, self.indep)[1])

    def parametric(self, k: int | None = None) -> list[str]:
        pool = self.coordinates if k is None else self.of_order(k)
        return [c for c in pool if c not in self.solved]

    def variable_names(self) -> list[str]:
        return list(self.indep) + list(self.coordinates)


# ---------------------------------------------------------------------------
# .pde files

_LINE = re.compile(r"^(indep|dep|order|eq)\b(.*)$")


def load_pde(text: str) -> JetSystem:
    indep = dep = order = None
    eqs = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise PdeFormatError(f"cannot read {line!r}", lineno)
        kind, rest = m.group(1), m.group(2).strip()
        if kind == "indep":
            indep = tuple(rest.split())
        elif kind == "dep":
            dep = tuple(rest.split())
        elif kind == "order":
            try:
                order = int(rest)
            except ValueError:
                raise PdeFormatError(f"order must be an integer, got {rest!r}", lineno) from None
        else:
            if rest.count("=") != 1:
                raise PdeFormatError("equations must read 'eq coordinate = expression'", lineno)
            lhs, rhs = (s.strip() for s in rest.split("="))
            eqs.append((lhs, rhs, lineno))
    if indep is None or dep is None or order is None:
        raise PdeFormatError("need 'indep', 'dep' and 'order' lines")
    try:
        skeleton = JetSystem(indep, dep, order)
    except JetError as exc:
        raise PdeFormatError(str(exc)) from exc
    names = skeleton.variable_names()
    solved = {}
    top = set(skeleton.of_order(order))
    for lhs, rhs, lineno in eqs:
        if lhs not in top:
            raise PdeFormatError(f"left-hand side {lhs!r} is not a jet coordinate of order {order}; only solved form is accepted", lineno)
        if lhs in solved:
            raise PdeFormatError(f"{lhs} solved twice", lineno)
        try:
            solved[lhs] = parse_expr(rhs, names)
        except ParseError as exc:
            raise PdeFormatError(f"{lhs}: {exc}", lineno) from exc
    for lhs, rhs in solved.items():
        bad = sorted(s.name for s in rhs.free_symbols if s.name in solved)
        if bad:
            raise PdeFormatError(f"{lhs} = {to_text(rhs)} uses solved coordinates {bad}; substitute them first")
    return JetSystem(indep, dep, order, solved)


def dump_pde(j: JetSystem) -> str:
    lines = ["indep " + " ".join(j.indep), "dep " + " ".join(j.dep), f"order {j.order}"]
    lines += [f"eq {lhs} = {to_text(rhs)}" for lhs, rhs in j.solved.items()]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# total derivatives


def total_derivative(j: JetSystem, f, index: int, max_order: int | None = None) -> Expr:
    """D_index f (``index`` 0-based), with solved coordinates substituted.

    Coordinates up to ``max_order`` (default: the system's order) may be
    produced; anything higher raises :class:`OrderOverflow`.
    """
    top = j.order if max_order is None else max_order
    f = substitute(sympy.sympify(f), j.solved)
    x = j.indep[index]
    out = sympy.diff(f, sympy.Symbol(x))
    for s in f.free_symbols:
        if s.name in j.indep:
            continue
        dep, multi = parse_jet_name(s.name, j.indep)
        if dep not in j.dep:
            raise JetError(f"{s.name} is not a jet coordinate")
        target = jet_name(dep, multi + (index,), j.indep)
        if len(multi) + 1 > top:
            raise OrderOverflow(target, top)
        value = j.solved.get(target, sympy.Symbol(target))
        out += sympy.diff(f, s) * value
    return simplify(out)


# ---------------------------------------------------------------------------
# the algebroid of a PDE


def pde_to_algebroid(j: JetSystem) -> RelativeAlgebroid:
    frame = tuple(frame_names(j.n))
    clash = set(frame) & set(j.variable_names())
    if clash:
        raise JetError(f"variable names {sorted(clash)} collide with the frame")
    n = j.n
    lower = [c for k in range(j.order) for c in j.parametric(k)]
    base = list(j.indep) + lower
    fiber = j.parametric(j.order)
    dbase = [DForm.basis(n, i + 1) for i in range(n)]
    for c in lower:
        terms = [((i + 1,), total_derivative(j, sympy.Symbol(c), i)) for i in range(n)]
        dbase.append(DForm.build(n, 1, terms))
    return RelativeAlgebroid(
        frame=frame,
        base=tuple(base),
        fiber=tuple(fiber),
        dtheta=tuple(DForm.zero(n, 2) for _ in range(n)),
        dbase=tuple(dbase),
        level=0,
        jet_indep=tuple(j.indep),
        provenance=("pde",),
    )


# ---------------------------------------------------------------------------
# jet-side prolongation


@dataclass
class JetProlongation:
    system: JetSystem  # the prolonged system, or the input when obstructed
    new_solved: dict
    parametric: list[str]  # parametric coordinates of the new top order
    obstructions: list[Expr]


def _reachable(j: JetSystem) -> list[str]:
    """Top+1 coordinates one derivative away from a parametric top-order
    coordinate, in (coordinate, direction) order."""
    out = []
    for c in j.parametric(j.order):
        dep, multi = parse_jet_name(c, j.indep)
        for i in range(j.n):
            name = jet_name(dep, multi + (i,), j.indep)
            if name not in out:
                out.append(name)
    return out


def prolong_jet_system(j: JetSystem) -> JetProlongation:
    """Differentiate every equation once and solve for the new top order.

    Solved by reduced row echelon form over the new coordinates; the
    coordinates not reachable from a parametric one are eliminated first, so
    the parametric ones that survive are the last in algebroid order.
    """
    k = j.order + 1
    reachable = _reachable(j)
    unknowns = [c for c in j.of_order(k) if c not in reachable] + reachable
    syms = [sympy.Symbol(c) for c in unknowns]
    rows = []
    for lhs, rhs in j.solved.items():
        dep, multi = parse_jet_name(lhs, j.indep)
        for i in range(j.n):
            target = sympy.Symbol(jet_name(dep, multi + (i,), j.indep))
            d_rhs = total_derivative(j, rhs, i, max_order=k)
            # derivatives of lower-order equations may land on solved coordinates
            lhs_value = j.solved.get(target.name, target)
            rows.append(sympy.expand(lhs_value - d_rhs))
    if not rows:
        return JetProlongation(JetSystem(j.indep, j.dep, k, dict(j.solved)), {}, list(unknowns), [])
    matrix, rhs = sympy.linear_eq_to_matrix(rows, syms)
    aug = matrix.row_join(rhs).applyfunc(simplify)
    reduced, pivots = aug.rref(simplify=simplify)
    obstructions = []
    solved = {}
    for r in range(reduced.rows):
        lead = [c for c in range(len(syms)) if reduced[r, c] != 0]
        residual = simplify(reduced[r, -1])
        if not lead:
            if residual != 0 and is_zero(residual) is not Verdict.ZERO:
                obstructions.append(residual)
            continue
        p = lead[0]
        value = residual - sum((reduced[r, c] * syms[c] for c in lead[1:]), ZERO)
        solved[unknowns[p]] = simplify(value / reduced[r, p])
    if obstructions:
        return JetProlongation(j, solved, [], obstructions)
    merged = dict(j.solved)
    merged.update(solved)
    out = JetSystem(j.indep, j.dep, k, merged)
    return JetProlongation(out, solved, out.parametric(k), [])


# ---------------------------------------------------------------------------
# comparison


@dataclass
class CompareLevel:
    level: int
    algebroid_new_vars: list[str]
    jet_new_vars: list[str]
    constraints: dict  # reachable coordinate -> jet-side value (text)
    mismatches: list[str]
    obstructed_algebroid: bool
    obstructed_jet: bool
    parametric_dependent: int  # parametric dependent coordinates, all orders

    @property
    def match(self) -> bool:
        return not self.mismatches

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "algebroid_new_vars": self.algebroid_new_vars,
            "jet_new_vars": self.jet_new_vars,
            "constraints": self.constraints,
            "mismatches": self.mismatches,
            "obstructed": {"algebroid": self.obstructed_algebroid, "jet": self.obstructed_jet},
            "parametric_dependent": self.parametric_dependent,
            "match": self.match,
        }


@dataclass
class CompareReport:
    levels: list[CompareLevel]
    parametric_dependent: list[int]  # level 0, 1, ...

    @property
    def match(self) -> bool:
        return all(lv.match for lv in self.levels)

    def as_dict(self) -> dict:
        return {
            "levels": [lv.as_dict() for lv in self.levels],
            "parametric_dependent": self.parametric_dependent,
            "match": self.match,
        }


def _count_parametric_dependent(j: JetSystem) -> int:
    return len(j.parametric())


def _algebroid_diffs(left: RelativeAlgebroid, right: RelativeAlgebroid, seed: int) -> list[str]:
    out = []
    if set(left.base) != set(right.base) or set(left.fiber) != set(right.fiber):
        out.append(f"variables differ: base {left.base} / {right.base}, fiber {left.fiber} / {right.fiber}")
        return out
    for x in left.base:
        diff = left.d_of(x) - right.d_of(x)
        for _, c in diff.items():
            if is_zero(c, seed) is not Verdict.ZERO:
                out.append(f"D {x}: {form_text(left.d_of(x), left.frame)} vs {form_text(right.d_of(x), right.frame)}")
                break
    return out


def _compare_step(step: ProlongationStep, jp: JetProlongation, j: JetSystem, level: int, seed: int) -> CompareLevel:
    mismatches = []
    alg_new = list(step.new_vars)
    jet_new = list(jp.parametric)
    if step.obstructed or jp.obstructions:
        if step.obstructed != bool(jp.obstructions):
            mismatches.append(f"obstruction on one side only (algebroid {step.obstructed}, jet {bool(jp.obstructions)})")
    elif sorted(alg_new) != sorted(jet_new):
        mismatches.append(f"new variables differ: algebroid {alg_new}, jet {jet_new}")
    constraints = {}
    if not mismatches and not step.obstructed:
        for unknown, (y, i) in step.system.slots.items():
            dep, multi = parse_jet_name(y, j.indep)
            coord = jet_name(dep, multi + (i - 1,), j.indep)
            jet_value = jp.new_solved.get(coord, sympy.Symbol(coord))
            if coord in jp.new_solved:
                constraints[coord] = to_text(jet_value)
            if is_zero(step.solution[unknown] - jet_value, seed) is not Verdict.ZERO:
                mismatches.append(f"{coord}: algebroid {to_text(step.solution[unknown])}, jet {to_text(jet_value)}")
        mismatches += _algebroid_diffs(step.prolonged, pde_to_algebroid(jp.system), seed)
    return CompareLevel(
        level=level,
        algebroid_new_vars=alg_new,
        jet_new_vars=jet_new,
        constraints=dict(sorted(constraints.items())),
        mismatches=mismatches,
        obstructed_algebroid=step.obstructed,
        obstructed_jet=bool(jp.obstructions),
        parametric_dependent=_count_parametric_dependent(jp.system),
    )


def pde_prolong_compare(j: JetSystem, depth: int, seed: int = 0) -> CompareReport:
    """Prolong ``depth`` times on both sides and compare level by level."""
    if depth < 1:
        raise JetError("depth must be at least 1")
    algebroid = pde_to_algebroid(j)
    levels = []
    counts = [_count_parametric_dependent(j)]
    for level in range(1, depth + 1):
        step = solve_prolongation(algebroid, seed)
        jp = prolong_jet_system(j)
        lv = _compare_step(step, jp, j, level, seed)
        levels.append(lv)
        if not lv.match or step.obstructed or jp.obstructions:
            break
        counts.append(lv.parametric_dependent)
        algebroid, j = step.prolonged, jp.system
    return CompareReport(levels, counts)
