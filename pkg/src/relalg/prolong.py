"""Torsion systems, prolongation, curvature and prolongation towers.

A lift of D extends it to the fiber variables by ``D y^rho = u^rho_i theta^i``
with unknown coefficients u.  The torsion of the lift, D~(D alpha) for every
frame covector and base variable alpha, is affine-linear in u; solving it
gives the first prolongation, whose base is the old base plus fiber and whose
new fiber variables parametrize the kernel of the linear part.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import sympy

from ._jetnames import jet_name, parse_jet_name
from .algebroid import RelativeAlgebroid, derive
from .expr import ONE, ZERO, EvaluationError, Expr, Verdict, eval_numeric, is_zero, probe_point, simplify, to_text, total_degree
from .exterior import DForm, form_text, multi_indices, sort_sign
from .tableau import cartan_search, tableau_map

__all__ = [
    "LinearEquation",
    "TorsionSystem",
    "Obstruction",
    "ProlongationStep",
    "LevelReport",
    "TowerReport",
    "UndeterminedPivot",
    "ProlongError",
    "torsion_system",
    "solve_prolongation",
    "curvature",
    "prolongation_tower",
    "lift_torsion",
    "eliminate",
    "curvature_closure_residual",
]


class ProlongError(ValueError):
    pass


class UndeterminedPivot(ProlongError):
    def __init__(self, expr: Expr, column: str):
        self.expr = expr
        self.column = column
        super().__init__(f"cannot decide whether pivot {to_text(expr)} (column {column}) vanishes")


@dataclass
class LinearEquation:
    """sum(coeffs[u] * u) + rhs = 0."""

    coeffs: dict[str, Expr]
    rhs: Expr
    source: str

    def text(self) -> str:
        lhs = sum((c * sympy.Symbol(u) for u, c in self.coeffs.items()), ZERO) + self.rhs
        return f"{to_text(simplify(lhs))} = 0"


@dataclass
class TorsionSystem:
    algebroid: RelativeAlgebroid
    unknowns: list[str]
    slots: dict[str, tuple[str, int]]  # unknown -> (fiber variable, frame index)
    lift: dict[str, DForm]
    torsion: dict[str, DForm]  # label -> D~(D label)
    equations: list[LinearEquation]


@dataclass
class Obstruction:
    expr: Expr
    source: str

    def as_dict(self) -> dict:
        return {"equation": f"{to_text(self.expr)} = 0", "source": self.source}


@dataclass
class ProlongationStep:
    algebroid: RelativeAlgebroid
    system: TorsionSystem
    solution: dict[str, Expr]  # every unknown in terms of new variables
    constraints: dict[str, Expr]  # pivot unknowns, solved
    new_vars: list[str]
    lift: dict[str, DForm]  # fiber variable -> D^(1) y
    obstructions: list[Obstruction]
    obstruction_forms: dict[str, DForm]
    prolonged: RelativeAlgebroid
    warnings: list[str] = field(default_factory=list)

    @property
    def obstructed(self) -> bool:
        return bool(self.obstructions)

    def as_dict(self) -> dict:
        frame = self.algebroid.frame
        return {
            "new_vars": list(self.new_vars),
            "lift": {y: form_text(f, frame) for y, f in self.lift.items()},
            "constraints": {u: to_text(v) for u, v in self.constraints.items()},
            "obstructions": [o.as_dict() for o in self.obstructions],
            "obstruction_forms": {k: form_text(f, frame) for k, f in self.obstruction_forms.items()},
            "warnings": list(self.warnings),
        }


# ---------------------------------------------------------------------------
# torsion


def _lift_names(a: RelativeAlgebroid) -> dict[tuple[str, int], str]:
    taken = set(a.frame) | set(a.base) | set(a.fiber)
    names = {}
    for y in a.fiber:
        for i in range(1, a.n + 1):
            if a.jet_indep is not None:
                dep, multi = parse_jet_name(y, a.jet_indep)
                name = jet_name(dep, multi + (i - 1,), a.jet_indep)
            else:
                name = f"{y}_{i}"
                while name in taken:
                    name += "_"
            names[(y, i)] = name
    if a.jet_indep is None and len(set(names.values())) != len(names):
        raise ProlongError("lift names collide")
    return names


def lift_torsion(a: RelativeAlgebroid, lift: Mapping[str, DForm]) -> dict[str, DForm]:
    """D~(D alpha) for every frame covector and base variable alpha."""
    return {label: derive(a, form, lift) for label, form, _ in a.equations()}


def torsion_system(a: RelativeAlgebroid) -> TorsionSystem:
    names = _lift_names(a)
    unknowns: list[str] = []
    slots: dict[str, tuple[str, int]] = {}
    symbols: dict[tuple[str, int], sympy.Symbol] = {}
    for y in a.fiber:
        for i in range(1, a.n + 1):
            name = names[(y, i)]
            # jet names may coincide (u_xy from u_x and from u_y): keep both slots apart
            key = name if name not in slots else f"{name}@{y}"
            unknowns.append(key)
            slots[key] = (y, i)
            symbols[(y, i)] = sympy.Symbol(key)
    lift = {y: DForm.build(a.n, 1, [((i,), symbols[(y, i)]) for i in range(1, a.n + 1)]) for y in a.fiber}
    torsion = lift_torsion(a, lift)
    usyms = [sympy.Symbol(u) for u in unknowns]
    equations = []
    for label, form in torsion.items():
        for idx in multi_indices(a.n, form.degree):
            e = form.coefficient(idx)
            if e == 0:
                continue
            coeffs = {}
            for u, s in zip(unknowns, usyms):
                c = simplify(sympy.diff(e, s))
                if c != 0:
                    coeffs[u] = c
            rhs = simplify(e.xreplace({s: 0 for s in usyms}))
            check = simplify(e - sum((c * sympy.Symbol(u) for u, c in coeffs.items()), ZERO) - rhs)
            if check != 0:
                raise AssertionError(f"torsion equation is not affine in the lift: {to_text(e)}")
            where = "".join(str(i) for i in idx)
            equations.append(LinearEquation(coeffs, rhs, f"D(d {label})[{where}]"))
    return TorsionSystem(a, unknowns, slots, lift, torsion, equations)


# ---------------------------------------------------------------------------
# elimination


def _primitive(row: dict, rhs: Expr) -> tuple[dict, Expr]:
    """Divide a row by the polynomial gcd of its entries."""
    entries = [v for v in row.values()] + ([rhs] if rhs != 0 else [])
    if not entries or any(sympy.fraction(e)[1] != 1 for e in entries):
        return row, rhs
    g = sympy.gcd_list(entries) if len(entries) > 1 else entries[0]
    if g == 0 or g.is_Number:
        num = [e for e in entries if e.is_Number]
        if g.is_Number and g not in (0, 1) and len(num) == len(entries):
            return {k: simplify(v / g) for k, v in row.items()}, simplify(rhs / g)
        return row, rhs
    return {k: simplify(v / g) for k, v in row.items()}, simplify(rhs / g)


@dataclass
class Elimination:
    pivots: list[tuple[str, dict, Expr, str]]  # (column, row, rhs, source)
    free: list[str]
    inconsistent: list[tuple[Expr, str]]
    warnings: list[str]


def eliminate(columns: Sequence[str], equations: Sequence[LinearEquation], seed: int = 0) -> Elimination:
    """Fraction-free forward elimination, one column at a time.

    Pivot preference: constant entries, then the lowest total degree, then
    the earliest row.
    """
    rows = [(dict(eq.coeffs), eq.rhs, eq.source) for eq in equations]
    pivots, free, warnings = [], [], []
    for col in columns:
        best, best_key = None, None
        undecided = None
        for k, (row, rhs, src) in enumerate(rows):
            c = row.get(col, ZERO)
            if c == 0:
                continue
            verdict = is_zero(c, seed)
            if verdict is Verdict.UNDETERMINED:
                undecided = c
                warnings.append(f"coefficient {to_text(c)} of {col} in {src} is numerically zero at all probes")
                continue
            if verdict is Verdict.ZERO:
                continue
            key = (0 if c.is_Number else 1, total_degree(c), k)
            if best_key is None or key < best_key:
                best, best_key = k, key
        if best is None:
            if undecided is not None:
                raise UndeterminedPivot(undecided, col)
            free.append(col)
            continue
        prow, prhs, psrc = rows.pop(best)
        p = prow[col]
        if not p.is_Number:
            warnings.append(f"pivot {to_text(p)} for {col} ({psrc}) assumed nonzero")
        new_rows = []
        for row, rhs, src in rows:
            a = row.get(col, ZERO)
            if a == 0:
                new_rows.append((row, rhs, src))
                continue
            keys = set(row) | set(prow)
            combined = {}
            for key in keys:
                v = simplify(p * row.get(key, ZERO) - a * prow.get(key, ZERO))
                if v != 0:
                    combined[key] = v
            combined.pop(col, None)
            new_rhs = simplify(p * rhs - a * prhs)
            combined, new_rhs = _primitive(combined, new_rhs)
            new_rows.append((combined, new_rhs, src))
        rows = new_rows
        pivots.append((col, prow, prhs, psrc))
    inconsistent = []
    for row, rhs, src in rows:
        # all columns have been eliminated from these rows
        verdict = is_zero(rhs, seed)
        if verdict is Verdict.ZERO:
            warnings.append(f"row {src} reduced to 0 = 0")
        else:
            if verdict is Verdict.UNDETERMINED:
                warnings.append(f"residual {to_text(rhs)} from {src} could not be decided; kept as an obstruction")
            inconsistent.append((rhs, src))
    return Elimination(pivots, free, inconsistent, warnings)


def _back_substitute(elim: Elimination) -> dict[str, dict]:
    """Each column as an affine combination {None: constant, free column: coeff}."""
    values: dict[str, dict] = {f: {f: ONE} for f in elim.free}
    for col, row, rhs, _ in reversed(elim.pivots):
        p = row[col]
        acc: dict = {None: -rhs}
        for other, a in row.items():
            if other == col:
                continue
            for key, v in values[other].items():
                acc[key] = acc.get(key, ZERO) - a * v
        values[col] = {k: simplify(v / p) for k, v in acc.items()}
        values[col] = {k: v for k, v in values[col].items() if v != 0}
    return values


def _normalize_kernel(vec: dict[str, Expr], free_col: str) -> dict[str, Expr]:
    """Clear denominators and common factors; make the free entry's leading
    coefficient positive."""
    dens = [sympy.fraction(v)[1] for v in vec.values()]
    l = sympy.lcm_list(dens) if len(dens) > 1 else dens[0]
    scaled = {k: simplify(v * l) for k, v in vec.items()}
    nums = list(scaled.values())
    g = sympy.gcd_list(nums) if len(nums) > 1 else nums[0]
    if g != 0:
        scaled = {k: simplify(v / g) for k, v in scaled.items()}
    lead = scaled[free_col]
    num = sympy.fraction(lead)[0]
    coeff = sympy.Poly(num, *sorted(num.free_symbols | num.atoms(sympy.Function), key=sympy.default_sort_key)).LC() if not num.is_Number else num
    if coeff < 0:
        scaled = {k: -v for k, v in scaled.items()}
    return scaled


def _orthogonal_particular(u0: dict[str, Expr], kernel: list[dict[str, Expr]], columns: Sequence[str]) -> dict[str, Expr]:
    """Project the particular solution orthogonally to the kernel."""
    b = [simplify(sum((k.get(c, ZERO) * u0.get(c, ZERO) for c in columns), ZERO)) for k in kernel]
    if all(v == 0 for v in b):
        return u0
    g = sympy.Matrix(len(kernel), len(kernel), lambda i, j: simplify(sum((kernel[i].get(c, ZERO) * kernel[j].get(c, ZERO) for c in columns), ZERO)))
    y = g.LUsolve(sympy.Matrix(b))
    y = [simplify(v) for v in y]
    out = {}
    for c in columns:
        v = u0.get(c, ZERO) - sum((y[k] * kernel[k].get(c, ZERO) for k in range(len(kernel))), ZERO)
        v = simplify(v)
        if v != 0:
            out[c] = v
    return out


# ---------------------------------------------------------------------------
# prolongation


def _new_var_name(a: RelativeAlgebroid, system: TorsionSystem, col: str, index: int, count: int, prefix: str | None) -> str:
    level = a.level + 1
    if a.jet_indep is not None:
        return col.split("@")[0]
    if prefix:
        return f"{prefix}{level}" if count == 1 else f"{prefix}{level}_{index}"
    return f"v{level}_{index}"


PARTICULAR = ("orthogonal", "standard")


def solve_prolongation(
    a: RelativeAlgebroid, seed: int = 0, prefix: str | None = None, particular: str = "orthogonal"
) -> ProlongationStep:
    """First prolongation of ``a``.

    For jet-derived algebroids the free lift coefficients are kept as they
    are, so each new variable is a jet coordinate.  Otherwise the kernel
    vectors are made primitive, and with ``particular="orthogonal"`` the
    particular solution is projected orthogonally to them; "standard" keeps
    the one with all free coefficients zero (cheaper on rational lifts).
    """
    if particular not in PARTICULAR:
        raise ProlongError(f"particular must be one of {PARTICULAR}")
    system = torsion_system(a)
    elim = eliminate(system.unknowns, system.equations, seed)
    values = _back_substitute(elim)
    jet_mode = a.jet_indep is not None
    free = elim.free
    kernel = []
    for f in free:
        vec = {c: values[c][f] for c in system.unknowns if f in values[c]}
        kernel.append(vec if jet_mode else _normalize_kernel(vec, f))
    u0 = {c: values[c][None] for c in system.unknowns if None in values[c]}
    if not jet_mode and kernel and particular == "orthogonal":
        u0 = _orthogonal_particular(u0, kernel, system.unknowns)
    new_vars = [_new_var_name(a, system, f, k + 1, len(free), prefix) for k, f in enumerate(free)]
    taken = set(a.frame) | set(a.variables)
    clash = [v for v in new_vars if v in taken]
    if clash or len(set(new_vars)) != len(new_vars):
        raise ProlongError(f"new variable names clash: {clash or new_vars}")
    vsyms = [sympy.Symbol(v) for v in new_vars]
    solution = {}
    for c in system.unknowns:
        e = u0.get(c, ZERO) + sum((s * k.get(c, ZERO) for s, k in zip(vsyms, kernel)), ZERO)
        solution[c] = simplify(e)
    constraints = {col.split("@")[0]: solution[col] for col, _, _, _ in elim.pivots}
    if jet_mode:
        # u_xy solved as u_xy only restates the symmetry of mixed partials
        constraints = {k: v for k, v in constraints.items() if v != sympy.Symbol(k)}
    lift = {}
    for y in a.fiber:
        terms = [((i,), solution[c]) for c, (yy, i) in system.slots.items() if yy == y]
        lift[y] = DForm.build(a.n, 1, terms)
    obstructions = [Obstruction(e, src) for e, src in elim.inconsistent]
    obstruction_forms = {}
    if obstructions:
        at_particular = {y: f.map(lambda e: e.xreplace({s: 0 for s in vsyms})) for y, f in lift.items()}
        for label, form in lift_torsion(a, at_particular).items():
            if not form.is_zero():
                obstruction_forms[label] = form
    prolonged = RelativeAlgebroid(
        frame=a.frame,
        base=a.base + a.fiber,
        fiber=tuple(new_vars),
        dtheta=a.dtheta,
        dbase=a.dbase + tuple(lift[y] for y in a.fiber),
        level=a.level + 1,
        jet_indep=a.jet_indep,
        provenance=a.provenance + (f"prolongation {a.level + 1}",),
    )
    return ProlongationStep(
        algebroid=a,
        system=system,
        solution=solution,
        constraints=constraints,
        new_vars=new_vars,
        lift=lift,
        obstructions=obstructions,
        obstruction_forms=obstruction_forms,
        prolonged=prolonged,
        warnings=elim.warnings,
    )


def curvature(step: ProlongationStep, seed: int = 0) -> list[DForm]:
    """Curvature 2-forms, one per fiber variable of the source algebroid.

    Without new variables the lift is unique and D~(D~ y) is computed
    directly; otherwise the torsion of the next prolongation that cannot be
    removed plays this role.
    """
    if step.obstructed:
        raise ProlongError("curvature is only defined for an unobstructed step")
    a1 = step.prolonged
    if not step.new_vars:
        return [derive(a1, a1.d_of(y)) for y in step.algebroid.fiber]
    nxt = solve_prolongation(a1, seed)
    return [nxt.obstruction_forms.get(y, DForm.zero(a1.n, 2)) for y in step.algebroid.fiber]


def curvature_closure_residual(step: ProlongationStep, seed: int = 0, points: int = 3) -> float:
    """Largest coefficient of sum_rho K^rho ^ d(D alpha)/dy^rho over sampled points.

    K^rho is the torsion D~(D^(1) y^rho) of a generic lift of the prolonged
    algebroid, its lift coefficients left symbolic and sampled too.  The
    sum vanishes identically because D~ squares to zero on forms of the
    source algebroid.  Both factors are evaluated before the wedge, so the
    check does not rest on symbolic cancellation.
    """
    a, a1 = step.algebroid, step.prolonged
    system = torsion_system(a1)
    partials = []
    for _, form, _ in a.equations():
        for y in a.fiber:
            partials.append((y, [(idx, sympy.diff(c, sympy.Symbol(y))) for idx, c in form.items()]))
    names = list(a1.variables) + system.unknowns
    rng = random.Random(seed)
    worst, done, attempts = 0.0, 0, 0
    while done < points:
        attempts += 1
        if attempts > 20 * points:
            raise EvaluationError("no valid sample point for the closure check")
        point = probe_point(names, rng)
        try:
            torsion = {y: [(i, eval_numeric(c, point)) for i, c in system.torsion[y].items()] for y in a.fiber}
            sums: dict[tuple, dict] = {}
            for k, (y, terms) in enumerate(partials):
                acc = sums.setdefault(k // max(len(a.fiber), 1), {})
                for idx, c in terms:
                    value = eval_numeric(c, point) if c != 0 else 0.0
                    for tidx, t in torsion[y]:
                        sign, key = sort_sign(tidx + idx)
                        if sign:
                            acc[key] = acc.get(key, 0.0) + sign * t * value
        except EvaluationError:
            continue
        worst = max([worst] + [abs(v) for acc in sums.values() for v in acc.values()])
        done += 1
    return worst


# ---------------------------------------------------------------------------
# towers


@dataclass
class LevelReport:
    level: int
    step: ProlongationStep
    characters: dict
    certificates: list[str]
    curvature: list[DForm] | None = None

    def as_dict(self) -> dict:
        out = {"level": self.level}
        out.update(self.step.as_dict())
        out["characters"] = list(self.characters["s"])
        out["cartan_test"] = {k: v for k, v in self.characters.items() if k != "warnings"}
        out["certificates"] = list(self.certificates)
        if self.curvature is not None:
            out["curvature"] = [form_text(f, self.step.algebroid.frame) for f in self.curvature]
        out["warnings"] = list(self.step.warnings) + list(self.characters.get("warnings", []))
        return out


@dataclass
class TowerReport:
    levels: list[LevelReport]
    finite_type: bool = False
    stabilized_at: int | None = None
    obstructed_at: int | None = None
    certificates: list[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "levels": [lv.as_dict() for lv in self.levels],
            "finite_type": self.finite_type,
            "stabilized_at": self.stabilized_at,
            "obstructed_at": self.obstructed_at,
            "certificates": list(self.certificates),
        }

    @property
    def final(self) -> RelativeAlgebroid:
        return self.levels[-1].step.prolonged


FORMAL_INTEGRABILITY = "involutive + torsionless: formally integrable"


def prolongation_tower(a: RelativeAlgebroid, max_depth: int, seed: int = 0, prefix: str | None = None) -> TowerReport:
    if max_depth < 1:
        raise ProlongError("max_depth must be at least 1")
    report = TowerReport([])
    current = a
    for level in range(1, max_depth + 1):
        step = solve_prolongation(current, seed, prefix)
        chars = cartan_search(tableau_map(current), seed)
        certs = []
        if not step.obstructed:
            certs.append("torsionless")
        if chars["involutive"] == "yes":
            certs.append("involutive")
        if not step.obstructed and chars["involutive"] == "yes":
            certs.append(FORMAL_INTEGRABILITY)
        lv = LevelReport(level, step, chars, certs)
        report.levels.append(lv)
        if step.obstructed:
            report.obstructed_at = level
            break
        if not step.new_vars:
            lv.curvature = curvature(step, seed)
            if all(f.is_zero() for f in lv.curvature):
                report.finite_type = True
                report.stabilized_at = level
                lv.certificates.append("finite type")
                break
        current = step.prolonged
    if report.obstructed_at is None and any(FORMAL_INTEGRABILITY in lv.certificates for lv in report.levels):
        report.certificates.append(FORMAL_INTEGRABILITY)
    if report.finite_type:
        report.certificates.append(f"finite type: stabilizes at level {report.stabilized_at}")
    if report.obstructed_at is not None:
        report.certificates.append(f"not {report.obstructed_at}-integrable")
    return report
