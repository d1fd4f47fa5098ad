"""Exact scalar expressions.

Expressions are plain sympy objects restricted to a small class: rationals,
named variables, the four field operations, non-negative integer powers and
the atoms sin, cos, exp.  Everything here returns values in a canonical form
(see :func:`simplify`), so two canonical expressions that differ structurally
differ mathematically, up to the documented limits of trigonometric
denominators.
"""

from __future__ import annotations

import enum
import math
import random
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

import sympy
from sympy import Expr, Integer, Rational, Symbol

__all__ = [
    "Expr",
    "ParseError",
    "UnknownIdentifierError",
    "EvaluationError",
    "Verdict",
    "VarTable",
    "ZERO",
    "ONE",
    "sym",
    "parse_expr",
    "to_text",
    "differentiate",
    "simplify",
    "is_zero",
    "eval_numeric",
    "substitute",
    "probe_point",
    "total_degree",
    "PROBE_COUNT",
    "PROBE_TOL",
]

ZERO = Integer(0)
ONE = Integer(1)

# number of random probes before a nonzero canonical form is called Undetermined
PROBE_COUNT = 8
PROBE_TOL = 1e-9

_FUNCTIONS = {"sin": sympy.sin, "cos": sympy.cos, "exp": sympy.exp}


class ParseError(ValueError):
    """Syntax error in an expression or form; ``pos`` is a 0-based column."""

    def __init__(self, message: str, pos: int | None = None, text: str | None = None):
        self.pos = pos
        self.text = text
        where = "" if pos is None else f" at column {pos + 1}"
        super().__init__(f"{message}{where}")


class UnknownIdentifierError(ParseError):
    pass


class EvaluationError(ArithmeticError):
    pass


class Verdict(enum.Enum):
    ZERO = "zero"
    NONZERO = "nonzero"
    UNDETERMINED = "undetermined"


def sym(name: str) -> Symbol:
    return Symbol(name)


@dataclass
class VarTable:
    """Ordered variable names with roles (base, fiber, lift, jet)."""

    names: list[str] = field(default_factory=list)
    roles: dict[str, str] = field(default_factory=dict)

    @classmethod
    def of(cls, names: Iterable[str], role: str = "base") -> "VarTable":
        table = cls()
        for n in names:
            table.add(n, role)
        return table

    def add(self, name: str, role: str = "base") -> Symbol:
        if name in self.roles:
            raise ValueError(f"variable {name!r} declared twice")
        if name in _FUNCTIONS:
            raise ValueError(f"{name!r} is reserved for a function")
        self.names.append(name)
        self.roles[name] = role
        return Symbol(name)

    def __contains__(self, name: object) -> bool:
        return name in self.roles

    def __iter__(self):
        return iter(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def with_role(self, role: str) -> list[str]:
        return [n for n in self.names if self.roles[n] == role]


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(r"\s*(?:(\d+)|([A-Za-z_][A-Za-z0-9_]*)|(\*\*|[-+*/^(),]))")


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None:
            col = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[col]!r}", col, text)
        if m.group(1) is not None:
            tokens.append(("num", m.group(1), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(("id", m.group(2), m.start(2)))
        else:
            tokens.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class ScalarOps:
    """Value algebra used by the parser for plain scalar expressions."""

    def number(self, value: int):
        return Integer(value)

    def identifier(self, name: str):
        return None

    def scalar(self, value):
        return value

    def add(self, a, b):
        return a + b

    def sub(self, a, b):
        return a - b

    def mul(self, a, b):
        return a * b

    def div(self, a, b, pos: int):
        if b == 0:
            raise ParseError("division by zero", pos)
        return a / b

    def neg(self, a):
        return -a

    def power(self, a, k: int):
        return a**k

    def wedge(self, a, b, pos: int):
        raise ParseError("'^' is only allowed between frame covectors", pos)

    def function(self, name: str, arg, pos: int):
        return _FUNCTIONS[name](arg)


class Parser:
    """Recursive-descent parser shared by scalar and form grammars.

    Precedence from loose to tight: ``+ -``, ``* /``, unary minus, ``^``, ``**``.
    """

    def __init__(self, text: str, names: Callable[[str], Symbol | None], ops=None):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.names = names
        self.ops = ops or ScalarOps()

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, text, pos = self.take()
        if text != value or kind == "end":
            found = "end of input" if kind == "end" else repr(text)
            raise ParseError(f"expected {value!r}, found {found}", pos, self.text)

    def parse(self):
        if self.peek()[0] == "end":
            raise ParseError("empty expression", 0, self.text)
        value = self.sum()
        kind, text, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {text!r}", pos, self.text)
        return value

    def sum(self):
        value = self.product()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, _ = self.take()
            rhs = self.product()
            value = self.ops.add(value, rhs) if op == "+" else self.ops.sub(value, rhs)
        return value

    def product(self):
        value = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, pos = self.take()
            rhs = self.unary()
            value = self.ops.mul(value, rhs) if op == "*" else self.ops.div(value, rhs, pos)
        return value

    def unary(self):
        kind, text, _ = self.peek()
        if kind == "op" and text in ("-", "+"):
            self.take()
            value = self.unary()
            return self.ops.neg(value) if text == "-" else value
        return self.wedge()

    def wedge(self):
        value = self.power()
        while self.peek()[1] == "^" and self.peek()[0] == "op":
            _, _, pos = self.take()
            value = self.ops.wedge(value, self.power(), pos)
        return value

    def power(self):
        value = self.atom()
        if self.peek()[1] == "**" and self.peek()[0] == "op":
            self.take()
            kind, text, pos = self.take()
            if kind != "num":
                raise ParseError("exponent must be a non-negative integer literal", pos, self.text)
            value = self.ops.power(value, int(text))
        return value

    def atom(self):
        kind, text, pos = self.take()
        if kind == "num":
            return self.ops.number(int(text))
        if kind == "op" and text == "(":
            value = self.sum()
            self.expect(")")
            return value
        if kind == "id":
            if text in _FUNCTIONS:
                self.expect("(")
                arg = self.sum()
                self.expect(")")
                return self.ops.function(text, arg, pos)
            special = self.ops.identifier(text)
            if special is not None:
                return special
            symbol = self.names(text)
            if symbol is None:
                raise UnknownIdentifierError(f"unknown identifier {text!r}", pos, self.text)
            return self.ops.scalar(symbol)
        found = "end of input" if kind == "end" else repr(text)
        raise ParseError(f"unexpected {found}", pos, self.text)


def _lookup(variables) -> Callable[[str], Symbol | None]:
    if variables is None:
        return lambda name: None
    known = set(variables)
    return lambda name: Symbol(name) if name in known else None


def parse_expr(text: str, variables: VarTable | Iterable[str] | None = None) -> Expr:
    """Parse ``text`` over the given variable names."""
    return Parser(text, _lookup(variables)).parse()


# ---------------------------------------------------------------------------
# printing


def _print_number(q: Rational) -> str:
    if q.q == 1:
        return str(q.p)
    return f"{q.p}/{q.q}"


def _print_factor(e: Expr) -> str:
    text = to_text(e)
    return f"({text})" if (e.is_Add or e.is_Mul or (e.is_Number and (e < 0 or e.q != 1))) else text


def _print_power(base: Expr, k: int) -> str:
    inner = to_text(base)
    if not (base.is_Symbol or base.is_Function):
        inner = f"({inner})"
    return inner if k == 1 else f"{inner}**{k}"


def to_text(e: Expr) -> str:
    """Print ``e`` in the input grammar (reparseable by :func:`parse_expr`)."""
    e = sympy.sympify(e)
    if e.is_Rational:
        return _print_number(e)
    if e.is_Symbol:
        return e.name
    if e is sympy.E:
        return "exp(1)"
    if e.is_Function and e.func.__name__ in _FUNCTIONS:
        return f"{e.func.__name__}({to_text(e.args[0])})"
    if e.is_Add:
        parts = []
        for k, term in enumerate(e.as_ordered_terms()):
            text = to_text(term)
            if k == 0:
                parts.append(text)
            elif text.startswith("-"):
                parts.append(" - " + text[1:])
            else:
                parts.append(" + " + text)
        return "".join(parts)
    if e.is_Pow:
        base, k = e.args
        if k.is_Integer and k > 0:
            return _print_power(base, int(k))
        if k.is_Integer and k < 0:
            return "1/" + _print_power(base, int(-k))
        if base is sympy.E:
            return f"exp({to_text(k)})"
        raise ValueError(f"cannot print {e!r} in the expression grammar")
    if e.is_Mul:
        coeff, rest = e.as_coeff_Mul()
        numer, denom = [], []
        for f in rest.as_ordered_factors():
            if f.is_Pow and f.args[1].is_Integer and f.args[1] < 0:
                denom.append(_print_power(f.args[0], int(-f.args[1])))
            elif f.is_Pow:
                numer.append(_print_power(*f.args) if f.args[1].is_Integer else to_text(f))
            else:
                numer.append(_print_factor(f))
        sign = "-" if coeff < 0 else ""
        coeff = abs(coeff)
        head = [] if coeff == 1 and numer else [_print_number(coeff)]
        body = "*".join(head + numer)
        if len(denom) == 1:
            body += "/" + denom[0]
        elif denom:
            body += "/(" + "*".join(denom) + ")"
        return sign + body
    raise ValueError(f"cannot print {e!r} in the expression grammar")


# ---------------------------------------------------------------------------
# canonical form


def _has_functions(e: Expr) -> bool:
    return bool(e.atoms(sympy.Function)) or e.has(sympy.E)


def _normalize_atoms(e: Expr) -> Expr:
    # sin(a+b) and sin(2a) are rewritten in terms of single-angle atoms, and
    # exp of a sum becomes a product, so each atom has a "simple" argument.
    e = e.replace(
        lambda a: isinstance(a, (sympy.sin, sympy.cos)),
        lambda a: sympy.expand_trig(a.func(sympy.expand(a.args[0]))),
    )
    e = e.replace(
        lambda a: isinstance(a, sympy.exp),
        lambda a: sympy.expand(sympy.exp(sympy.expand(a.args[0])), power_exp=True, basic=False),
    )
    return e


def _trig_pairs(e: Expr) -> list[tuple[Expr, Expr]]:
    pairs = {}
    for atom in e.atoms(sympy.sin):
        pairs[atom.args[0]] = (atom, sympy.cos(atom.args[0]))
    return [pairs[k] for k in sorted(pairs, key=sympy.default_sort_key)]


def _trig_reduce(e: Expr) -> Expr:
    """Reduce a polynomial so every sin atom has degree at most one."""
    pairs = _trig_pairs(e)
    if not pairs or e.is_Number:
        return e
    gens = sorted(e.free_symbols, key=sympy.default_sort_key)
    other = sorted(
        (a for a in e.atoms(sympy.Function) if not isinstance(a, sympy.sin)),
        key=sympy.default_sort_key,
    )
    gens = gens + [s for s, _ in pairs] + [c for _, c in pairs if c not in other] + other
    gens = list(dict.fromkeys(gens))
    poly = sympy.Poly(e, *gens)
    index = {g: k for k, g in enumerate(gens)}
    out: dict[tuple[int, ...], Expr] = {}
    for mono, coeff in poly.terms():
        terms = [(list(mono), coeff)]
        for s, c in pairs:
            si, ci = index[s], index[c]
            expanded = []
            for exps, cf in terms:
                q, r = divmod(exps[si], 2)
                if q == 0:
                    expanded.append((exps, cf))
                    continue
                for j in range(q + 1):
                    new = list(exps)
                    new[si] = r
                    new[ci] += 2 * j
                    expanded.append((new, cf * math.comb(q, j) * (-1) ** j))
            terms = expanded
        for exps, cf in terms:
            key = tuple(exps)
            out[key] = out.get(key, 0) + cf
    return sympy.Poly.from_dict({k: v for k, v in out.items() if v != 0} or {(0,) * len(gens): 0}, *gens).as_expr()


def simplify(e) -> Expr:
    """Canonical form: expanded numerator over expanded denominator.

    Every sin(a) occurs with degree at most one in numerator and denominator,
    and common polynomial factors are cancelled.
    """
    e = sympy.sympify(e)
    if e.is_Number or e.is_Symbol:
        return e
    if _has_functions(e):
        e = _normalize_atoms(e)
    if not any(not p.exp.is_Integer or p.exp < 0 for p in e.atoms(sympy.Pow)):
        # polynomial in its atoms: no denominators to combine
        return _trig_reduce(sympy.expand(e))
    num, den = sympy.fraction(sympy.together(e))
    num = _trig_reduce(sympy.expand(num))
    den = _trig_reduce(sympy.expand(den))
    if num == 0:
        return ZERO
    if den.is_Number:
        return sympy.expand(num / den)
    num, den = sympy.fraction(sympy.cancel(num / den))
    num = _trig_reduce(sympy.expand(num))
    den = _trig_reduce(sympy.expand(den))
    if den.is_Number:
        return sympy.expand(num / den)
    return num / den


def numerator(e: Expr) -> Expr:
    return sympy.fraction(e)[0]


def total_degree(e: Expr) -> int:
    """Total degree of the numerator of a canonical expression in all atoms."""
    num, den = sympy.fraction(e)
    degree = 0
    for part in (num, den):
        if part.is_Number:
            continue
        gens = sorted(part.free_symbols, key=sympy.default_sort_key)
        gens += sorted(part.atoms(sympy.Function), key=sympy.default_sort_key)
        degree += sympy.Poly(part, *gens).total_degree()
    return degree


def differentiate(e: Expr, v: str | Symbol) -> Expr:
    var = Symbol(v) if isinstance(v, str) else v
    return simplify(sympy.diff(e, var))


def substitute(e: Expr, bindings: Mapping[str | Symbol, Expr]) -> Expr:
    """Simultaneous substitution followed by simplification."""
    if not bindings:
        return simplify(e)
    table = {(Symbol(k) if isinstance(k, str) else k): sympy.sympify(v) for k, v in bindings.items()}
    return simplify(sympy.sympify(e).xreplace(table))


# ---------------------------------------------------------------------------
# numerics


@lru_cache(maxsize=8192)
def _compiled(e: Expr, names: tuple[str, ...]):
    return sympy.lambdify([Symbol(n) for n in names], e, modules="math")


def _as_float(value) -> float:
    if isinstance(value, str):
        value = Fraction(value)
    if isinstance(value, Fraction):
        return value.numerator / value.denominator
    if isinstance(value, sympy.Rational):
        return int(value.p) / int(value.q)
    return float(value)


def eval_numeric(e: Expr, point: Mapping[str, object]) -> float:
    """Evaluate ``e`` at ``point`` (name -> rational or float) in double precision."""
    e = sympy.sympify(e)
    names = tuple(sorted(s.name for s in e.free_symbols))
    missing = [n for n in names if n not in point]
    if missing:
        raise EvaluationError(f"no value for {', '.join(missing)}")
    try:
        return float(_compiled(e, names)(*(_as_float(point[n]) for n in names)))
    except (ZeroDivisionError, ValueError, OverflowError) as exc:
        raise EvaluationError(f"cannot evaluate {to_text(e)}: {exc}") from exc


def probe_point(names: Sequence[str], rng: random.Random) -> dict[str, Fraction]:
    """A random rational point with moderate magnitudes (|value| <= 3)."""
    point = {}
    for n in names:
        q = rng.randint(2, 13)
        point[n] = Fraction(rng.randint(-3 * q, 3 * q), q)
    return point


def _scale(e: Expr, point) -> float:
    terms = e.args if e.is_Add else (e,)
    total = 0.0
    for t in terms:
        try:
            total += abs(eval_numeric(t, point))
        except EvaluationError:
            pass
    return max(1.0, total)


def is_zero(e, seed: int = 0) -> Verdict:
    """Zero test: decided by the canonical form, cross-checked by probes."""
    c = simplify(e)
    if c == 0:
        return Verdict.ZERO
    num = numerator(c)
    if num.is_Number:
        return Verdict.NONZERO
    rng = random.Random(seed)
    names = sorted(s.name for s in num.free_symbols)
    attempts = 0
    probes = 0
    while probes < PROBE_COUNT and attempts < 4 * PROBE_COUNT:
        attempts += 1
        point = probe_point(names, rng)
        try:
            value = eval_numeric(num, point)
        except EvaluationError:
            continue
        probes += 1
        if abs(value) > PROBE_TOL * _scale(num, point):
            return Verdict.NONZERO
    return Verdict.UNDETERMINED
