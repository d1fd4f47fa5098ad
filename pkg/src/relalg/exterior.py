"""Exterior forms over a fixed coframe theta1..thetan with scalar coefficients."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Callable, Iterable, Mapping, Sequence

import sympy

from .expr import ONE, ZERO, Expr, ParseError, Parser, ScalarOps, simplify, to_text, _lookup

__all__ = [
    "DForm",
    "FrameError",
    "sort_sign",
    "wedge",
    "form_add",
    "form_scale",
    "coefficient",
    "parse_form",
    "form_text",
    "frame_names",
    "multi_indices",
]


class FrameError(ValueError):
    """Mismatched frame rank, degree, or malformed multi-index."""


def frame_names(n: int) -> list[str]:
    return [f"theta{i}" for i in range(1, n + 1)]


def multi_indices(n: int, k: int) -> list[tuple[int, ...]]:
    """Strictly increasing 1-based multi-indices of length k, in lexicographic order."""
    return list(combinations(range(1, n + 1), k))


def sort_sign(idx: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Sort ``idx`` and return (sign of the sorting permutation, sorted tuple).

    A repeated index gives sign 0.
    """
    items = list(idx)
    sign = 1
    # insertion sort, counting transpositions
    for i in range(1, len(items)):
        j = i
        while j > 0 and items[j - 1] > items[j]:
            items[j - 1], items[j] = items[j], items[j - 1]
            sign = -sign
            j -= 1
    for a, b in zip(items, items[1:]):
        if a == b:
            return 0, tuple(items)
    return sign, tuple(items)


@dataclass(frozen=True)
class DForm:
    """A homogeneous form of a given degree; ``terms`` maps sorted indices to
    nonzero canonical coefficients."""

    n: int
    degree: int
    terms: Mapping[tuple[int, ...], Expr]

    @classmethod
    def build(cls, n: int, degree: int, terms: Iterable[tuple[Sequence[int], Expr]], simplified: bool = False) -> "DForm":
        acc: dict[tuple[int, ...], Expr] = {}
        for idx, coeff in terms:
            if len(idx) != degree:
                raise FrameError(f"index {tuple(idx)} does not have length {degree}")
            if any(not 1 <= i <= n for i in idx):
                raise FrameError(f"index {tuple(idx)} out of range for rank {n}")
            sign, key = sort_sign(idx)
            if sign == 0:
                continue
            acc[key] = acc.get(key, ZERO) + sign * coeff
        out = {}
        for key in sorted(acc):
            c = acc[key] if simplified else simplify(acc[key])
            if c != 0:
                out[key] = c
        return cls(n, degree, out)

    @classmethod
    def zero(cls, n: int, degree: int = 0) -> "DForm":
        return cls(n, degree, {})

    @classmethod
    def scalar(cls, n: int, value) -> "DForm":
        value = simplify(value)
        return cls(n, 0, {(): value} if value != 0 else {})

    @classmethod
    def basis(cls, n: int, *idx: int) -> "DForm":
        return cls.build(n, len(idx), [(idx, ONE)])

    def __post_init__(self):
        if self.degree < 0:
            raise FrameError("negative degree")

    def coefficient(self, idx: Sequence[int]) -> Expr:
        return coefficient(self, idx)

    def is_zero(self) -> bool:
        return not self.terms

    def items(self):
        return self.terms.items()

    def map(self, fn: Callable[[Expr], Expr]) -> "DForm":
        return DForm.build(self.n, self.degree, [(k, fn(v)) for k, v in self.terms.items()])

    def free_symbols(self) -> set:
        out = set()
        for v in self.terms.values():
            out |= v.free_symbols
        return out

    def __add__(self, other: "DForm") -> "DForm":
        return form_add(self, other)

    def __sub__(self, other: "DForm") -> "DForm":
        return form_add(self, -other)

    def __neg__(self) -> "DForm":
        return DForm(self.n, self.degree, {k: -v for k, v in self.terms.items()})

    def __xor__(self, other: "DForm") -> "DForm":
        return wedge(self, other)

    def __mul__(self, value) -> "DForm":
        return form_scale(value, self)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        if not isinstance(other, DForm):
            return NotImplemented
        return self.n == other.n and self.degree == other.degree and dict(self.terms) == dict(other.terms)

    def __hash__(self):
        return hash((self.n, self.degree, tuple(self.terms.items())))

    def __repr__(self) -> str:
        return f"DForm({form_text(self)!r})"


def _check_rank(a: DForm, b: DForm):
    if a.n != b.n:
        raise FrameError(f"frame rank mismatch: {a.n} vs {b.n}")


def form_add(a: DForm, b: DForm) -> DForm:
    _check_rank(a, b)
    if a.degree != b.degree:
        if a.is_zero() and a.degree == 0:
            return b
        if b.is_zero() and b.degree == 0:
            return a
        raise FrameError(f"cannot add forms of degree {a.degree} and {b.degree}")
    return DForm.build(a.n, a.degree, list(a.terms.items()) + list(b.terms.items()))


def form_scale(e, a: DForm) -> DForm:
    e = sympy.sympify(e)
    if e == 0:
        return DForm.zero(a.n, a.degree)
    return DForm.build(a.n, a.degree, [(k, e * v) for k, v in a.terms.items()])


def wedge(a: DForm, b: DForm) -> DForm:
    _check_rank(a, b)
    degree = a.degree + b.degree
    if degree > a.n:
        return DForm.zero(a.n, degree)
    terms = []
    for ia, ca in a.terms.items():
        for ib, cb in b.terms.items():
            terms.append((ia + ib, ca * cb))
    return DForm.build(a.n, degree, terms)


def coefficient(a: DForm, idx: Sequence[int]) -> Expr:
    idx = tuple(idx)
    if len(idx) != a.degree:
        raise FrameError(f"index {idx} does not match degree {a.degree}")
    if any(x >= y for x, y in zip(idx, idx[1:])):
        raise FrameError(f"index {idx} is not strictly increasing")
    if any(not 1 <= i <= a.n for i in idx):
        raise FrameError(f"index {idx} out of range for rank {a.n}")
    return a.terms.get(idx, ZERO)


# ---------------------------------------------------------------------------
# text


def form_text(a: DForm, names: Sequence[str] | None = None) -> str:
    """Render as ``coef*theta1^theta2 + ...`` (indices ascending)."""
    names = list(names) if names is not None else frame_names(a.n)
    if a.is_zero():
        return "0"
    if a.degree == 0:
        return to_text(a.terms[()])
    parts = []
    for idx, coeff in a.terms.items():
        basis = "^".join(names[i - 1] for i in idx)
        if coeff == 1:
            text = basis
        elif coeff == -1:
            text = "-" + basis
        else:
            c = to_text(coeff)
            if coeff.is_Add or (coeff.is_Mul and any(f.is_Add for f in coeff.args)) or "/" in c:
                c = f"({c})"
            text = f"{c}*{basis}"
        parts.append(text)
    out = parts[0]
    for p in parts[1:]:
        out += " - " + p[1:] if p.startswith("-") else " + " + p
    return out


class _FormOps(ScalarOps):
    def __init__(self, n: int, frame: Sequence[str]):
        self.n = n
        self.frame = {name: i + 1 for i, name in enumerate(frame)}

    def number(self, value):
        return DForm.scalar(self.n, sympy.Integer(value))

    def identifier(self, name):
        if name in self.frame:
            return DForm.basis(self.n, self.frame[name])
        return None

    def scalar(self, value):
        return DForm(self.n, 0, {(): value})

    def add(self, a, b):
        return form_add(a, b)

    def sub(self, a, b):
        return form_add(a, -b)

    def mul(self, a, b):
        if a.degree and b.degree:
            raise ParseError("use '^' to multiply frame covectors")
        return wedge(a, b)

    def div(self, a, b, pos):
        if b.degree:
            raise ParseError("cannot divide by a form", pos)
        d = b.terms.get((), ZERO)
        if d == 0:
            raise ParseError("division by zero", pos)
        return form_scale(1 / d, a)

    def neg(self, a):
        return -a

    def power(self, a, k):
        if a.degree:
            raise ParseError("'**' applies to scalars only")
        return DForm.scalar(self.n, a.terms.get((), ZERO) ** k)

    def wedge(self, a, b, pos):
        if a.degree == 0 or b.degree == 0:
            raise ParseError("'^' is only allowed between frame covectors", pos)
        return wedge(a, b)

    def function(self, name, arg, pos):
        if arg.degree:
            raise ParseError(f"{name} applied to a form", pos)
        return DForm.scalar(self.n, ScalarOps().function(name, arg.terms.get((), ZERO), pos))


def parse_form(text: str, variables, frame: Sequence[str]) -> DForm:
    """Parse a form such as ``cos(phi) * theta1 + sin(phi) * theta2``."""
    ops = _FormOps(len(frame), frame)
    return Parser(text, _lookup(variables), ops).parse()
