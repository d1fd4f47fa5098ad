"""Fixture loading and random algebroid generators shared by the tests."""

from __future__ import annotations

import random
from importlib.resources import files

import sympy

from relalg.algebroid import RelativeAlgebroid, load_algebroid
from relalg.exterior import DForm, multi_indices
from relalg.jets import load_pde
from relalg.prolong import ProlongError, solve_prolongation

FIXTURES = files("relalg") / "fixtures"


def fixture_path(name: str) -> str:
    return str(FIXTURES / name)


def load(name: str) -> RelativeAlgebroid:
    return load_algebroid((FIXTURES / f"{name}.alg").read_text())


def pde(name: str):
    return load_pde((FIXTURES / f"{name}.pde").read_text())


def random_poly(rng: random.Random, names, degree: int = 2, terms: int = 3) -> sympy.Expr:
    syms = [sympy.Symbol(n) for n in names]
    out = sympy.Integer(0)
    for _ in range(rng.randint(1, terms)):
        mono = sympy.Integer(rng.choice([-3, -2, -1, 1, 2, 3]))
        for _ in range(rng.randint(0, degree)):
            if syms:
                mono *= rng.choice(syms)
        out += mono
    return sympy.expand(out)


def random_form(rng: random.Random, n: int, degree: int, names, poly_degree: int = 2) -> DForm:
    idxs = multi_indices(n, degree)
    picks = rng.sample(idxs, rng.randint(0, len(idxs)))
    return DForm.build(n, degree, [(i, random_poly(rng, names, poly_degree)) for i in picks])


# Brackets satisfying the Jacobi identity, as D theta^i with constant coefficients.
LIE_BRACKETS = {
    2: [{}, {1: ((1, 2), 1)}],
    3: [{}, {3: ((1, 2), 1)}, {1: ((2, 3), 1), 2: ((3, 1), 1), 3: ((1, 2), 1)}, {1: ((1, 2), 1), 3: ((2, 3), -1)}],
}


def random_algebroid(rng: random.Random, n: int | None = None, nbase: int | None = None, nfiber: int | None = None) -> RelativeAlgebroid:
    n = n or rng.choice([2, 3])
    nbase = nbase if nbase is not None else rng.randint(1, 2)
    nfiber = nfiber if nfiber is not None else rng.randint(1, 2)
    base = tuple(f"x{i}" for i in range(1, nbase + 1))
    fiber = tuple(f"y{i}" for i in range(1, nfiber + 1))
    bracket = rng.choice(LIE_BRACKETS[n])
    dtheta = []
    for i in range(1, n + 1):
        if i in bracket:
            (j, k), c = bracket[i]
            dtheta.append(DForm.build(n, 2, [((j, k), sympy.Integer(c))]))
        else:
            dtheta.append(DForm.zero(n, 2))
    dbase = tuple(random_form(rng, n, 1, base + fiber) for _ in base)
    return RelativeAlgebroid(("theta1", "theta2", "theta3")[:n], base, fiber, tuple(dtheta), dbase)


def random_integrable(rng: random.Random, tries: int = 200, max_lift_ops: int = 60, n: int | None = None):
    """A random algebroid whose first prolongation exists, with its step."""
    for _ in range(tries):
        a = random_algebroid(rng, n=n)
        if not any(a.anchor(mu, i) != 0 for mu in range(1, len(a.base) + 1) for i in range(1, a.n + 1)):
            continue
        try:
            step = solve_prolongation(a, particular="standard")
        except ProlongError:
            continue
        # "small": keep lifts whose coefficients stay modest in size
        size = sum(sympy.count_ops(c) for f in step.lift.values() for _, c in f.items())
        if not step.obstructed and size <= max_lift_ops:
            return a, step
    raise RuntimeError("no 1-integrable sample found")
