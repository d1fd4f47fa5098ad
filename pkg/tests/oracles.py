"""Independent oracles for derived values.

Nothing here imports the package.  Forms are plain dicts from increasing
index tuples to sympy expressions, and D is hand-coded per example, so a
bug in the package's exterior calculus cannot leak into the expected values.
Outputs are frozen in ``data/oracle_values.json`` by
``scripts/freeze_oracles.py``.
"""

from __future__ import annotations

import itertools
from math import comb

import sympy

# ---------------------------------------------------------------------------
# a minimal exterior algebra on a rank-n frame


def _canon(idx):
    """Sign and sorted version of an index tuple (0 sign on repeats)."""
    if len(set(idx)) != len(idx):
        return 0, None
    inversions = sum(1 for a, b in itertools.combinations(idx, 2) if a > b)
    return (-1) ** inversions, tuple(sorted(idx))


def form(*terms):
    out = {}
    for coeff, idx in terms:
        sign, key = _canon(tuple(idx))
        if sign:
            out[key] = out.get(key, 0) + sign * sympy.sympify(coeff)
    return out


def add(*forms):
    out = {}
    for f in forms:
        for k, v in f.items():
            out[k] = out.get(k, 0) + v
    return out


def scale(c, f):
    return {k: c * v for k, v in f.items()}


def wedge(f, g):
    out = {}
    for (i, a), (j, b) in itertools.product(f.items(), g.items()):
        sign, key = _canon(i + j)
        if sign:
            out[key] = out.get(key, 0) + sign * a * b
    return out


def clean(f):
    out = {}
    for k, v in f.items():
        v = sympy.simplify(sympy.expand_trig(v))
        if v != 0:
            out[k] = v
    return out


class Derivation:
    """D on functions via the chain rule, on theta^i via ``dtheta``."""

    def __init__(self, dtheta: dict, dvars: dict):
        self.dtheta = dtheta  # i -> 2-form
        self.dvars = dvars  # symbol -> 1-form

    def function(self, f):
        f = sympy.sympify(f)
        return add(*[scale(sympy.diff(f, s), d) for s, d in self.dvars.items() if f.has(s)])

    def __call__(self, f):
        out = {}
        for idx, c in f.items():
            out = add(out, wedge(self.function(c), form((1, idx))))
            for pos, i in enumerate(idx):
                left = form((1, idx[:pos]))
                right = form((1, idx[pos + 1 :]))
                out = add(out, scale((-1) ** pos * c, wedge(wedge(left, self.dtheta.get(i, {})), right)))
        return out


# ---------------------------------------------------------------------------
# surfaces: the dK-coefficients f_k of D c_k


def surfaces_f(levels: int = 3) -> list[sympy.Expr]:
    """Solve D(D c_{k-1}) = 0 for f_k in the ansatz

        D c_k = f_k (cos phi theta1 + sin phi theta2) + c_{k+1} (-sin phi theta1 + cos phi theta2),

    with c_0 = phi read as D phi = theta3 + c_1 (...)."""
    K, phi = sympy.symbols("K phi")
    c = sympy.symbols(f"c1:{levels + 2}")
    g = form((sympy.cos(phi), (1,)), (sympy.sin(phi), (2,)))
    e = form((-sympy.sin(phi), (1,)), (sympy.cos(phi), (2,)))
    dtheta = {1: form((1, (2, 3))), 2: form((1, (3, 1))), 3: form((K, (1, 2)))}
    fs = sympy.symbols(f"f1:{levels + 1}")
    dvars = {K: g, phi: add(form((1, (3,))), scale(c[0], e))}
    out = []
    previous = dvars[phi]
    for k in range(levels):
        dvars[c[k]] = add(scale(fs[k], g), scale(c[k + 1], e))
        D = Derivation(dtheta, dvars)
        square = clean(D(previous))
        eqs = [v for v in square.values()]
        sol = sympy.solve(eqs, fs[k], dict=True)
        assert len(sol) == 1, (k, square)
        fk = sympy.factor(sol[0][fs[k]])
        out.append(fk)
        dvars[c[k]] = add(scale(fk, g), scale(c[k + 1], e))
        previous = dvars[c[k]]
    return out


# ---------------------------------------------------------------------------
# torsion forced by the tableau


def torsion_tableau():
    """Lift D x = sum x_i theta^i; solve the torsion, then square the lift."""
    x = sympy.Symbol("x")
    xs = sympy.symbols("x_1:4")
    dtheta = {1: form((x, (1, 2))), 2: form((x, (2, 3))), 3: form((x, (3, 1)))}
    lift = form(*[(xs[i], (i + 1,)) for i in range(3)])
    D = Derivation(dtheta, {x: lift})
    eqs = []
    for i in (1, 2, 3):
        eqs += list(clean(D(dtheta[i])).values())
    sol = sympy.solve(eqs, xs, dict=True)
    assert len(sol) == 1
    solved = {s: sympy.factor(v) for s, v in sol[0].items()}
    D1 = Derivation(dtheta, {x: {k: v.subs(solved) for k, v in lift.items()}})
    curvature = clean(D1({k: v.subs(solved) for k, v in lift.items()}))
    return solved, curvature


# ---------------------------------------------------------------------------
# tautological tableaux


def tautological(n: int, m: int, k: int) -> tuple[int, list[int]]:
    """Prolongation rank and characters of Hom(wedge^k W, V)."""
    rank = m * k * comb(n + 1, k + 1)
    chars = [m * comb(i - 1, k - 1) for i in range(1, n + 1)]
    return rank, chars


# ---------------------------------------------------------------------------
# transport equation u_x = u_y: brute-force parametric counts


def transport_parametric(order: int) -> int:
    """Dependent jet coordinates of order <= ``order`` left free by all
    derivatives of u_x - u_y up to order ``order``.

    Coordinates are pairs (a, b) for u_{x^a y^b}; the derivative D_x^p D_y^q
    of the equation reads u_{p+1,q} - u_{p,q+1} = 0.
    """
    coords = [(a, b) for a in range(order + 1) for b in range(order + 1 - a)]
    index = {c: i for i, c in enumerate(coords)}
    rows = []
    for p in range(order):
        for q in range(order - p):
            row = [0] * len(coords)
            row[index[(p + 1, q)]] += 1
            row[index[(p, q + 1)]] -= 1
            rows.append(row)
    rank = sympy.Matrix(rows).rank() if rows else 0
    return len(coords) - rank


def frozen_values() -> dict:
    f = surfaces_f(3)
    solved, curvature = torsion_tableau()
    return {
        "surfaces_f": [str(v) for v in f],
        "torsion_tableau_lift": {str(k): str(v) for k, v in sorted(solved.items(), key=str)},
        "torsion_tableau_curvature": {"".join(map(str, k)): str(v) for k, v in sorted(curvature.items())},
        "tautological": {
            f"{n},{m},{k}": {"rank": r, "characters": s}
            for n in range(1, 5)
            for m in range(1, 4)
            for k in (1, 2)
            for r, s in [tautological(n, m, k)]
        },
        "transport_parametric": [transport_parametric(k) for k in (1, 2, 3)],
    }
