"""Regenerate the bundled problem files in src/sfpoly/fixtures.

Needs sympy (development only).  Coefficients that depend on a parameter are
written as expressions, so one file serves a whole parameter sweep.

    python3 tools/make_fixtures.py
"""

from __future__ import annotations

import json
from pathlib import Path

import sympy as sp

OUT = Path(__file__).resolve().parents[1] / "src" / "sfpoly" / "fixtures"


def q(v) -> sp.Rational:
    return sp.Rational(str(v))


def mat(rows) -> sp.Matrix:
    return sp.Matrix([[q(v) for v in r] for r in rows])


def terms(expr, gens) -> list[dict]:
    poly = sp.Poly(sp.expand(expr), *gens)
    out = []
    for exps, coeff in poly.terms():
        coeff = sp.nsimplify(coeff)
        if coeff.is_number:
            c = int(coeff) if coeff.is_integer else float(coeff)
        else:
            c = str(coeff)
        out.append({"coeff": c, "exps": list(exps)})
    out.sort(key=lambda t: (sum(t["exps"]), [-e for e in t["exps"]]))
    return out


def con(expr, gens, sense, label):
    return {"label": label, "sense": sense, "terms": terms(expr, gens)}


def quad(B, b, v, c=0):
    v = sp.Matrix(v)
    return (v.T * B * v)[0] / 2 + (b.T * v)[0] + c


def ex41():
    a = sp.Symbol("a")
    x = sp.symbols("x1:4")
    y = sp.symbols("y1:3")
    A = mat([[1, 2, 3], [2, 3, 4]])
    B1 = mat([[1, 2, 2], [2, 6, 6], [2, 6, 7]])
    b1 = mat([[18], [28], [38]])
    B2 = sp.Matrix([[a, 1], [1, 2]])
    b2 = mat([[2], [8]])
    e = sp.Matrix([1, 1, 1])
    Ae = A * e
    xc = sp.Matrix(x) - e
    yc = sp.Matrix(y) - Ae
    return {
        "name": "ex41",
        "description": "quadratic C and Q, both convex for a >= 1/2; e = (1,1,1) is feasible",
        "n": 3, "m": 2, "A": [[1, 2, 3], [2, 3, 4]],
        "parameters": {"a": 5},
        "C": [con(quad(B1, b1, xc), x, "le0", "c1")],
        "Q": [con(quad(B2, b2, yc), y, "le0", "q1")],
    }


def ex42():
    x = sp.symbols("x1:6")
    y = sp.symbols("y1:5")
    x1, x2, x3, x4, x5 = x
    # B1 is stored as given; only its symmetric part enters the quadratic form
    B1 = mat([[1, 4, 6.5, 6], [4, 2, 0.5, 2.5], [6, 0.5, 10, 2.5], [6, 2.5, 2.5, 9]])
    B2 = mat([[18, 12, 7, 19.5], [12, 2, 2.5, 7.5], [7, 2.5, 10, 14], [19.5, 7.5, 14, 18]])
    b1 = mat([[2], [1], [4], [3]])
    b2 = mat([[-1], [3], [0], [5]])
    A = [[2, 5, 8, 3, 6], [1, 0, 4, 2, 5], [6, 9, 7, 0, 1], [0, 2, 1, 0, 3]]
    return {
        "name": "ex42",
        "description": "nonconvex C (with one equality) and nonconvex Q in R^5 / R^4",
        "n": 5, "m": 4, "A": A,
        "C": [con(x1**2 + x2**2 - x3**5 + x4 * x5 - 3, x, "le0", "c1"),
              con(x1**4 + x2**4 + x5**4 - 2, x, "le0", "c3"),
              con(3 * x2 + 2, x, "le0", "c4")],
        "C_eq": [con(x1 * (x1 - 1), x, "ge0", "c2")],
        "Q": [con(quad(B1, b1, y, -1), y, "le0", "q1"),
              con(quad(B2, b2, y, -2), y, "le0", "q2")],
    }


def _ex43_c(x):
    x1, x2, x3 = x
    return (x1**4 + x2**4 + x3**4 + 2 * x1**2 * x2**2 + x1**2 * x3**2 + x2**2 * x3**2
            - 4 * x1 - 4 * x2 - 4 * x3 + 1)


def ex43():
    R = sp.Symbol("R")
    x = sp.symbols("x1:4")
    y = sp.symbols("y1:4")
    return {
        "name": "ex43",
        "description": "convex quartic C and a ball Q of squared radius R centred at (2,2,2)",
        "n": 3, "m": 3, "A": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        "parameters": {"R": 4},
        "C": [con(_ex43_c(x), x, "le0", "c1")],
        "Q": [con(sum((yi - 2)**2 for yi in y) - R, y, "le0", "q1")],
    }


def ex44():
    a = sp.Symbol("a")
    x = sp.symbols("x1:4")
    y = sp.symbols("y1:4")
    return {
        "name": "ex44",
        "description": "C as in ex43; Q an axis-weighted quadric, weight a on the third axis",
        "n": 3, "m": 3, "A": [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
        "parameters": {"a": 1},
        "C": [con(_ex43_c(x), x, "le0", "c1")],
        "Q": [con((y[0] - 2)**2 + (y[1] - 2)**2 + a * (y[2] - 2)**2 - q(1.5), y, "le0", "q1")],
    }


def ex45():
    x = sp.symbols("x1:4")
    y = sp.symbols("y1:3")
    x1, x2, x3 = x
    B1 = mat([[1, 1.5], [1.5, 5]])
    B2 = mat([[5, 0.5], [0.5, 2]])
    b1 = mat([[2], [8]])
    b2 = mat([[10], [5]])
    return {
        "name": "ex45",
        "description": "nonconvex C with a degree-10 constraint; quadratic Q in R^2",
        "n": 3, "m": 2, "A": [[1, 2, 3], [0, 1, 2]],
        "C": [con(5 * x1**10 + 3 * x1**5 * x3 + x2**4 + x3**2 + 8 * x3 + 1, x, "le0", "c1"),
              con(x1**4 + 5 * x1**2 * x2**2 - 8 * x1 * x2 + 3 * x2 * x3**3 + x2**4 + x3**4 - 1,
                  x, "le0", "c2")],
        "Q": [con(quad(B1, b1, y), y, "le0", "q1"),
              con(quad(B2, b2, y, -1), y, "le0", "q2")],
    }


def ex46():
    R = sp.Symbol("R")
    x = sp.symbols("x1:3")
    y = sp.symbols("y1:3")
    x1, x2 = x
    f = (x1**5 - 10 * x1**4 * x2 + 8 * x1**2 * x2**3 - 6 * x1**2 * x2**2 + 5 * x1**3
         - 7 * x1**2 * x2 + 3 * x1 * x2**2 - 9 * x2**3 + 2 * x1**2 + 1)
    return {
        "name": "ex46",
        "description": "nonconvex unbounded quintic C intersected with a disk of squared radius R",
        "n": 2, "m": 2, "A": [[1, 0], [0, 1]],
        "parameters": {"R": 100},
        "C": [con(f, x, "le0", "c1")],
        "Q": [con(y[0]**2 + y[1]**2 - R, y, "le0", "q1")],
    }


def ex47():
    a = sp.Symbol("a")
    x = sp.symbols("x1:3")
    y = sp.symbols("y1:3")
    return {
        "name": "ex47",
        "description": "ellipse minus the open unit disk; Q a wedge cut at y2 >= a",
        "n": 2, "m": 2, "A": [[1, 0], [0, 1]],
        "parameters": {"a": 0},
        "C": [con(x[0]**2 / 9 + x[1]**2 / 4 - 1, x, "le0", "c1"),
              con(x[0]**2 + x[1]**2 - 1, x, "ge0", "c2")],
        "Q": [con(y[1] - y[0], y, "le0", "q1"),
              con(y[0] - 2, y, "le0", "q2"),
              con(y[1] - a, y, "ge0", "q3")],
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for build in (ex41, ex42, ex43, ex44, ex45, ex46, ex47):
        doc = build()
        path = OUT / f"{doc['name']}.json"
        path.write_text(json.dumps(doc, indent=1) + "\n")
        print("wrote", path)


if __name__ == "__main__":
    main()
