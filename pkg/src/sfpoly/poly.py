"""Sparse multivariate polynomials with real coefficients.

A :class:`Polynomial` stores a map from exponent tuples to ``float``
coefficients in canonical form (no stored zeros).  Monomials are ordered
graded-lexicographically: by total degree first, then so that ``x1``
precedes ``x2``, i.e. ``1, x1, ..., xn, x1^2, x1*x2, ..., xn^2, ...``.
"""

from __future__ import annotations

import ast
import math
import re
from collections.abc import Iterable, Mapping, Sequence
from typing import Union

import numpy as np

DEGREE_CAP = 20
DROP_TOL = 0.0

Exponent = tuple[int, ...]
Number = Union[int, float]


class DegreeCapError(ValueError):
    """Raised when an operation would exceed :data:`DEGREE_CAP`."""


def grlex_key(alpha: Sequence[int]) -> tuple:
    """Sort key realizing the graded lexicographic order."""
    return (sum(alpha), tuple(-a for a in alpha))


def _check_cap(deg: int, cap: int | None) -> None:
    cap = DEGREE_CAP if cap is None else cap
    if deg > cap:
        raise DegreeCapError(f"total degree {deg} exceeds cap {cap}")


class Polynomial:
    """Immutable sparse polynomial in ``n`` variables."""

    __slots__ = ("n", "_terms", "_arrays")

    def __init__(self, n: int, terms: Mapping[Exponent, float] | Iterable | None = None,
                 drop_tol: float | None = None):
        if n < 0:
            raise ValueError("variable count must be nonnegative")
        self.n = int(n)
        tol = DROP_TOL if drop_tol is None else drop_tol
        items = terms.items() if isinstance(terms, Mapping) else (terms or ())
        acc: dict[Exponent, float] = {}
        for alpha, c in items:
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.n:
                raise ValueError(f"exponent {alpha} has length {len(alpha)}, expected {self.n}")
            if any(a < 0 for a in alpha):
                raise ValueError(f"negative exponent in {alpha}")
            c = float(c)
            if not math.isfinite(c):
                raise ValueError(f"non-finite coefficient {c}")
            acc[alpha] = acc.get(alpha, 0.0) + c
        self._terms = {a: c for a, c in acc.items() if c != 0.0 and abs(c) > tol}
        self._arrays = None

    # -- construction helpers -------------------------------------------------
    @classmethod
    def constant(cls, n: int, c: Number) -> "Polynomial":
        return cls(n, {(0,) * n: c})

    @classmethod
    def variable(cls, n: int, i: int) -> "Polynomial":
        """The coordinate polynomial ``x_{i+1}`` (``i`` is zero-based)."""
        if not 0 <= i < n:
            raise IndexError(f"variable index {i} out of range for n={n}")
        alpha = [0] * n
        alpha[i] = 1
        return cls(n, {tuple(alpha): 1.0})

    @classmethod
    def zero(cls, n: int) -> "Polynomial":
        return cls(n)

    @classmethod
    def from_linear(cls, coeffs: Sequence[float], const: float = 0.0) -> "Polynomial":
        n = len(coeffs)
        terms = {(0,) * n: const}
        for i, a in enumerate(coeffs):
            alpha = [0] * n
            alpha[i] = 1
            terms[tuple(alpha)] = a
        return cls(n, terms)

    @classmethod
    def from_quadratic(cls, B, b, c: float = 0.0, center=None) -> "Polynomial":
        """``1/2 (x-center)^T B (x-center) + b^T (x-center) + c``."""
        B = np.asarray(B, dtype=float)
        b = np.asarray(b, dtype=float)
        n = len(b)
        x = [cls.variable(n, i) for i in range(n)]
        if center is not None:
            x = [xi - float(ci) for xi, ci in zip(x, center)]
        p = cls.constant(n, c)
        for i in range(n):
            p = p + b[i] * x[i]
            for j in range(n):
                if B[i, j] != 0.0:
                    p = p + 0.5 * B[i, j] * x[i] * x[j]
        return p

    # -- basic properties -----------------------------------------------------
    @property
    def terms(self) -> dict[Exponent, float]:
        return dict(self._terms)

    def items(self):
        """Terms in graded-lex order."""
        return sorted(self._terms.items(), key=lambda t: grlex_key(t[0]))

    @property
    def degree(self) -> float:
        """Total degree; ``-inf`` for the zero polynomial."""
        if not self._terms:
            return -math.inf
        return max(sum(a) for a in self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, alpha: Sequence[int]) -> float:
        return self._terms.get(tuple(alpha), 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, float)):
            other = Polynomial.constant(self.n, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.n == other.n and self._terms == other._terms

    def __hash__(self):
        return hash((self.n, frozenset(self._terms.items())))

    def allclose(self, other: "Polynomial", atol: float = 1e-9) -> bool:
        return self.max_coeff_diff(other) <= atol

    def max_coeff_diff(self, other: "Polynomial") -> float:
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.coefficient(a) - other.coefficient(a)) for a in keys), default=0.0)

    def prune(self, tol: float) -> "Polynomial":
        return Polynomial(self.n, self._terms, drop_tol=tol)

    # -- arithmetic -----------------------------------------------------------
    def _coerce(self, other) -> "Polynomial":
        if isinstance(other, Polynomial):
            if other.n != self.n:
                if other.degree <= 0:
                    return Polynomial.constant(self.n, other.coefficient((0,) * other.n))
                raise ValueError(f"variable count mismatch: {self.n} vs {other.n}")
            return other
        if isinstance(other, (int, float, np.floating, np.integer)):
            return Polynomial.constant(self.n, float(other))
        raise TypeError(f"cannot combine Polynomial with {type(other).__name__}")

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        acc = dict(self._terms)
        for a, c in other._terms.items():
            acc[a] = acc.get(a, 0.0) + c
        return Polynomial(self.n, acc)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.n, {a: -c for a, c in self._terms.items()})

    def __sub__(self, other) -> "Polynomial":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "Polynomial":
        return self._coerce(other) - self

    def scale(self, c: Number) -> "Polynomial":
        return Polynomial(self.n, {a: c * v for a, v in self._terms.items()})

    def mul(self, other, cap: int | None = None) -> "Polynomial":
        other = self._coerce(other)
        if self.is_zero() or other.is_zero():
            return Polynomial.zero(self.n)
        _check_cap(self.degree + other.degree, cap)
        acc: dict[Exponent, float] = {}
        for a, c in self._terms.items():
            for b, d in other._terms.items():
                key = tuple(x + y for x, y in zip(a, b))
                acc[key] = acc.get(key, 0.0) + c * d
        return Polynomial(self.n, acc)

    def __mul__(self, other) -> "Polynomial":
        if isinstance(other, (int, float, np.floating, np.integer)):
            return self.scale(float(other))
        return self.mul(other)

    __rmul__ = __mul__

    def __truediv__(self, c: Number) -> "Polynomial":
        return self.scale(1.0 / c)

    def pow(self, e: int, cap: int | None = None) -> "Polynomial":
        if e < 0:
            raise ValueError("negative powers are not polynomials")
        if e == 0:
            return Polynomial.constant(self.n, 1.0)
        if not self.is_zero():
            _check_cap(self.degree * e, cap)
        result = Polynomial.constant(self.n, 1.0)
        base = self
        while e:
            if e & 1:
                result = result.mul(base, cap)
            e >>= 1
            if e:
                base = base.mul(base, cap)
        return result

    def __pow__(self, e: int) -> "Polynomial":
        return self.pow(int(e))

    # -- evaluation -----------------------------------------------------------
    def _as_arrays(self):
        if self._arrays is None:
            items = self.items()
            E = np.array([a for a, _ in items], dtype=np.int64).reshape(len(items), self.n)
            c = np.array([v for _, v in items], dtype=float)
            self._arrays = (E, c)
        return self._arrays

    def eval(self, u) -> float | np.ndarray:
        """Evaluate at a point (shape ``(n,)``) or at rows of ``(k, n)``."""
        u = np.asarray(u, dtype=float)
        if u.ndim not in (1, 2) or u.shape[-1] != self.n:
            raise ValueError(f"point has shape {u.shape}, expected trailing dimension {self.n}")
        E, c = self._as_arrays()
        if len(c) == 0:
            return 0.0 if u.ndim <= 1 else np.zeros(u.shape[0])
        if u.ndim == 1:
            return float(np.prod(u[None, :] ** E, axis=1) @ c)
        mons = np.prod(u[:, None, :] ** E[None, :, :], axis=2)
        return mons @ c

    __call__ = eval

    # -- calculus -------------------------------------------------------------
    def diff(self, i: int) -> "Polynomial":
        acc = {}
        for a, c in self._terms.items():
            if a[i] > 0:
                b = list(a)
                b[i] -= 1
                acc[tuple(b)] = c * a[i]
        return Polynomial(self.n, acc)

    def gradient(self) -> list["Polynomial"]:
        return [self.diff(i) for i in range(self.n)]

    def hessian(self) -> list[list["Polynomial"]]:
        g = self.gradient()
        H = [[None] * self.n for _ in range(self.n)]
        for i in range(self.n):
            for j in range(i, self.n):
                H[i][j] = H[j][i] = g[i].diff(j)
        return H

    # -- composition ----------------------------------------------------------
    def compose_linear(self, A) -> "Polynomial":
        """Return ``h(x) = p(A x)`` for an ``m x n`` matrix ``A`` with ``m = p.n``."""
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != self.n:
            raise ValueError(f"matrix shape {A.shape} incompatible with {self.n} variables")
        if not np.all(np.isfinite(A)):
            raise ValueError("matrix has non-finite entries")
        ncols = A.shape[1]
        forms = [Polynomial.from_linear(A[i]) for i in range(self.n)]
        powers: dict[tuple[int, int], Polynomial] = {}

        def power(i: int, e: int) -> Polynomial:
            if e == 0:
                return Polynomial.constant(ncols, 1.0)
            if (i, e) not in powers:
                powers[(i, e)] = forms[i] if e == 1 else power(i, e - 1).mul(forms[i])
            return powers[(i, e)]

        result = Polynomial.zero(ncols)
        for alpha, c in self.items():
            term = Polynomial.constant(ncols, c)
            for i, e in enumerate(alpha):
                if e:
                    term = term.mul(power(i, e))
            result = result + term
        return result

    def rename(self, n: int, index_map: Sequence[int]) -> "Polynomial":
        """Embed into ``n`` variables; variable ``i`` becomes ``index_map[i]``."""
        acc = {}
        for a, c in self._terms.items():
            b = [0] * n
            for i, e in enumerate(a):
                b[index_map[i]] += e
            acc[tuple(b)] = acc.get(tuple(b), 0.0) + c
        return Polynomial(n, acc)

    # -- text form ------------------------------------------------------------
    def to_terms(self) -> list[dict]:
        return [{"coeff": c, "exps": list(a)} for a, c in self.items()]

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[Mapping]) -> "Polynomial":
        return cls(n, [(t["exps"], t["coeff"]) for t in terms])

    def __str__(self) -> str:
        return format_polynomial(self)

    def __repr__(self) -> str:
        return f"Polynomial({self.n}, {format_polynomial(self)!r})"


def format_polynomial(p: Polynomial, var: str = "x") -> str:
    """Render as ``c * x1^a1 * ... * xn^an`` terms joined by ``+``/``-``."""
    if p.is_zero():
        return "0"
    out = []
    for alpha, c in p.items():
        mono = " * ".join(
            f"{var}{i + 1}" if e == 1 else f"{var}{i + 1}^{e}"
            for i, e in enumerate(alpha) if e
        )
        sign = "-" if c < 0 else "+"
        mag = repr(abs(c))
        body = f"{mag} * {mono}" if mono else mag
        out.append((sign, body))
    first_sign, first = out[0]
    text = ("-" if first_sign == "-" else "") + first
    for sign, body in out[1:]:
        text += f" {sign} {body}"
    return text


def parse_polynomial(text: str, n: int, var: str = "x") -> Polynomial:
    """Parse arithmetic over ``x1..xn`` and numbers.

    Accepts ``+ - *``, parentheses and nonnegative integer powers written
    ``^`` or ``**``, which covers the output of :func:`format_polynomial`.
    """
    s = text.strip()
    if not s:
        raise ValueError("empty polynomial text")
    try:
        tree = ast.parse(s.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}: {exc.msg}") from None
    name_re = re.compile(rf"^{re.escape(var)}(\d+)$")

    def ev(node) -> Polynomial:
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) \
                and not isinstance(node.value, bool):
            return Polynomial.constant(n, float(node.value))
        if isinstance(node, ast.Name):
            m = name_re.match(node.id)
            if not m:
                raise ValueError(f"unknown variable {node.id!r}")
            i = int(m.group(1)) - 1
            if not 0 <= i < n:
                raise ValueError(f"variable {node.id!r} out of range for n={n}")
            return Polynomial.variable(n, i)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                e = node.right
                if isinstance(e, ast.Constant) and isinstance(e.value, int) and e.value >= 0:
                    return ev(node.left).pow(e.value)
                raise ValueError(f"exponents must be nonnegative integer literals in {text!r}")
            a, b = ev(node.left), ev(node.right)
            if isinstance(node.op, ast.Add):
                return a + b
            if isinstance(node.op, ast.Sub):
                return a - b
            if isinstance(node.op, ast.Mult):
                return a * b
            if isinstance(node.op, ast.Div) and b.degree <= 0 and not b.is_zero():
                return a / b.coefficient((0,) * n)
        raise ValueError(f"unsupported syntax in {text!r}")

    return ev(tree.body)


def compose_linear(g: Polynomial, A) -> Polynomial:
    return g.compose_linear(A)


def eval_poly(p: Polynomial, u) -> float:
    u = np.asarray(u, dtype=float)
    if u.ndim != 1 or len(u) != p.n:
        raise ValueError(f"point length {u.shape} does not match {p.n} variables")
    return p.eval(u)
