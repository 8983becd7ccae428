"""Problem data for the split feasibility problem with polynomial sets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .poly import Polynomial


def half_degree(p: Polynomial) -> int:
    """``ceil(deg(p) / 2)``, with 0 for constants and the zero polynomial."""
    deg = p.degree
    return 0 if deg <= 0 else math.ceil(deg / 2)


@dataclass(frozen=True)
class SfpProblem:
    """Find ``x`` with ``f_i(x) >= 0`` for all i and ``g_j(Ax) >= 0`` for all j.

    ``h`` holds the composed constraints ``h_j(x) = g_j(Ax)`` and ``d`` the
    base relaxation degree (the largest half-degree over ``f`` and ``h``).
    """

    n: int
    m: int
    A: np.ndarray
    f: tuple[Polynomial, ...]
    g: tuple[Polynomial, ...]
    name: str = ""
    f_labels: tuple[str, ...] = ()
    g_labels: tuple[str, ...] = ()
    h: tuple[Polynomial, ...] = field(init=False)
    d: int = field(init=False)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape != (self.m, self.n):
            raise ValueError(f"A has shape {A.shape}, expected ({self.m}, {self.n})")
        if not np.all(np.isfinite(A)):
            raise ValueError("A has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        f = tuple(self.f)
        g = tuple(self.g)
        if not f and not g:
            raise ValueError("at least one constraint is required")
        for i, p in enumerate(f):
            if p.n != self.n:
                raise ValueError(f"f[{i}] has {p.n} variables, expected {self.n}")
        for j, p in enumerate(g):
            if p.n != self.m:
                raise ValueError(f"g[{j}] has {p.n} variables, expected {self.m}")
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "g", g)
        if not self.f_labels:
            object.__setattr__(self, "f_labels", tuple(f"f{i + 1}" for i in range(len(f))))
        if not self.g_labels:
            object.__setattr__(self, "g_labels", tuple(f"g{j + 1}" for j in range(len(g))))
        h = tuple(p.compose_linear(A) for p in g)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "d", max(max(half_degree(p) for p in f + h), 1))

    @property
    def constraints(self) -> tuple[Polynomial, ...]:
        """All constraints over x: ``f_1..f_r`` then ``h_1..h_t``."""
        return self.f + self.h

    def with_ball(self, R: float) -> "SfpProblem":
        """Append the redundant constraint ``R - ||[x]_d||^2 >= 0`` to ``f``."""
        from .moment import enumerate_basis

        ball = Polynomial.constant(self.n, R)
        for alpha in enumerate_basis(self.n, self.d).exponents:
            ball = ball - Polynomial(self.n, {tuple(2 * a for a in alpha): 1.0})
        return SfpProblem(self.n, self.m, self.A, self.f + (ball,), self.g, self.name,
                          self.f_labels + ("ball",), self.g_labels)
