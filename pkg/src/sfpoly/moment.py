"""Monomial bases, localizing matrices and the moment relaxation of C ∩ H."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from math import comb

import numpy as np
import scipy.sparse as sp

from .poly import Polynomial
from .problem import SfpProblem, half_degree
from .sdp import SdpBlock, SdpProblem

MAX_BASIS_SIZE = 50_000


@dataclass(frozen=True, eq=False)
class MonomialBasis:
    """Exponents of ``N^n_d`` listed in graded-lex order."""

    n: int
    d: int
    exponents: tuple[tuple[int, ...], ...]
    index: dict = field(repr=False)

    def __len__(self) -> int:
        return len(self.exponents)

    def __getitem__(self, i: int) -> tuple[int, ...]:
        return self.exponents[i]

    def position(self, alpha) -> int:
        return self.index[tuple(alpha)]

    @property
    def array(self) -> np.ndarray:
        return np.array(self.exponents, dtype=np.int64).reshape(len(self), self.n)

    def monomials(self, u) -> np.ndarray:
        """The vector ``[u]_d``."""
        u = np.asarray(u, dtype=float)
        return np.prod(u[None, :] ** self.array, axis=1)


@lru_cache(maxsize=None)
def enumerate_basis(n: int, d: int) -> MonomialBasis:
    if n < 1 or d < 0:
        raise ValueError(f"need n >= 1 and d >= 0, got n={n}, d={d}")
    size = comb(n + d, n)
    if size > MAX_BASIS_SIZE:
        raise ValueError(f"basis N^{n}_{d} has {size} elements, above cap {MAX_BASIS_SIZE}")
    exps = []
    for deg in range(d + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for i in combo:
                alpha[i] += 1
            exps.append(tuple(alpha))
    exps = tuple(exps)
    return MonomialBasis(n, d, exps, {a: i for i, a in enumerate(exps)})


@dataclass(frozen=True, eq=False)
class TruncatedMomentVector:
    """A vector ``y`` labeled by the exponents of ``basis``."""

    basis: MonomialBasis
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (len(self.basis),):
            raise ValueError(f"expected {len(self.basis)} moments, got shape {values.shape}")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_point(cls, u, degree: int) -> "TruncatedMomentVector":
        u = np.asarray(u, dtype=float)
        basis = enumerate_basis(len(u), degree)
        return cls(basis, basis.monomials(u))

    def __getitem__(self, alpha) -> float:
        return float(self.values[self.basis.position(alpha)])

    @property
    def degree(self) -> int:
        return self.basis.d


def _triu_pairs(side: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(side)


@dataclass(frozen=True, eq=False)
class LocalizingOperator:
    """Linear map ``y -> L_f^{(k)}[y]``.

    Stored as a sparse matrix ``svec_map`` sending ``y`` to the upper
    triangle (row-major, diagonal included) of the localizing matrix.
    """

    f: Polynomial
    k: int
    s: int
    side_basis: MonomialBasis
    moment_basis: MonomialBasis
    svec_map: sp.csc_matrix = field(repr=False)

    @property
    def side(self) -> int:
        return len(self.side_basis)

    @property
    def coeff_mats(self) -> list[tuple[tuple[int, ...], np.ndarray]]:
        """``(alpha, F_alpha)`` pairs for every alpha with nonzero ``F_alpha``."""
        out = []
        csc = self.svec_map
        rows, cols = _triu_pairs(self.side)
        for j in range(csc.shape[1]):
            lo, hi = csc.indptr[j], csc.indptr[j + 1]
            if lo == hi:
                continue
            F = np.zeros((self.side, self.side))
            idx = csc.indices[lo:hi]
            F[rows[idx], cols[idx]] = csc.data[lo:hi]
            F = F + np.triu(F, 1).T
            out.append((self.moment_basis[j], F))
        return out

    def assemble(self, y: TruncatedMomentVector | np.ndarray) -> np.ndarray:
        if isinstance(y, TruncatedMomentVector):
            if y.basis.n != self.moment_basis.n or y.basis.d != self.moment_basis.d:
                raise ValueError(
                    f"moment vector of degree {y.basis.d} in {y.basis.n} variables does not "
                    f"match degree {self.moment_basis.d} in {self.moment_basis.n}")
            y = y.values
        y = np.asarray(y, dtype=float)
        if y.shape != (len(self.moment_basis),):
            raise ValueError(f"expected {len(self.moment_basis)} moments, got {y.shape}")
        return _unsvec(self.svec_map @ y, self.side)

    def symbolic(self) -> list[list[dict[tuple[int, ...], float]]]:
        """Entries as ``{alpha: coefficient}`` maps over the moments ``y_alpha``."""
        side = self.side
        out = [[{} for _ in range(side)] for _ in range(side)]
        rows, cols = _triu_pairs(side)
        coo = self.svec_map.tocoo()
        for t, j, v in zip(coo.row, coo.col, coo.data):
            alpha = self.moment_basis[j]
            p, q = rows[t], cols[t]
            out[p][q][alpha] = v
            out[q][p][alpha] = v
        return out


def _unsvec(v: np.ndarray, side: int) -> np.ndarray:
    M = np.zeros((side, side))
    M[np.triu_indices(side)] = v
    return M + np.triu(M, 1).T


def localizing_operator(f: Polynomial, k: int) -> LocalizingOperator:
    """Build ``L_f^{(k)}`` with block side degree ``s = k - ceil(deg f / 2)``."""
    if f.is_zero():
        raise ValueError("localizing matrix of the zero polynomial is identically zero")
    if f.degree > 2 * k:
        raise ValueError(f"deg(f) = {f.degree} exceeds 2k = {2 * k}")
    s = k - half_degree(f)
    side_basis = enumerate_basis(f.n, s)
    moment_basis = enumerate_basis(f.n, 2 * k)
    index = moment_basis.index
    rows, cols, vals = [], [], []
    terms = f.items()
    side_exps = side_basis.exponents
    t = 0
    for p in range(len(side_exps)):
        bp = side_exps[p]
        for q in range(p, len(side_exps)):
            bq = side_exps[q]
            base = tuple(a + b for a, b in zip(bp, bq))
            for delta, c in terms:
                rows.append(t)
                cols.append(index[tuple(a + b for a, b in zip(base, delta))])
                vals.append(c)
            t += 1
    svec_map = sp.csc_matrix((vals, (rows, cols)), shape=(t, len(moment_basis)))
    svec_map.sum_duplicates()
    return LocalizingOperator(f, k, s, side_basis, moment_basis, svec_map)


def moment_operator(n: int, k: int) -> LocalizingOperator:
    return localizing_operator(Polynomial.constant(n, 1.0), k)


def assemble(opr: LocalizingOperator, y) -> np.ndarray:
    return opr.assemble(y)


def riesz(y: TruncatedMomentVector, p: Polynomial) -> float:
    """The Riesz functional: replace each monomial ``x^alpha`` of ``p`` by ``y_alpha``."""
    if p.n != y.basis.n:
        raise ValueError(f"polynomial has {p.n} variables, moments have {y.basis.n}")
    if p.degree > y.basis.d:
        raise ValueError(f"deg(p) = {p.degree} exceeds moment degree {y.basis.d}")
    return float(sum(c * y[alpha] for alpha, c in p.items()))


def objective_vector(n: int, d: int, k: int, xi: np.ndarray | None) -> np.ndarray:
    """Riesz coefficients of ``||[x]_d||^2 + xi^T [x]_{2d}`` over ``N^n_{2k}``."""
    basis = enumerate_basis(n, 2 * k)
    c = np.zeros(len(basis))
    for beta in enumerate_basis(n, d).exponents:
        c[basis.position(tuple(2 * b for b in beta))] += 1.0
    if xi is not None:
        low = enumerate_basis(n, 2 * d)
        xi = np.asarray(xi, dtype=float)
        if xi.shape != (len(low),):
            raise ValueError(f"xi must have {len(low)} entries, got {xi.shape}")
        for alpha, v in zip(low.exponents, xi):
            c[basis.position(alpha)] += v
    return c


@dataclass(frozen=True, eq=False)
class RelaxationInstance:
    """The order-``k`` moment relaxation: blocks for ``1, f_1..f_r, h_1..h_t``."""

    k: int
    basis: MonomialBasis
    blocks: tuple[LocalizingOperator, ...]
    labels: tuple[str, ...]
    objective: np.ndarray

    def objective_value(self, y: TruncatedMomentVector) -> float:
        return float(self.objective @ y.values)

    def to_sdp(self) -> SdpProblem:
        blocks = [SdpBlock(op.side, op.svec_map, label) for op, label in zip(self.blocks, self.labels)]
        return SdpProblem(len(self.basis), blocks, self.objective, labels=self.labels)


def build_relaxation(prob: SfpProblem, k: int, xi=None) -> RelaxationInstance:
    if k < prob.d:
        raise ValueError(f"relaxation order k={k} is below the base degree d={prob.d}")
    if xi is not None and np.linalg.norm(xi) > 0.5 + 1e-12:
        raise ValueError(f"perturbation norm {np.linalg.norm(xi):.6g} exceeds 1/2")
    basis = enumerate_basis(prob.n, 2 * k)
    blocks = [moment_operator(prob.n, k)]
    labels = ["moment"]
    for label, p in zip(prob.f_labels, prob.f):
        if p.is_zero():
            continue
        blocks.append(localizing_operator(p, k))
        labels.append(label)
    for label, p in zip(prob.g_labels, prob.h):
        if p.is_zero():
            continue
        blocks.append(localizing_operator(p, k))
        labels.append(label)
    c = objective_vector(prob.n, prob.d, k, xi)
    return RelaxationInstance(k, basis, tuple(blocks), tuple(labels), c)
